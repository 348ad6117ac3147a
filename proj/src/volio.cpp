/*
 * Copyright 2026 The ulfenc Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ulfenc/volio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace ulfenc::volio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kSidecarSuffix = ".vol.json";
constexpr std::string_view kBlobSuffix = ".vol.raw";

uint32_t byteswap32(uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string stem_of(const fs::path& sidecar) {
  std::string name = sidecar.filename().string();
  return name.substr(0, name.size() - kSidecarSuffix.size());
}

json read_json(const fs::path& path, IoErrorCode parse_code) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(parse_code, path.string() + ": " + e.what());
  }
}

Shape3 parse_shape(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": shape must be [D,H,W]");
  }
  Shape3 s;
  try {
    s = {j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
  } catch (const json::exception&) {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": shape entries must be integers");
  }
  if (!s.valid()) throw IoError(IoErrorCode::kMalformedHeader, where + ": shape must be positive");
  return s;
}

struct Header {
  Shape3 shape;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  fs::path blob;
};

Header read_header(const fs::path& sidecar) {
  const json j = read_json(sidecar, IoErrorCode::kMalformedHeader);
  const std::string where = sidecar.string();
  if (!j.is_object()) throw IoError(IoErrorCode::kMalformedHeader, where + ": not an object");
  for (const char* key : {"format_version", "shape", "spacing_mm", "dtype", "blob"}) {
    if (!j.contains(key)) {
      throw IoError(IoErrorCode::kMalformedHeader, where + ": missing field '" + key + "'");
    }
  }
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kFormatVersion) {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": unsupported format_version");
  }
  if (j["dtype"] != "f32le") {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": dtype must be f32le");
  }
  Header h;
  h.shape = parse_shape(j["shape"], where);
  const json& sp = j["spacing_mm"];
  if (!sp.is_array() || sp.size() != 3 || !std::all_of(sp.begin(), sp.end(), [](const json& v) {
        return v.is_number();
      })) {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": spacing_mm must be three numbers");
  }
  for (int i = 0; i < 3; ++i) h.spacing[i] = sp[i].get<double>();
  if (!j["blob"].is_string()) throw IoError(IoErrorCode::kMalformedHeader, where + ": blob must be a string");
  h.blob = sidecar.parent_path() / j["blob"].get<std::string>();
  return h;
}

}  // namespace

std::string_view to_string(IoErrorCode code) {
  switch (code) {
    case IoErrorCode::kIo: return "io error";
    case IoErrorCode::kMalformedHeader: return "malformed header";
    case IoErrorCode::kTruncatedPayload: return "truncated payload";
    case IoErrorCode::kNonFiniteValues: return "non-finite values";
  }
  return "unknown";
}

fs::path sidecar_path(const fs::path& path) {
  const std::string s = path.string();
  return ends_with(s, kSidecarSuffix) ? path : fs::path(s + std::string(kSidecarSuffix));
}

Volume3D read_volume(const fs::path& path) {
  const fs::path sidecar = sidecar_path(path);
  const Header h = read_header(sidecar);

  std::ifstream in(h.blob, std::ios::binary);
  if (!in) throw IoError(IoErrorCode::kIo, "cannot open blob " + h.blob.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<int64_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  const int64_t expected = h.shape.size() * static_cast<int64_t>(sizeof(float));
  if (bytes < expected) {
    throw IoError(IoErrorCode::kTruncatedPayload,
                  h.blob.string() + ": " + std::to_string(bytes / 4) + " values, header declares " +
                      std::to_string(h.shape.size()));
  }
  if (bytes > expected) {
    throw IoError(IoErrorCode::kMalformedHeader,
                  h.blob.string() + ": payload larger than declared shape " + to_string(h.shape));
  }

  std::vector<float> voxels(static_cast<size_t>(h.shape.size()));
  in.read(reinterpret_cast<char*>(voxels.data()), expected);
  if (!in) throw IoError(IoErrorCode::kIo, "short read on " + h.blob.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : voxels) v = std::bit_cast<float>(byteswap32(std::bit_cast<uint32_t>(v)));
  }
  for (size_t i = 0; i < voxels.size(); ++i) {
    if (!std::isfinite(voxels[i])) {
      throw IoError(IoErrorCode::kNonFiniteValues,
                    h.blob.string() + ": non-finite value at index " + std::to_string(i));
    }
  }
  return Volume3D(h.shape, std::move(voxels), h.spacing);
}

void write_volume(const Volume3D& vol, const fs::path& path) {
  const fs::path sidecar = sidecar_path(path);
  const std::string stem = stem_of(sidecar);
  const std::string blob_name = stem + std::string(kBlobSuffix);

  const Shape3& s = vol.shape();
  json j;
  j["format_version"] = kFormatVersion;
  j["shape"] = {s.d, s.h, s.w};
  j["spacing_mm"] = {vol.spacing_mm()[0], vol.spacing_mm()[1], vol.spacing_mm()[2]};
  j["dtype"] = "f32le";
  j["blob"] = blob_name;

  {
    std::ofstream out(sidecar_path(path), std::ios::trunc);
    if (!out) throw IoError(IoErrorCode::kIo, "cannot write " + sidecar.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError(IoErrorCode::kIo, "write failed on " + sidecar.string());
  }

  const fs::path blob = sidecar.parent_path() / blob_name;
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorCode::kIo, "cannot write " + blob.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (float v : vol.data()) {
      const uint32_t le = byteswap32(std::bit_cast<uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof(le));
    }
  } else {
    out.write(reinterpret_cast<const char*>(vol.data().data()),
              static_cast<std::streamsize>(vol.size() * sizeof(float)));
  }
  if (!out) throw IoError(IoErrorCode::kIo, "write failed on " + blob.string());
}

double percentile(std::vector<float> values, double q) {
  if (values.empty()) throw Error("percentile of an empty set");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

Volume3D normalize(const Volume3D& vol, double lo_pct, double hi_pct) {
  if (vol.empty()) throw Error("normalize: empty volume");
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 1.0)) {
    throw Error("normalize: percentiles must satisfy 0 <= lo < hi <= 1");
  }
  const double lo = percentile(vol.voxels(), lo_pct);
  const double hi = percentile(vol.voxels(), hi_pct);
  Volume3D out(vol.shape(), 0.0f, vol.spacing_mm());
  if (!(hi > lo)) return out;
  const double scale = 1.0 / (hi - lo);
  auto src = vol.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) {
    const double v = std::clamp(static_cast<double>(src[i]), lo, hi);
    dst[i] = static_cast<float>(std::clamp((v - lo) * scale, 0.0, 1.0));
  }
  return out;
}

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  throw Error("unknown split '" + std::string(s) + "' (expected train or val)");
}

std::string lf_key(Contrast c) { return "lf_" + std::string(contrast_name(c)); }
std::string hf_key(Contrast c) { return "hf_" + std::string(contrast_name(c)); }

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

const ManifestEntry& DatasetManifest::find(const std::string& subject_id) const {
  for (const auto& e : entries) {
    if (e.subject_id == subject_id) return e;
  }
  throw Error("subject '" + subject_id + "' not in manifest");
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json j;
  j["format_version"] = manifest.format_version;
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["subject_id"] = e.subject_id;
    je["split"] = std::string(to_string(e.split));
    je["shape"] = {e.shape.d, e.shape.h, e.shape.w};
    je["files"] = e.files;
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError(IoErrorCode::kIo, "write failed on " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  const json j = read_json(path, IoErrorCode::kMalformedHeader);
  const std::string where = path.string();
  DatasetManifest m;
  m.root = path.parent_path();
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kFormatVersion) {
      throw IoError(IoErrorCode::kMalformedHeader, where + ": unsupported format_version");
    }
    std::set<std::string> seen;
    for (const json& je : j.at("entries")) {
      ManifestEntry e;
      e.subject_id = je.at("subject_id").get<std::string>();
      e.split = parse_split(je.at("split").get<std::string>());
      e.shape = parse_shape(je.at("shape"), where);
      e.files = je.at("files").get<std::map<std::string, std::string>>();
      if (!seen.insert(e.subject_id).second) {
        throw IoError(IoErrorCode::kMalformedHeader, where + ": duplicate subject id " + e.subject_id);
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IoError(IoErrorCode::kMalformedHeader, where + ": " + e.what());
  }

  for (const auto& e : m.entries) {
    std::vector<std::string> keys{kMaskKey};
    for (Contrast c : kContrasts) {
      keys.push_back(lf_key(c));
      keys.push_back(hf_key(c));
    }
    for (const auto& key : keys) {
      auto it = e.files.find(key);
      if (it == e.files.end()) {
        throw IoError(IoErrorCode::kMalformedHeader, where + ": " + e.subject_id + " lacks " + key);
      }
      const fs::path sidecar = sidecar_path(m.root / it->second);
      if (!fs::exists(sidecar)) {
        throw IoError(IoErrorCode::kIo, where + ": missing file " + sidecar.string());
      }
      if (read_header(sidecar).shape != e.shape) {
        throw IoError(IoErrorCode::kMalformedHeader,
                      sidecar.string() + ": shape differs from manifest " + to_string(e.shape));
      }
    }
  }
  return m;
}

PairedSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                         bool normalize_intensities) {
  auto load = [&](const std::string& key) {
    return read_volume(manifest.root / entry.files.at(key));
  };
  PairedSample s;
  s.subject_id = entry.subject_id;
  for (Contrast c : kContrasts) {
    Volume3D lf = load(lf_key(c));
    Volume3D hf = load(hf_key(c));
    s.lf[contrast_index(c)] = normalize_intensities ? normalize(lf) : std::move(lf);
    s.hf[contrast_index(c)] = normalize_intensities ? normalize(hf) : std::move(hf);
  }
  s.mask = load(kMaskKey);
  s.validate();
  return s;
}

}  // namespace ulfenc::volio
