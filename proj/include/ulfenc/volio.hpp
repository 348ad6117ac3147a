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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ulfenc/volume.hpp"

namespace ulfenc::volio {

inline constexpr int kFormatVersion = 1;

enum class IoErrorCode {
  kIo,
  kMalformedHeader,
  kTruncatedPayload,
  kNonFiniteValues,
};

std::string_view to_string(IoErrorCode code);

class IoError : public Error {
 public:
  IoError(IoErrorCode code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}
  [[nodiscard]] IoErrorCode code() const { return code_; }

 private:
  IoErrorCode code_;
};

/// Path of the sidecar for `path`: appends ".vol.json" unless already present.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Reads a `<name>.vol.json` sidecar and its raw f32le blob.
Volume3D read_volume(const std::filesystem::path& path);

/// Writes `<name>.vol.json` and `<name>.vol.raw`. The blob holds D*H*W
/// little-endian IEEE-754 floats in depth-major order.
void write_volume(const Volume3D& vol, const std::filesystem::path& path);

/// Percentile of `values` with linear interpolation between order statistics.
double percentile(std::vector<float> values, double q);

/// Clips to the [lo_pct, hi_pct] percentiles and maps affinely onto [0, 1].
/// A volume whose clipped range is empty maps to all zeros.
Volume3D normalize(const Volume3D& vol, double lo_pct = 0.005, double hi_pct = 0.995);

enum class Split { kTrain, kVal };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Keys used in `ManifestEntry::files`.
std::string lf_key(Contrast c);
std::string hf_key(Contrast c);
inline constexpr const char* kMaskKey = "mask";

struct ManifestEntry {
  std::string subject_id;
  std::map<std::string, std::string> files;  // key -> sidecar path relative to the manifest
  Shape3 shape;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  int format_version = kFormatVersion;
  std::vector<ManifestEntry> entries;
  /// Directory relative paths resolve against; not serialized.
  std::filesystem::path root;

  [[nodiscard]] std::vector<const ManifestEntry*> split(Split s) const;
  [[nodiscard]] const ManifestEntry& find(const std::string& subject_id) const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Parses and validates a manifest: unique ids, every file present with the
/// declared shape.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Loads all seven volumes of an entry. Contrast volumes are normalized
/// per-volume when `normalize_intensities` is set.
PairedSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                         bool normalize_intensities = true);

}  // namespace ulfenc::volio
