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

#include "ulfenc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ulfenc/kernels.hpp"
#include "ulfenc/log.hpp"
#include "ulfenc/rng.hpp"

namespace ulfenc::phantom {

namespace fs = std::filesystem;

namespace {

// Zero-mean, unit-variance smooth random field.
std::vector<double> smooth_field(const Shape3& s, double sigma, Rng& rng) {
  Volume3D white(s);
  for (float& v : white.data()) v = static_cast<float>(rng.normal());
  const Volume3D smooth = kernels::gaussian_blur(white, {sigma, sigma, sigma});
  std::vector<double> f(smooth.data().begin(), smooth.data().end());
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(f.size()));
  for (double& v : f) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return f;
}

Volume3D render(const std::vector<int>& classes, const Shape3& s, const std::vector<double>& table,
                const std::array<double, 3>& spacing) {
  Volume3D v(s, 0.0f, spacing);
  for (int64_t i = 0; i < s.size(); ++i) v[i] = static_cast<float>(table[classes[i]]);
  // Partial-volume smoothing of the piecewise-constant class image.
  return kernels::gaussian_blur(v, {0.6, 0.6, 0.6});
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation(const std::array<double, 3>& a) {
  const double cz = std::cos(a[0]), sz = std::sin(a[0]);
  const double cy = std::cos(a[1]), sy = std::sin(a[1]);
  const double cx = std::cos(a[2]), sx = std::sin(a[2]);
  // Rotations about the d, h and w axes, composed as Rd * Rh * Rw; coordinates are (d, h, w).
  const Mat3 rd{{{1, 0, 0}, {0, cz, -sz}, {0, sz, cz}}};
  const Mat3 rh{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rw{{{cx, -sx, 0}, {sx, cx, 0}, {0, 0, 1}}};
  auto mul = [](const Mat3& p, const Mat3& q) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r[i][j] += p[i][k] * q[k][j];
    return r;
  };
  return mul(mul(rd, rh), rw);
}

}  // namespace

std::array<std::vector<double>, 3> default_tables(int n_classes) {
  if (n_classes == 4) {
    return {std::vector<double>{0.0, 0.22, 0.58, 0.88},   // T1w: CSF dark, WM bright
            std::vector<double>{0.0, 0.92, 0.62, 0.38},   // T2w: CSF bright
            std::vector<double>{0.0, 0.12, 0.72, 0.52}};  // FLAIR: CSF suppressed
  }
  const int k = n_classes - 1;
  std::vector<double> levels(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) levels[i] = k == 1 ? 0.8 : 0.2 + 0.7 * i / (k - 1);
  std::array<std::vector<double>, 3> t;
  for (auto& table : t) table.assign(static_cast<size_t>(n_classes), 0.0);
  for (int i = 0; i < k; ++i) {
    t[0][i + 1] = levels[i];
    t[1][i + 1] = levels[k - 1 - i];
    t[2][i + 1] = levels[(i + 1) % k];
  }
  return t;
}

void PhantomConfig::validate() const {
  if (shape.d < 16 || shape.h < 16 || shape.w < 16 || shape.d % 8 || shape.h % 8 || shape.w % 8) {
    throw ShapeError("phantom shape must be >= 16 and divisible by 8 per axis, got " +
                     to_string(shape));
  }
  if (n_tissue_classes < 2) throw Error("phantom needs at least 2 tissue classes");
  for (const auto& table : contrast_tables) {
    if (table.empty()) continue;
    if (static_cast<int>(table.size()) != n_tissue_classes) {
      throw Error("contrast table size must equal n_tissue_classes");
    }
    for (double v : table) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error("contrast table intensities must lie in [0,1]");
    }
  }
  if (!(lf_noise_sigma >= 0.0) || !(misreg_max_mm >= 0.0) || !(table_perturbation >= 0.0)) {
    throw Error("phantom sigmas, perturbation and misregistration must be non-negative");
  }
  for (double s : lf_blur_sigma) {
    if (!(s >= 0.0)) throw Error("phantom blur sigmas must be non-negative");
  }
}

PhantomConfig PhantomConfig::resolved() const {
  PhantomConfig c = *this;
  const auto defaults = default_tables(n_tissue_classes);
  for (int i = 0; i < 3; ++i) {
    if (c.contrast_tables[i].empty()) c.contrast_tables[i] = defaults[i];
  }
  return c;
}

PairedSample generate_sample(const PhantomConfig& config, uint64_t subject_seed, PhantomTrace* trace) {
  config.validate();
  const PhantomConfig cfg = config.resolved();
  const Shape3 s = cfg.shape;
  Rng rng(derive_seed(cfg.seed, {subject_seed}));

  // Head ellipsoid with per-subject pose and size.
  const std::array<double, 3> dims{static_cast<double>(s.d), static_cast<double>(s.h),
                                   static_cast<double>(s.w)};
  std::array<double, 3> center{}, semi{};
  for (int a = 0; a < 3; ++a) {
    center[a] = 0.5 * (dims[a] - 1.0) + rng.symmetric(0.04 * dims[a]);
    semi[a] = dims[a] * rng.uniform(0.36, 0.44);
  }
  const double field_sigma = std::max({dims[0], dims[1], dims[2]}) / 10.0;
  const auto texture = smooth_field(s, field_sigma, rng);
  const auto ventricles = smooth_field(s, field_sigma, rng);

  std::vector<int> classes(static_cast<size_t>(s.size()), 0);
  const int k = cfg.n_tissue_classes - 1;
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        const double pz = (static_cast<double>(z) - center[0]) / semi[0];
        const double py = (static_cast<double>(y) - center[1]) / semi[1];
        const double px = (static_cast<double>(x) - center[2]) / semi[2];
        const double r = std::sqrt(pz * pz + py * py + px * px);
        if (r > 1.0) continue;
        const int64_t i = s.index(z, y, x);
        if (k == 1) {
          classes[i] = 1;
          continue;
        }
        // Outer shell and central ventricle-like pockets share class 1.
        if (r > 0.88 || (r < 0.45 && ventricles[i] > 0.9)) {
          classes[i] = 1;
          continue;
        }
        const double depth = (0.88 - r) / 0.88 + 0.25 * texture[i];
        const int band = std::clamp(static_cast<int>(std::floor(depth * (k - 1) / 0.7)) + 2, 2, k);
        classes[i] = band;
      }
    }
  }

  PairedSample out;
  out.subject_id = "seed-" + std::to_string(subject_seed);
  out.mask = Volume3D(s, 0.0f, cfg.spacing_mm);
  for (int64_t i = 0; i < s.size(); ++i) out.mask[i] = classes[i] > 0 ? 1.0f : 0.0f;

  // Misregistration: shift uniform in the ball of radius misreg_max_mm, plus a
  // rotation small enough to move the head surface by at most half that.
  PhantomTrace tr;
  tr.head_center = center;
  tr.head_semi = semi;
  const double m = cfg.misreg_max_mm;
  std::array<double, 3> dir{rng.normal(), rng.normal(), rng.normal()};
  const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  const double radius = m * std::cbrt(rng.uniform());
  const double head_radius_mm = *std::max_element(semi.begin(), semi.end()) *
                                *std::max_element(cfg.spacing_mm.begin(), cfg.spacing_mm.end());
  const double max_angle = m > 0.0 ? 0.5 * m / head_radius_mm : 0.0;
  for (int a = 0; a < 3; ++a) {
    tr.shift_mm[a] = norm > 0.0 ? radius * dir[a] / norm : 0.0;
    tr.rotation_rad[a] = rng.symmetric(max_angle);
  }

  for (int c = 0; c < 3; ++c) {
    const auto& table = cfg.contrast_tables[c];
    tr.lf_tables[c] = table;
    for (int j = 1; j < cfg.n_tissue_classes; ++j) {
      const double delta = rng.symmetric(cfg.table_perturbation);
      tr.lf_tables[c][j] = std::clamp(table[j] + delta, 0.0, 1.0);
    }
  }

  const std::array<double, 3> spacing_dhw{cfg.spacing_mm[2], cfg.spacing_mm[1], cfg.spacing_mm[0]};
  kernels::SamplingGrid grid = kernels::identity_grid(s);
  if (m > 0.0) {
    const Mat3 rot = rotation(tr.rotation_rad);
    const std::array<double, 3> mid{0.5 * (dims[0] - 1.0), 0.5 * (dims[1] - 1.0), 0.5 * (dims[2] - 1.0)};
    for (int64_t i = 0; i < s.size(); ++i) {
      const std::array<double, 3> q{grid.z[i] - mid[0], grid.y[i] - mid[1], grid.x[i] - mid[2]};
      std::array<double, 3> src{};
      for (int a = 0; a < 3; ++a) {
        src[a] = rot[a][0] * q[0] + rot[a][1] * q[1] + rot[a][2] * q[2] + mid[a] +
                 tr.shift_mm[a] / spacing_dhw[a];
      }
      grid.z[i] = src[0];
      grid.y[i] = src[1];
      grid.x[i] = src[2];
    }
  }

  for (int c = 0; c < 3; ++c) {
    out.hf[c] = render(classes, s, cfg.contrast_tables[c], cfg.spacing_mm);
    Volume3D lf = render(classes, s, tr.lf_tables[c], cfg.spacing_mm);
    if (m > 0.0) lf = kernels::sample_trilinear(lf, grid);
    lf = kernels::gaussian_blur(lf, cfg.lf_blur_sigma);
    if (cfg.lf_noise_sigma > 0.0) {
      for (float& v : lf.data()) {
        v = static_cast<float>(std::clamp(v + rng.normal(0.0, cfg.lf_noise_sigma), 0.0, 1.0));
      }
    }
    out.lf[c] = std::move(lf);
  }

  if (trace != nullptr) *trace = std::move(tr);
  return out;
}

std::string subject_name(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sub-%03lld", static_cast<long long>(index));
  return buf;
}

volio::DatasetManifest generate_dataset(const PhantomConfig& cfg, int64_t n_subjects,
                                        const fs::path& out_dir) {
  if (n_subjects < 1) throw Error("generate_dataset: need at least one subject");
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw volio::IoError(volio::IoErrorCode::kIo, "cannot create " + out_dir.string());
  if (n_subjects <= 2) {
    log::warn("only " + std::to_string(n_subjects) +
              " subject(s): all go to the validation split, none to training");
  }

  volio::DatasetManifest manifest;
  manifest.root = out_dir;
  for (int64_t i = 0; i < n_subjects; ++i) {
    PairedSample sample = generate_sample(cfg, static_cast<uint64_t>(i));
    sample.subject_id = subject_name(i);

    volio::ManifestEntry entry;
    entry.subject_id = sample.subject_id;
    entry.shape = sample.shape();
    entry.split = i >= n_subjects - 2 ? volio::Split::kVal : volio::Split::kTrain;
    auto put = [&](const std::string& key, const Volume3D& v) {
      const std::string name = sample.subject_id + "_" + key + ".vol.json";
      volio::write_volume(v, out_dir / name);
      entry.files[key] = name;
    };
    for (Contrast c : kContrasts) {
      put(volio::lf_key(c), sample.low(c));
      put(volio::hf_key(c), sample.high(c));
    }
    put(volio::kMaskKey, sample.mask);
    manifest.entries.push_back(std::move(entry));
  }
  volio::write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace ulfenc::phantom
