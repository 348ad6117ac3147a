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

#include "ulfenc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ulfenc/rng.hpp"

namespace ulfenc::augment {

using nlohmann::json;

namespace {

constexpr std::array<double, 6> kAnchorsX{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

void check_range(const Range& r, const char* name) {
  if (!(r.lo >= 0.0 && r.hi >= r.lo)) {
    throw Error(std::string("augment: ") + name + " range must be non-negative and ordered");
  }
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string("augment: ") + name + " must lie in [0,1]");
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Mat3 rotation(double ad, double ah, double aw) {
  const Mat3 rd{{{1, 0, 0}, {0, std::cos(ad), -std::sin(ad)}, {0, std::sin(ad), std::cos(ad)}}};
  const Mat3 rh{{{std::cos(ah), 0, std::sin(ah)}, {0, 1, 0}, {-std::sin(ah), 0, std::cos(ah)}}};
  const Mat3 rw{{{std::cos(aw), -std::sin(aw), 0}, {std::sin(aw), std::cos(aw), 0}, {0, 0, 1}}};
  return matmul(matmul(rd, rh), rw);
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void AugmentConfig::validate() const {
  check_prob(p_intensity, "p_intensity");
  check_prob(p_degrade, "p_degrade");
  check_prob(p_geometric, "p_geometric");
  check_prob(p_flip, "p_flip");
  if (!(rotation_max_deg >= 0.0 && shift_max_vox >= 0.0 && shear_max >= 0.0 &&
        nonrigid_max_disp_vox >= 0.0)) {
    throw Error("augment: geometric ranges must be non-negative");
  }
  if (nonrigid_grid < 2) throw Error("augment: nonrigid_grid must be at least 2");
  check_range(noise_sigma_range, "noise_sigma");
  check_range(blur_sigma_range, "blur_sigma");
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_intensity = 0.0;
  c.p_degrade = 0.0;
  c.p_geometric = 0.0;
  return c;
}

Affine identity_affine() {
  return {{{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}}};
}

std::array<DegradeParams, 3> draw_degrade(const AugmentConfig& cfg, uint64_t rng_seed) {
  Rng rng(rng_seed);
  std::array<DegradeParams, 3> out{};
  for (auto& p : out) {
    p.noise_sigma = rng.uniform(cfg.noise_sigma_range.lo, cfg.noise_sigma_range.hi);
    for (double& b : p.blur_sigmas) b = rng.uniform(cfg.blur_sigma_range.lo, cfg.blur_sigma_range.hi);
  }
  return out;
}

AugmentPlan sample_plan(const AugmentConfig& cfg, uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  AugmentPlan plan;
  plan.seed = rng_seed;

  const bool use_geometric = rng.bernoulli(cfg.p_geometric);
  const bool use_intensity = rng.bernoulli(cfg.p_intensity);
  const bool use_degrade = rng.bernoulli(cfg.p_degrade);

  GeometricPlan geo;
  const double max_rad = cfg.rotation_max_deg * std::numbers::pi / 180.0;
  const double ad = rng.symmetric(max_rad);
  const double ah = rng.symmetric(max_rad);
  const double aw = rng.symmetric(max_rad);
  Mat3 shear{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) shear[i][j] = rng.symmetric(cfg.shear_max);
    }
  }
  const Mat3 linear = matmul(rotation(ad, ah, aw), shear);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) geo.affine[i][j] = linear[i][j];
    geo.affine[i][3] = rng.symmetric(cfg.shift_max_vox);
  }
  geo.flip_lr = rng.bernoulli(cfg.p_flip);
  geo.grid_n = cfg.nonrigid_grid;
  const auto n_ctrl = static_cast<size_t>(cfg.nonrigid_grid) * cfg.nonrigid_grid * cfg.nonrigid_grid;
  geo.control.resize(n_ctrl);
  for (auto& c : geo.control) {
    for (double& v : c) v = rng.symmetric(cfg.nonrigid_max_disp_vox);
  }
  if (cfg.nonrigid_max_disp_vox == 0.0) geo.control.clear();

  std::array<Support, 3> supports{};
  for (auto& s : supports) {
    for (double& v : s) v = rng.uniform();
    std::sort(s.begin(), s.end());
  }

  const auto degrade = draw_degrade(cfg, rng.engine()());

  if (use_geometric) plan.geometric = std::move(geo);
  if (use_intensity) plan.intensity = supports;
  if (use_degrade) plan.degrade = degrade;
  return plan;
}

kernels::SamplingGrid geometric_grid(const Shape3& s, const GeometricPlan& plan) {
  kernels::SamplingGrid grid(s);
  const std::array<double, 3> mid{0.5 * static_cast<double>(s.d - 1), 0.5 * static_cast<double>(s.h - 1),
                                  0.5 * static_cast<double>(s.w - 1)};
  const int n = plan.grid_n;
  const bool nonrigid = !plan.control.empty();
  if (nonrigid && static_cast<int64_t>(plan.control.size()) != int64_t{n} * n * n) {
    throw Error("augment: control grid size does not match grid_n^3");
  }
  const std::array<int64_t, 3> dims{s.d, s.h, s.w};

  // Position of voxel `p` on the control lattice spanning the volume.
  auto lattice = [&](int axis, int64_t p, int& i0, double& t) {
    const double u = dims[axis] > 1 ? static_cast<double>(p) * (n - 1) / static_cast<double>(dims[axis] - 1) : 0.0;
    i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
    t = u - i0;
  };
  auto ctrl = [&](int a, int b, int c) -> const std::array<double, 3>& {
    return plan.control[static_cast<size_t>((a * n + b) * n + c)];
  };

#pragma omp parallel for schedule(static)
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        std::array<double, 3> p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
        if (nonrigid) {
          int iz, iy, ix;
          double tz, ty, tx;
          lattice(0, z, iz, tz);
          lattice(1, y, iy, ty);
          lattice(2, x, ix, tx);
          for (int a = 0; a < 3; ++a) {
            double disp = 0.0;
            for (int corner = 0; corner < 8; ++corner) {
              const int cz = (corner >> 2) & 1, cy = (corner >> 1) & 1, cx = corner & 1;
              const double w = (cz ? tz : 1.0 - tz) * (cy ? ty : 1.0 - ty) * (cx ? tx : 1.0 - tx);
              disp += w * ctrl(iz + cz, iy + cy, ix + cx)[a];
            }
            p[a] += disp;
          }
        }
        if (plan.flip_lr) p[2] = static_cast<double>(s.w - 1) - p[2];
        const std::array<double, 3> q{p[0] - mid[0], p[1] - mid[1], p[2] - mid[2]};
        const auto& A = plan.affine;
        const int64_t i = s.index(z, y, x);
        grid.z[i] = A[0][0] * q[0] + A[0][1] * q[1] + A[0][2] * q[2] + A[0][3] + mid[0];
        grid.y[i] = A[1][0] * q[0] + A[1][1] * q[1] + A[1][2] * q[2] + A[1][3] + mid[1];
        grid.x[i] = A[2][0] * q[0] + A[2][1] * q[1] + A[2][2] * q[2] + A[2][3] + mid[2];
      }
    }
  }
  return grid;
}

Volume3D warp(const Volume3D& vol, const kernels::SamplingGrid& grid, bool nearest) {
  return nearest ? kernels::sample_nearest(vol, grid) : kernels::sample_trilinear(vol, grid);
}

PairedSample apply_geometric(const PairedSample& sample, const AugmentPlan& plan) {
  if (!plan.geometric) throw Error("apply_geometric: plan has no geometric component");
  const auto grid = geometric_grid(sample.shape(), *plan.geometric);
  PairedSample out;
  out.subject_id = sample.subject_id;
  for (int c = 0; c < 3; ++c) {
    out.lf[c] = warp(sample.lf[c], grid);
    out.hf[c] = warp(sample.hf[c], grid);
  }
  out.mask = warp(sample.mask, grid, true);
  return out;
}

double intensity_map(double v, const Support& support) {
  const std::array<double, 6> ys{0.0, support[0], support[1], support[2], support[3], 1.0};
  v = std::clamp(v, 0.0, 1.0);
  int k = 0;
  while (k < 4 && v >= kAnchorsX[k + 1]) ++k;
  const double slope = (ys[k + 1] - ys[k]) / (kAnchorsX[k + 1] - kAnchorsX[k]);
  return std::clamp(ys[k] + (v - kAnchorsX[k]) * slope, ys[k], ys[k + 1]);
}

Volume3D apply_intensity(const Volume3D& vol, const Support& support) {
  for (size_t i = 0; i < support.size(); ++i) {
    if (!(support[i] >= 0.0 && support[i] <= 1.0)) throw Error("apply_intensity: support outside [0,1]");
    if (i > 0 && support[i] < support[i - 1]) throw Error("apply_intensity: support is not sorted");
  }
  Volume3D out(vol.shape(), 0.0f, vol.spacing_mm());
  auto src = vol.data();
  auto dst = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < vol.size(); ++i) dst[i] = static_cast<float>(intensity_map(src[i], support));
  return out;
}

Volume3D apply_degrade(const Volume3D& vol, const DegradeParams& params, uint64_t noise_seed) {
  if (!(params.noise_sigma >= 0.0) || std::any_of(params.blur_sigmas.begin(), params.blur_sigmas.end(),
                                                  [](double s) { return !(s >= 0.0); })) {
    throw Error("apply_degrade: parameters must be non-negative");
  }
  Volume3D out = kernels::gaussian_blur(vol, params.blur_sigmas);
  if (params.noise_sigma > 0.0) {
    Rng rng(noise_seed);
    for (float& v : out.data()) v = static_cast<float>(v + rng.normal(0.0, params.noise_sigma));
  }
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

json to_json(const AugmentPlan& plan) {
  json j;
  j["seed"] = plan.seed;
  if (plan.geometric) {
    const auto& g = *plan.geometric;
    json jg;
    jg["affine"] = g.affine;
    jg["flip_lr"] = g.flip_lr;
    jg["grid_n"] = g.grid_n;
    jg["nonrigid"] = g.control;
    j["geometric"] = std::move(jg);
  } else {
    j["geometric"] = nullptr;
  }
  j["intensity"] = plan.intensity ? json(*plan.intensity) : json(nullptr);
  if (plan.degrade) {
    json jd = json::array();
    for (const auto& d : *plan.degrade) {
      jd.push_back(json{{"noise_sigma", d.noise_sigma}, {"blur_sigmas", d.blur_sigmas}});
    }
    j["degrade"] = std::move(jd);
  } else {
    j["degrade"] = nullptr;
  }
  return j;
}

json to_json(const AugmentConfig& c) {
  return json{{"p_intensity", c.p_intensity},
              {"p_degrade", c.p_degrade},
              {"p_geometric", c.p_geometric},
              {"p_flip", c.p_flip},
              {"rotation_max_deg", c.rotation_max_deg},
              {"shift_max_vox", c.shift_max_vox},
              {"shear_max", c.shear_max},
              {"nonrigid_max_disp_vox", c.nonrigid_max_disp_vox},
              {"nonrigid_grid", c.nonrigid_grid},
              {"noise_sigma_range", range_json(c.noise_sigma_range)},
              {"blur_sigma_range", range_json(c.blur_sigma_range)}};
}

AugmentConfig config_from_json(const json& j, AugmentConfig c) {
  for (const auto& item : j.items()) {
    if (!to_json(c).contains(item.key())) throw Error("unknown augment config field '" + item.key() + "'");
  }
  c.p_intensity = j.value("p_intensity", c.p_intensity);
  c.p_degrade = j.value("p_degrade", c.p_degrade);
  c.p_geometric = j.value("p_geometric", c.p_geometric);
  c.p_flip = j.value("p_flip", c.p_flip);
  c.rotation_max_deg = j.value("rotation_max_deg", c.rotation_max_deg);
  c.shift_max_vox = j.value("shift_max_vox", c.shift_max_vox);
  c.shear_max = j.value("shear_max", c.shear_max);
  c.nonrigid_max_disp_vox = j.value("nonrigid_max_disp_vox", c.nonrigid_max_disp_vox);
  c.nonrigid_grid = j.value("nonrigid_grid", c.nonrigid_grid);
  if (j.contains("noise_sigma_range")) c.noise_sigma_range = range_from_json(j["noise_sigma_range"]);
  if (j.contains("blur_sigma_range")) c.blur_sigma_range = range_from_json(j["blur_sigma_range"]);
  c.validate();
  return c;
}

}  // namespace ulfenc::augment
