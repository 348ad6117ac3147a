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

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ulfenc/kernels.hpp"
#include "ulfenc/volume.hpp"

namespace ulfenc::augment {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  double p_intensity = 0.2;
  double p_degrade = 0.2;
  double p_geometric = 1.0;
  double p_flip = 0.5;  // left-right flip probability within a geometric plan
  double rotation_max_deg = 10.0;
  double shift_max_vox = 5.0;
  double shear_max = 0.1;
  double nonrigid_max_disp_vox = 3.0;
  int nonrigid_grid = 5;  // control points per axis
  Range noise_sigma_range{0.0, 0.08};
  Range blur_sigma_range{0.0, 1.5};

  void validate() const;
  /// All families disabled.
  static AugmentConfig none();
};

using Affine = std::array<std::array<double, 4>, 3>;

Affine identity_affine();

struct GeometricPlan {
  /// Maps centered output coordinates (d, h, w) to centered source coordinates;
  /// column 3 is the translation in voxels.
  Affine affine = identity_affine();
  bool flip_lr = false;
  int grid_n = 0;
  /// grid_n^3 control displacements (d, h, w) in voxels, depth-major; empty
  /// means no non-rigid component.
  std::vector<std::array<double, 3>> control;
};

/// Output intensities at the fixed inputs 0.2, 0.4, 0.6 and 0.8.
using Support = std::array<double, 4>;

struct DegradeParams {
  double noise_sigma = 0.0;
  std::array<double, 3> blur_sigmas{0.0, 0.0, 0.0};  // (d, h, w)
};

struct AugmentPlan {
  std::optional<GeometricPlan> geometric;
  std::optional<std::array<Support, 3>> intensity;  // per contrast
  std::optional<std::array<DegradeParams, 3>> degrade;
  uint64_t seed = 0;
};

/// Draws every family's parameters in a fixed order, then keeps each family
/// with its configured probability. Deterministic given the seed.
AugmentPlan sample_plan(const AugmentConfig& cfg, uint64_t rng_seed);

/// Per-contrast degradation parameters drawn from the configured ranges.
std::array<DegradeParams, 3> draw_degrade(const AugmentConfig& cfg, uint64_t rng_seed);

/// Source coordinates for affine ∘ flip ∘ non-rigid on a grid of shape `s`.
kernels::SamplingGrid geometric_grid(const Shape3& s, const GeometricPlan& plan);

/// Trilinear warp for intensities (zero fill), nearest for masks.
Volume3D warp(const Volume3D& vol, const kernels::SamplingGrid& grid, bool nearest = false);

/// Applies the same transform to all six contrasts and the mask.
PairedSample apply_geometric(const PairedSample& sample, const AugmentPlan& plan);

/// Piecewise-linear monotone map through (0,0), (0.2,s1), ..., (0.8,s4), (1,1).
double intensity_map(double v, const Support& support);
Volume3D apply_intensity(const Volume3D& vol, const Support& support);

/// Separable Gaussian blur, then additive Gaussian noise, then clip to [0,1].
Volume3D apply_degrade(const Volume3D& vol, const DegradeParams& params, uint64_t noise_seed);

nlohmann::json to_json(const AugmentPlan& plan);
nlohmann::json to_json(const AugmentConfig& cfg);
AugmentConfig config_from_json(const nlohmann::json& j, AugmentConfig base = {});

}  // namespace ulfenc::augment
