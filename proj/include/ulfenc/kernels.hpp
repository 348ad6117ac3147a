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

// Data-parallel volume kernels.
//
// Every kernel in `ulfenc::kernels` is OpenMP-parallel over independent
// output elements, so results do not depend on the thread count. The
// `ulfenc::kernels::reference` namespace holds straightforward serial
// implementations of the same contracts; they are kept for tests and for the
// benchmark target.

#include <array>
#include <span>
#include <vector>

#include "ulfenc/volume.hpp"

namespace ulfenc::kernels {

/// Output extent of a "valid" (no padding) window sweep.
Shape3 valid_shape(const Shape3& s, const Shape3& window);

/// Mean over every fully-interior window of extent `window`. Output has
/// `valid_shape(s, window)` elements; element (z,y,x) is the mean of the
/// window whose lowest corner is (z,y,x).
std::vector<double> box_mean_valid(std::span<const double> in, const Shape3& s,
                                   const Shape3& window);

/// Normalized, sampled Gaussian with radius ceil(3 sigma). sigma <= 0 yields {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with per-axis widths (d, h, w) in voxels and
/// replicate boundary handling, so constant volumes are preserved.
Volume3D gaussian_blur(const Volume3D& vol, const std::array<double, 3>& sigmas_dhw);

/// Source coordinate (in voxel units of the input) for each output voxel.
struct SamplingGrid {
  Shape3 shape;
  std::vector<double> z, y, x;

  explicit SamplingGrid(Shape3 s)
      : shape(s),
        z(static_cast<size_t>(s.size())),
        y(static_cast<size_t>(s.size())),
        x(static_cast<size_t>(s.size())) {}
};

/// Identity grid: output voxel (z,y,x) samples input voxel (z,y,x).
SamplingGrid identity_grid(const Shape3& s);

/// Trilinear interpolation; samples outside the input contribute zero.
Volume3D sample_trilinear(const Volume3D& vol, const SamplingGrid& grid);

/// Nearest-neighbour lookup (round half away from zero); outside is zero.
Volume3D sample_nearest(const Volume3D& vol, const SamplingGrid& grid);

/// Sum of `values` (optionally weighted) reduced slice-by-slice in a fixed
/// order, so the result is identical for any thread count.
double ordered_sum(std::span<const double> values, int64_t chunk);

namespace reference {

std::vector<double> box_mean_valid(std::span<const double> in, const Shape3& s,
                                   const Shape3& window);
Volume3D gaussian_blur(const Volume3D& vol, const std::array<double, 3>& sigmas_dhw);
Volume3D sample_trilinear(const Volume3D& vol, const SamplingGrid& grid);
Volume3D sample_nearest(const Volume3D& vol, const SamplingGrid& grid);

}  // namespace reference

}  // namespace ulfenc::kernels
