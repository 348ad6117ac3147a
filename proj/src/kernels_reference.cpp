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

// Serial reference versions of the kernels in kernels_omp.cpp. Each one
// computes its result from the definition rather than the optimized path.

#include <algorithm>
#include <cmath>

#include "ulfenc/kernels.hpp"

namespace ulfenc::kernels::reference {

std::vector<double> box_mean_valid(std::span<const double> in, const Shape3& s,
                                   const Shape3& window) {
  const Shape3 o = valid_shape(s, window);
  std::vector<double> out(static_cast<size_t>(o.size()));
  for (int64_t z = 0; z < o.d; ++z) {
    for (int64_t y = 0; y < o.h; ++y) {
      for (int64_t x = 0; x < o.w; ++x) {
        double acc = 0.0;
        for (int64_t dz = 0; dz < window.d; ++dz) {
          for (int64_t dy = 0; dy < window.h; ++dy) {
            for (int64_t dx = 0; dx < window.w; ++dx) {
              acc += in[s.index(z + dz, y + dy, x + dx)];
            }
          }
        }
        out[o.index(z, y, x)] = acc / static_cast<double>(window.size());
      }
    }
  }
  return out;
}

// Direct 3D convolution with the outer-product kernel.
Volume3D gaussian_blur(const Volume3D& vol, const std::array<double, 3>& sigmas_dhw) {
  const Shape3& s = vol.shape();
  const auto kd = gaussian_kernel(sigmas_dhw[0]);
  const auto kh = gaussian_kernel(sigmas_dhw[1]);
  const auto kw = gaussian_kernel(sigmas_dhw[2]);
  const auto rd = static_cast<int64_t>(kd.size() / 2);
  const auto rh = static_cast<int64_t>(kh.size() / 2);
  const auto rw = static_cast<int64_t>(kw.size() / 2);

  Volume3D out(s, 0.0f, vol.spacing_mm());
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        double acc = 0.0;
        for (int64_t a = -rd; a <= rd; ++a) {
          const int64_t zz = std::clamp<int64_t>(z + a, 0, s.d - 1);
          for (int64_t b = -rh; b <= rh; ++b) {
            const int64_t yy = std::clamp<int64_t>(y + b, 0, s.h - 1);
            for (int64_t c = -rw; c <= rw; ++c) {
              const int64_t xx = std::clamp<int64_t>(x + c, 0, s.w - 1);
              acc += kd[a + rd] * kh[b + rh] * kw[c + rw] * vol.at(zz, yy, xx);
            }
          }
        }
        out.at(z, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

// Weighted sum over the 8 surrounding corners.
Volume3D sample_trilinear(const Volume3D& vol, const SamplingGrid& grid) {
  const Shape3& s = vol.shape();
  Volume3D out(grid.shape, 0.0f, vol.spacing_mm());
  for (int64_t i = 0; i < grid.shape.size(); ++i) {
    const std::array<double, 3> p{grid.z[i], grid.y[i], grid.x[i]};
    std::array<int64_t, 3> base{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
      base[a] = static_cast<int64_t>(std::floor(p[a]));
      frac[a] = p[a] - std::floor(p[a]);
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const int64_t z = base[0] + ((corner >> 2) & 1);
      const int64_t y = base[1] + ((corner >> 1) & 1);
      const int64_t x = base[2] + (corner & 1);
      if (z < 0 || y < 0 || x < 0 || z >= s.d || y >= s.h || x >= s.w) continue;
      const double wz = (corner >> 2) & 1 ? frac[0] : 1.0 - frac[0];
      const double wy = (corner >> 1) & 1 ? frac[1] : 1.0 - frac[1];
      const double wx = corner & 1 ? frac[2] : 1.0 - frac[2];
      acc += wz * wy * wx * vol.at(z, y, x);
    }
    out[i] = static_cast<float>(acc);
  }
  return out;
}

Volume3D sample_nearest(const Volume3D& vol, const SamplingGrid& grid) {
  const Shape3& s = vol.shape();
  Volume3D out(grid.shape, 0.0f, vol.spacing_mm());
  for (int64_t i = 0; i < grid.shape.size(); ++i) {
    const auto z = static_cast<int64_t>(std::round(grid.z[i]));
    const auto y = static_cast<int64_t>(std::round(grid.y[i]));
    const auto x = static_cast<int64_t>(std::round(grid.x[i]));
    if (z >= 0 && y >= 0 && x >= 0 && z < s.d && y < s.h && x < s.w) out[i] = vol.at(z, y, x);
  }
  return out;
}

}  // namespace ulfenc::kernels::reference
