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

#include <algorithm>
#include <cmath>

#include "ulfenc/kernels.hpp"

namespace ulfenc::kernels {

namespace {

inline int64_t clamp_index(int64_t i, int64_t n) { return std::clamp<int64_t>(i, 0, n - 1); }

// Convolves along one axis of a (d,h,w) double buffer with replicate boundary.
// `axis` 0 = d, 1 = h, 2 = w.
void convolve_axis(const std::vector<double>& in, std::vector<double>& out, const Shape3& s,
                   int axis, const std::vector<double>& kernel) {
  const auto radius = static_cast<int64_t>(kernel.size() / 2);
  const int64_t n = axis == 0 ? s.d : axis == 1 ? s.h : s.w;
  const int64_t stride = axis == 0 ? s.h * s.w : axis == 1 ? s.w : 1;

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        const int64_t pos = axis == 0 ? z : axis == 1 ? y : x;
        const int64_t base = s.index(z, y, x) - pos * stride;
        double acc = 0.0;
        for (int64_t k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<size_t>(k + radius)] * in[base + clamp_index(pos + k, n) * stride];
        }
        out[s.index(z, y, x)] = acc;
      }
    }
  }
}

}  // namespace

Shape3 valid_shape(const Shape3& s, const Shape3& window) {
  if (window.d < 1 || window.h < 1 || window.w < 1 || s.d < window.d || s.h < window.h ||
      s.w < window.w) {
    throw ShapeError("volume " + to_string(s) + " is smaller than window " + to_string(window));
  }
  return {s.d - window.d + 1, s.h - window.h + 1, s.w - window.w + 1};
}

std::vector<double> box_mean_valid(std::span<const double> in, const Shape3& s,
                                   const Shape3& window) {
  const Shape3 o = valid_shape(s, window);
  if (static_cast<int64_t>(in.size()) != s.size()) throw ShapeError("box_mean_valid: size mismatch");

  // Separable sums: w, then h, then d; each output is an explicit sum over the
  // window extent (no running sums) so accumulation order is fixed.
  const Shape3 s1{s.d, s.h, o.w};
  std::vector<double> t1(static_cast<size_t>(s1.size()));
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      const double* row = in.data() + s.index(z, y, 0);
      for (int64_t x = 0; x < o.w; ++x) {
        double acc = 0.0;
        for (int64_t k = 0; k < window.w; ++k) acc += row[x + k];
        t1[s1.index(z, y, x)] = acc;
      }
    }
  }

  const Shape3 s2{s.d, o.h, o.w};
  std::vector<double> t2(static_cast<size_t>(s2.size()));
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < o.h; ++y) {
      for (int64_t x = 0; x < o.w; ++x) {
        double acc = 0.0;
        for (int64_t k = 0; k < window.h; ++k) acc += t1[s1.index(z, y + k, x)];
        t2[s2.index(z, y, x)] = acc;
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(window.size());
  std::vector<double> out(static_cast<size_t>(o.size()));
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t z = 0; z < o.d; ++z) {
    for (int64_t y = 0; y < o.h; ++y) {
      for (int64_t x = 0; x < o.w; ++x) {
        double acc = 0.0;
        for (int64_t k = 0; k < window.d; ++k) acc += t2[s2.index(z + k, y, x)];
        out[o.index(z, y, x)] = acc * inv;
      }
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

Volume3D gaussian_blur(const Volume3D& vol, const std::array<double, 3>& sigmas_dhw) {
  const Shape3& s = vol.shape();
  std::vector<double> a(vol.data().begin(), vol.data().end());
  std::vector<double> b(a.size());
  for (int axis = 0; axis < 3; ++axis) {
    if (!(sigmas_dhw[axis] > 0.0)) continue;
    convolve_axis(a, b, s, axis, gaussian_kernel(sigmas_dhw[axis]));
    a.swap(b);
  }
  std::vector<float> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(a[i]);
  return Volume3D(s, std::move(out), vol.spacing_mm());
}

SamplingGrid identity_grid(const Shape3& s) {
  SamplingGrid g(s);
  for (int64_t z = 0; z < s.d; ++z) {
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        const int64_t i = s.index(z, y, x);
        g.z[i] = static_cast<double>(z);
        g.y[i] = static_cast<double>(y);
        g.x[i] = static_cast<double>(x);
      }
    }
  }
  return g;
}

Volume3D sample_trilinear(const Volume3D& vol, const SamplingGrid& grid) {
  const Shape3& s = vol.shape();
  const Shape3& o = grid.shape;
  Volume3D out(o, 0.0f, vol.spacing_mm());
  auto src = vol.data();
  auto dst = out.data();

  auto fetch = [&](int64_t z, int64_t y, int64_t x) -> double {
    if (z < 0 || y < 0 || x < 0 || z >= s.d || y >= s.h || x >= s.w) return 0.0;
    return src[s.index(z, y, x)];
  };

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < o.size(); ++i) {
    const double fz = std::floor(grid.z[i]);
    const double fy = std::floor(grid.y[i]);
    const double fx = std::floor(grid.x[i]);
    const double tz = grid.z[i] - fz;
    const double ty = grid.y[i] - fy;
    const double tx = grid.x[i] - fx;
    const auto z0 = static_cast<int64_t>(fz);
    const auto y0 = static_cast<int64_t>(fy);
    const auto x0 = static_cast<int64_t>(fx);
    if (z0 < -1 || y0 < -1 || x0 < -1 || z0 >= s.d || y0 >= s.h || x0 >= s.w) continue;

    const double c00 = fetch(z0, y0, x0) * (1.0 - tx) + fetch(z0, y0, x0 + 1) * tx;
    const double c01 = fetch(z0, y0 + 1, x0) * (1.0 - tx) + fetch(z0, y0 + 1, x0 + 1) * tx;
    const double c10 = fetch(z0 + 1, y0, x0) * (1.0 - tx) + fetch(z0 + 1, y0, x0 + 1) * tx;
    const double c11 = fetch(z0 + 1, y0 + 1, x0) * (1.0 - tx) + fetch(z0 + 1, y0 + 1, x0 + 1) * tx;
    const double c0 = c00 * (1.0 - ty) + c01 * ty;
    const double c1 = c10 * (1.0 - ty) + c11 * ty;
    dst[i] = static_cast<float>(c0 * (1.0 - tz) + c1 * tz);
  }
  return out;
}

Volume3D sample_nearest(const Volume3D& vol, const SamplingGrid& grid) {
  const Shape3& s = vol.shape();
  const Shape3& o = grid.shape;
  Volume3D out(o, 0.0f, vol.spacing_mm());
  auto src = vol.data();
  auto dst = out.data();

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < o.size(); ++i) {
    const int64_t z = std::lround(grid.z[i]);
    const int64_t y = std::lround(grid.y[i]);
    const int64_t x = std::lround(grid.x[i]);
    if (z < 0 || y < 0 || x < 0 || z >= s.d || y >= s.h || x >= s.w) continue;
    dst[i] = src[s.index(z, y, x)];
  }
  return out;
}

double ordered_sum(std::span<const double> values, int64_t chunk) {
  if (values.empty()) return 0.0;
  chunk = std::max<int64_t>(chunk, 1);
  const auto n = static_cast<int64_t>(values.size());
  const int64_t parts = (n + chunk - 1) / chunk;
  std::vector<double> partial(static_cast<size_t>(parts), 0.0);
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < parts; ++p) {
    double acc = 0.0;
    const int64_t end = std::min(n, (p + 1) * chunk);
    for (int64_t i = p * chunk; i < end; ++i) acc += values[i];
    partial[p] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace ulfenc::kernels
