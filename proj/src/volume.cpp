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

#include "ulfenc/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ulfenc {

std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.d) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

Volume3D::Volume3D(Shape3 shape, float fill, std::array<double, 3> spacing_mm)
    : shape_(shape), spacing_mm_(spacing_mm) {
  if (!shape.valid()) throw ShapeError("volume shape must be positive, got " + to_string(shape));
  voxels_.assign(static_cast<size_t>(shape.size()), fill);
}

Volume3D::Volume3D(Shape3 shape, std::vector<float> voxels, std::array<double, 3> spacing_mm)
    : shape_(shape), spacing_mm_(spacing_mm), voxels_(std::move(voxels)) {
  if (!shape.valid()) throw ShapeError("volume shape must be positive, got " + to_string(shape));
  if (static_cast<int64_t>(voxels_.size()) != shape.size()) {
    throw ShapeError("voxel count " + std::to_string(voxels_.size()) + " does not match shape " +
                     to_string(shape));
  }
}

bool Volume3D::all_finite() const {
  return std::all_of(voxels_.begin(), voxels_.end(), [](float v) { return std::isfinite(v); });
}

float Volume3D::min() const {
  return voxels_.empty() ? 0.0f : *std::min_element(voxels_.begin(), voxels_.end());
}

float Volume3D::max() const {
  return voxels_.empty() ? 0.0f : *std::max_element(voxels_.begin(), voxels_.end());
}

double Volume3D::sum() const {
  double s = 0.0;
  for (float v : voxels_) s += v;
  return s;
}

int64_t Volume3D::count_nonzero() const {
  return std::count_if(voxels_.begin(), voxels_.end(), [](float v) { return v != 0.0f; });
}

bool Volume3D::identical(const Volume3D& other) const {
  return shape_ == other.shape_ && voxels_.size() == other.voxels_.size() &&
         (voxels_.empty() ||
          std::memcmp(voxels_.data(), other.voxels_.data(), voxels_.size() * sizeof(float)) == 0);
}

std::string_view contrast_name(Contrast c) {
  switch (c) {
    case Contrast::T1w: return "T1w";
    case Contrast::T2w: return "T2w";
    case Contrast::FLAIR: return "FLAIR";
  }
  return "?";
}

Contrast parse_contrast(std::string_view name) {
  for (Contrast c : kContrasts) {
    if (contrast_name(c) == name) return c;
  }
  throw Error("unknown contrast '" + std::string(name) + "'");
}

void PairedSample::validate() const {
  const Shape3 s = mask.shape();
  if (!s.valid()) throw ShapeError("sample " + subject_id + ": empty mask");
  for (int c = 0; c < 3; ++c) {
    if (lf[c].shape() != s || hf[c].shape() != s) {
      throw ShapeError("sample " + subject_id + ": contrast volumes do not share the mask shape");
    }
  }
  int64_t nonzero = 0;
  for (float v : mask.data()) {
    if (v != 0.0f && v != 1.0f) throw Error("sample " + subject_id + ": mask is not binary");
    nonzero += v != 0.0f;
  }
  if (nonzero == 0) throw Error("sample " + subject_id + ": mask has no foreground voxels");
}

}  // namespace ulfenc
