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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ulfenc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when tensor or volume shapes violate an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Spatial extent in (depth, height, width) order. Voxels are stored
/// depth-major, i.e. index = (z * h + y) * w + x.
struct Shape3 {
  int64_t d = 0;
  int64_t h = 0;
  int64_t w = 0;

  [[nodiscard]] constexpr int64_t size() const { return d * h * w; }
  [[nodiscard]] constexpr int64_t index(int64_t z, int64_t y, int64_t x) const {
    return (z * h + y) * w + x;
  }
  [[nodiscard]] constexpr bool valid() const { return d > 0 && h > 0 && w > 0; }
  constexpr bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

/// One scalar 3D intensity field.
///
/// `spacing_mm` follows the container convention [x, y, z], i.e. it is the
/// voxel size along (w, h, d) respectively. It is carried along but never
/// used for image math.
class Volume3D {
 public:
  Volume3D() = default;
  explicit Volume3D(Shape3 shape, float fill = 0.0f,
                    std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0});
  Volume3D(Shape3 shape, std::vector<float> voxels,
           std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0});

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] const std::array<double, 3>& spacing_mm() const { return spacing_mm_; }
  void set_spacing_mm(const std::array<double, 3>& s) { spacing_mm_ = s; }

  [[nodiscard]] int64_t size() const { return shape_.size(); }
  [[nodiscard]] bool empty() const { return voxels_.empty(); }

  [[nodiscard]] std::span<const float> data() const { return voxels_; }
  [[nodiscard]] std::span<float> data() { return voxels_; }
  [[nodiscard]] const std::vector<float>& voxels() const { return voxels_; }

  float& at(int64_t z, int64_t y, int64_t x) { return voxels_[shape_.index(z, y, x)]; }
  [[nodiscard]] float at(int64_t z, int64_t y, int64_t x) const {
    return voxels_[shape_.index(z, y, x)];
  }
  float& operator[](int64_t i) { return voxels_[i]; }
  float operator[](int64_t i) const { return voxels_[i]; }

  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] float min() const;
  [[nodiscard]] float max() const;
  [[nodiscard]] double sum() const;
  [[nodiscard]] int64_t count_nonzero() const;

  /// Bitwise equality of shape and voxels (spacing ignored).
  [[nodiscard]] bool identical(const Volume3D& other) const;

 private:
  Shape3 shape_{};
  std::array<double, 3> spacing_mm_{1.0, 1.0, 1.0};
  std::vector<float> voxels_;
};

enum class Contrast : int { T1w = 0, T2w = 1, FLAIR = 2 };

inline constexpr std::array<Contrast, 3> kContrasts = {Contrast::T1w, Contrast::T2w,
                                                       Contrast::FLAIR};

std::string_view contrast_name(Contrast c);
Contrast parse_contrast(std::string_view name);
constexpr int contrast_index(Contrast c) { return static_cast<int>(c); }

/// Three low-field and three high-field contrasts of one subject plus its
/// brain mask, all on the same grid.
struct PairedSample {
  std::array<Volume3D, 3> lf;
  std::array<Volume3D, 3> hf;
  Volume3D mask;
  std::string subject_id;

  [[nodiscard]] const Volume3D& low(Contrast c) const { return lf[contrast_index(c)]; }
  [[nodiscard]] const Volume3D& high(Contrast c) const { return hf[contrast_index(c)]; }
  [[nodiscard]] const Shape3& shape() const { return mask.shape(); }

  /// Throws `Error` if shapes disagree, the mask is not binary or is empty.
  void validate() const;
};

}  // namespace ulfenc
