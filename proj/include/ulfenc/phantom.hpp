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
#include <filesystem>
#include <vector>

#include "ulfenc/volio.hpp"
#include "ulfenc/volume.hpp"

namespace ulfenc::phantom {

/// Parameters of the synthetic paired low-field / high-field brain phantom.
struct PhantomConfig {
  Shape3 shape{32, 32, 32};
  int n_tissue_classes = 4;
  /// Per contrast (T1w, T2w, FLAIR): class -> high-field mean intensity.
  /// Class 0 is the background outside the head. Empty tables are filled
  /// with built-in defaults by `resolved()`.
  std::array<std::vector<double>, 3> contrast_tables;
  /// Half-width of the uniform per-subject perturbation applied to every
  /// non-background table entry when rendering the low-field contrasts.
  double table_perturbation = 0.12;
  double lf_noise_sigma = 0.03;
  std::array<double, 3> lf_blur_sigma{1.2, 0.6, 0.6};  // (d, h, w) in voxels
  double misreg_max_mm = 1.5;
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};  // [x, y, z]
  uint64_t seed = 0;

  /// Throws on invalid values.
  void validate() const;
  /// Copy with default contrast tables filled in.
  [[nodiscard]] PhantomConfig resolved() const;
};

/// Random quantities drawn while generating one subject, for inspection.
struct PhantomTrace {
  std::array<double, 3> head_center{};  // voxel coordinates (d, h, w)
  std::array<double, 3> head_semi{};    // semi-axes in voxels
  std::array<double, 3> shift_mm{};      // (d, h, w)
  std::array<double, 3> rotation_rad{};  // about the d, h, w axes
  std::array<std::vector<double>, 3> lf_tables;
};

/// Default high-field tables for `n_classes` tissue classes.
std::array<std::vector<double>, 3> default_tables(int n_classes);

/// Deterministic in (cfg, subject_seed).
PairedSample generate_sample(const PhantomConfig& cfg, uint64_t subject_seed,
                             PhantomTrace* trace = nullptr);

std::string subject_name(int64_t index);

/// Writes `n_subjects` samples plus `manifest.json` into `out_dir`. The last
/// two subjects form the validation split.
volio::DatasetManifest generate_dataset(const PhantomConfig& cfg, int64_t n_subjects,
                                        const std::filesystem::path& out_dir);

}  // namespace ulfenc::phantom
