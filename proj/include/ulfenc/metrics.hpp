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

#include <string>
#include <vector>

#include <json.hpp>

#include "ulfenc/volume.hpp"

namespace ulfenc::metrics {

struct SsimOptions {
  Shape3 window{11, 11, 11};
  double c1 = 1e-4;  // (0.01 * L)^2, L = 1
  double c2 = 9e-4;  // (0.03 * L)^2
};

/// Local SSIM over every fully-interior window, using uniform (box) local
/// statistics with population variances. Element (z,y,x) belongs to the
/// window whose lowest corner is (z,y,x).
std::vector<double> ssim_map(const Volume3D& x, const Volume3D& y, const SsimOptions& opt = {});

/// Mean of the local SSIM map. With a mask, only windows whose center voxel
/// lies inside the mask contribute.
double ssim3d(const Volume3D& x, const Volume3D& y, const Volume3D* mask = nullptr,
              const SsimOptions& opt = {});

double mse(const Volume3D& x, const Volume3D& y, const Volume3D* mask = nullptr);

/// 10 log10(range^2 / MSE); +infinity when MSE is zero.
double psnr(const Volume3D& x, const Volume3D& y, double data_range = 1.0,
            const Volume3D* mask = nullptr);

double mae(const Volume3D& x, const Volume3D& y, const Volume3D* mask = nullptr);

/// ||x - y||^2 / ||y||^2; throws if the reference has zero energy.
double nmse(const Volume3D& x, const Volume3D& y, const Volume3D* mask = nullptr);

inline constexpr double kScorePsnrCap = 32.0;

/// 0.7 SSIM + 0.1 PSNR/32 + 0.1 (1 - MAE) + 0.1 (1 - NMSE), with PSNR capped
/// at 32 dB. `psnr_clipped` reports whether the cap was applied.
double challenge_score(double ssim, double psnr, double mae, double nmse,
                       bool* psnr_clipped = nullptr);

struct MetricSet {
  double ssim = 0.0;
  double psnr = 0.0;
  double mae = 0.0;
  double nmse = 0.0;
};

struct MetricEntry {
  std::string subject_id;
  std::string contrast;
  MetricSet full;
  MetricSet masked;
  double score = 0.0;  // from the masked metrics
  bool psnr_clipped = false;
};

struct MetricReport {
  std::vector<MetricEntry> entries;
  MetricSet full;    // mean over entries
  MetricSet masked;  // mean over entries
  double score = 0.0;
  bool psnr_clipped = false;

  /// Recomputes the aggregate fields from `entries`.
  void aggregate();
};

MetricEntry evaluate_pair(const Volume3D& pred, const Volume3D& ref, const Volume3D& mask,
                          std::string subject_id, std::string contrast);

/// Short description of the metric conventions, written into report headers.
std::string conventions();

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

}  // namespace ulfenc::metrics
