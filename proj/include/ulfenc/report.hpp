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
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ulfenc/metrics.hpp"

namespace ulfenc::report {

using NamedReport = std::pair<std::string, metrics::MetricReport>;

/// Markdown table with one row per report (in the given order) and its mean
/// masked validation SSIM to two decimals. The row named `proposed` is bold.
/// Needs at least two reports.
std::string render_ablation(const std::vector<NamedReport>& reports, std::string_view proposed = "proposed");

/// Aggregate metrics as a markdown table: rows SSIM/PSNR/MAE/NMSE/Score,
/// columns full and masked.
std::string render_metrics(const metrics::MetricReport& report);

/// Machine-readable run report. Tables are rendered from the numbers stored
/// here, so every rendered value has a source field.
nlohmann::json run_report(const nlohmann::json& config, const std::vector<NamedReport>& reports);

/// Markdown view of a run report.
std::string render_run_report(const nlohmann::json& run);

std::string version_string();

}  // namespace ulfenc::report
