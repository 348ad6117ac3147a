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

#include <regex>

#include <gtest/gtest.h>

#include "ulfenc/report.hpp"

namespace ulfenc {
namespace {

metrics::MetricReport with_ssim(double ssim) {
  metrics::MetricReport r;
  metrics::MetricEntry e;
  e.subject_id = "sub-000";
  e.contrast = "T1w";
  e.masked = {ssim, 25.0, 0.05, 0.04};
  e.full = {ssim + 0.05, 27.5, 0.02, 0.03};
  e.score = metrics::challenge_score(ssim, 25.0, 0.05, 0.04);
  r.entries.push_back(e);
  r.aggregate();
  return r;
}

TEST(Ablation, FixtureTable) {
  const std::string table = report::render_ablation({{"a", with_ssim(0.68)}, {"proposed", with_ssim(0.82)}});
  EXPECT_EQ(table,
            "| Config | Val SSIM |\n"
            "|---|---|\n"
            "| a | 0.68 |\n"
            "| **proposed** | **0.82** |\n");
}

TEST(Ablation, NeedsTwoReports) {
  EXPECT_THROW(report::render_ablation({{"proposed", with_ssim(0.8)}}), Error);
  EXPECT_THROW(report::render_ablation({}), Error);
}

TEST(Ablation, TwoDecimalsAndOrderKept) {
  const std::string table = report::render_ablation(
      {{"c", with_ssim(0.7749)}, {"b", with_ssim(0.7751)}, {"proposed", with_ssim(0.1)}});
  EXPECT_NE(table.find("| c | 0.77 |\n| b | 0.78 |\n| **proposed** | **0.10** |"), std::string::npos);
}

TEST(MetricsTable, Rows) {
  const std::string t = report::render_metrics(with_ssim(0.75));
  EXPECT_NE(t.find("| ssim | 0.800 | 0.750 |"), std::string::npos);
  EXPECT_NE(t.find("| psnr | 27.50 | 25.00 |"), std::string::npos);
  EXPECT_NE(t.find("| mae | 0.020 | 0.050 |"), std::string::npos);
  EXPECT_NE(t.find("| score |"), std::string::npos);
}

// Every number printed in the rendered run report must come from a field
// stored in the JSON (rounded to the printed precision).
TEST(RunReport, RenderedNumbersHaveJsonSources) {
  const auto run = report::run_report({{"epochs", 30}},
                                      {{"a", with_ssim(0.6812)}, {"proposed", with_ssim(0.8234)}});
  ASSERT_TRUE(run.contains("ablation"));
  EXPECT_EQ(run.at("reports").size(), 2u);
  EXPECT_TRUE(run.at("version").contains("git"));

  std::vector<double> sources;
  std::function<void(const nlohmann::json&)> collect = [&](const nlohmann::json& j) {
    if (j.is_number()) sources.push_back(j.get<double>());
    if (j.is_structured())
      for (const auto& v : j) collect(v);
  };
  collect(run.at("reports"));
  collect(run.at("ablation"));

  const std::string text = report::render_run_report(run);
  const std::regex number(R"(\|\s*\**(-?[0-9]+\.([0-9]+))\**\s*(?=\|))");
  int found = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
    const double shown = std::stod((*it)[1]);
    const double half_ulp = 0.5 * std::pow(10.0, -static_cast<int>((*it)[2].length()));
    bool sourced = false;
    for (double s : sources) sourced = sourced || std::abs(s - shown) <= half_ulp + 1e-12;
    EXPECT_TRUE(sourced) << "unsourced value " << (*it)[1];
    ++found;
  }
  EXPECT_GT(found, 10);
}

TEST(RunReport, SingleReportHasNoAblation) {
  const auto run = report::run_report(nlohmann::json::object(), {{"proposed", with_ssim(0.5)}});
  EXPECT_FALSE(run.contains("ablation"));
  EXPECT_EQ(report::render_run_report(run).find("Ablation"), std::string::npos);
  EXPECT_THROW(report::run_report(nlohmann::json::object(), {}), Error);
}

}  // namespace
}  // namespace ulfenc
