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

#include "ulfenc/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ulfenc::report {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double number(const json& v) {
  if (v.is_string()) return v.get<std::string>() == "-inf" ? -INFINITY : INFINITY;
  return v.get<double>();
}

std::string ablation_table(const json& rows, std::string_view proposed) {
  std::ostringstream out;
  out << "| Config | Val SSIM |\n|---|---|\n";
  for (const auto& r : rows) {
    const std::string name = r.at("name").get<std::string>();
    const std::string value = fixed(r.at("ssim").get<double>(), 2);
    if (name == proposed) {
      out << "| **" << name << "** | **" << value << "** |\n";
    } else {
      out << "| " << name << " | " << value << " |\n";
    }
  }
  return out.str();
}

json ablation_rows(const std::vector<NamedReport>& reports) {
  json rows = json::array();
  for (const auto& [name, rep] : reports) rows.push_back({{"name", name}, {"ssim", rep.masked.ssim}});
  return rows;
}

std::string metrics_table(const json& full, const json& masked, const json& score) {
  std::ostringstream out;
  out << "| Metric | Full | Masked |\n|---|---|---|\n";
  const std::pair<const char*, int> rows[] = {{"ssim", 3}, {"psnr", 2}, {"mae", 3}, {"nmse", 3}};
  for (const auto& [key, digits] : rows) {
    out << "| " << key << " | " << fixed(number(full.at(key)), digits) << " | "
        << fixed(number(masked.at(key)), digits) << " |\n";
  }
  out << "| score | | " << fixed(number(score), 3) << " |\n";
  return out.str();
}

}  // namespace

std::string version_string() { return std::string(ULFENC_VERSION) + " (" + ULFENC_GIT_VERSION + ")"; }

std::string render_ablation(const std::vector<NamedReport>& reports, std::string_view proposed) {
  if (reports.size() < 2) throw Error("render_ablation needs at least two reports");
  return ablation_table(ablation_rows(reports), proposed);
}

std::string render_metrics(const metrics::MetricReport& report) {
  const json j = metrics::to_json(report);
  return metrics_table(j.at("aggregate").at("full"), j.at("aggregate").at("masked"), j.at("aggregate").at("score"));
}

json run_report(const json& config, const std::vector<NamedReport>& reports) {
  if (reports.empty()) throw Error("run_report needs at least one metric report");
  json run{{"version", {{"package", ULFENC_VERSION}, {"git", ULFENC_GIT_VERSION}}},
           {"config", config},
           {"conventions", metrics::conventions()},
           {"reports", json::array()}};
  for (const auto& [name, rep] : reports) run["reports"].push_back({{"name", name}, {"report", metrics::to_json(rep)}});
  if (reports.size() >= 2) run["ablation"] = ablation_rows(reports);
  return run;
}

std::string render_run_report(const json& run) {
  std::ostringstream out;
  out << "# Run report\n\nversion: " << run.at("version").at("package").get<std::string>() << " ("
      << run.at("version").at("git").get<std::string>() << ")\n\n"
      << run.at("conventions").get<std::string>() << "\n";
  for (const auto& r : run.at("reports")) {
    const auto& agg = r.at("report").at("aggregate");
    out << "\n## " << r.at("name").get<std::string>() << "\n\n"
        << metrics_table(agg.at("full"), agg.at("masked"), agg.at("score"));
  }
  if (run.contains("ablation")) out << "\n## Ablation\n\n" << ablation_table(run.at("ablation"), "proposed");
  return out.str();
}

}  // namespace ulfenc::report
