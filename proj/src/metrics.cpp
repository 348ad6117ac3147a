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

#include "ulfenc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ulfenc/kernels.hpp"

namespace ulfenc::metrics {

using nlohmann::json;

namespace {

void require_same_shape(const Volume3D& a, const Volume3D& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Sum of f(i) over voxels (inside the mask, if any) and the voxel count.
// Partial sums run per depth slice so the total is thread-count independent.
template <typename F>
std::pair<double, int64_t> masked_sum(const Shape3& s, const Volume3D* mask, F&& f) {
  std::vector<double> partial(static_cast<size_t>(s.d), 0.0);
  std::vector<int64_t> counts(static_cast<size_t>(s.d), 0);
  const int64_t plane = s.h * s.w;
#pragma omp parallel for schedule(static)
  for (int64_t z = 0; z < s.d; ++z) {
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = z * plane; i < (z + 1) * plane; ++i) {
      if (mask != nullptr && (*mask)[i] == 0.0f) continue;
      acc += f(i);
      ++n;
    }
    partial[z] = acc;
    counts[z] = n;
  }
  double total = 0.0;
  int64_t count = 0;
  for (int64_t z = 0; z < s.d; ++z) {
    total += partial[z];
    count += counts[z];
  }
  return {total, count};
}

double json_number(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error("unexpected metric value '" + s + "'");
  }
  return v.get<double>();
}

json number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

json set_json(const MetricSet& m) {
  return json{{"ssim", number_json(m.ssim)},
              {"psnr", number_json(m.psnr)},
              {"mae", number_json(m.mae)},
              {"nmse", number_json(m.nmse)}};
}

MetricSet set_from_json(const json& j) {
  return {json_number(j.at("ssim")), json_number(j.at("psnr")), json_number(j.at("mae")),
          json_number(j.at("nmse"))};
}

}  // namespace

std::vector<double> ssim_map(const Volume3D& x, const Volume3D& y, const SsimOptions& opt) {
  require_same_shape(x, y, "ssim");
  const Shape3& s = x.shape();
  kernels::valid_shape(s, opt.window);  // throws for too-small volumes

  const auto n = static_cast<size_t>(s.size());
  std::vector<double> vx(n), vy(n), vxx(n), vyy(n), vxy(n);
  auto px = x.data();
  auto py = y.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < s.size(); ++i) {
    const double a = px[i];
    const double b = py[i];
    vx[i] = a;
    vy[i] = b;
    vxx[i] = a * a;
    vyy[i] = b * b;
    vxy[i] = a * b;
  }
  const auto mx = kernels::box_mean_valid(vx, s, opt.window);
  const auto my = kernels::box_mean_valid(vy, s, opt.window);
  const auto mxx = kernels::box_mean_valid(vxx, s, opt.window);
  const auto myy = kernels::box_mean_valid(vyy, s, opt.window);
  const auto mxy = kernels::box_mean_valid(vxy, s, opt.window);

  std::vector<double> out(mx.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(out.size()); ++i) {
    const double var_x = mxx[i] - mx[i] * mx[i];
    const double var_y = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    out[i] = ((2.0 * mx[i] * my[i] + opt.c1) * (2.0 * cov + opt.c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + opt.c1) * (var_x + var_y + opt.c2));
  }
  return out;
}

double ssim3d(const Volume3D& x, const Volume3D& y, const Volume3D* mask, const SsimOptions& opt) {
  if (mask != nullptr) require_same_shape(x, *mask, "ssim mask");
  const auto map = ssim_map(x, y, opt);
  const Shape3 o = kernels::valid_shape(x.shape(), opt.window);
  const int64_t cz = opt.window.d / 2, cy = opt.window.h / 2, cx = opt.window.w / 2;

  std::vector<double> partial(static_cast<size_t>(o.d), 0.0);
  std::vector<int64_t> counts(static_cast<size_t>(o.d), 0);
#pragma omp parallel for schedule(static)
  for (int64_t z = 0; z < o.d; ++z) {
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t y0 = 0; y0 < o.h; ++y0) {
      for (int64_t x0 = 0; x0 < o.w; ++x0) {
        if (mask != nullptr && mask->at(z + cz, y0 + cy, x0 + cx) == 0.0f) continue;
        acc += map[o.index(z, y0, x0)];
        ++n;
      }
    }
    partial[z] = acc;
    counts[z] = n;
  }
  double total = 0.0;
  int64_t count = 0;
  for (int64_t z = 0; z < o.d; ++z) {
    total += partial[z];
    count += counts[z];
  }
  if (count == 0) throw Error("ssim3d: no valid window centers inside the mask");
  return total / static_cast<double>(count);
}

double mse(const Volume3D& x, const Volume3D& y, const Volume3D* mask) {
  require_same_shape(x, y, "mse");
  if (mask != nullptr) require_same_shape(x, *mask, "mse mask");
  auto px = x.data();
  auto py = y.data();
  const auto [sum, n] = masked_sum(x.shape(), mask, [&](int64_t i) {
    const double d = static_cast<double>(px[i]) - py[i];
    return d * d;
  });
  if (n == 0) throw Error("mse: empty mask");
  return sum / static_cast<double>(n);
}

double psnr(const Volume3D& x, const Volume3D& y, double data_range, const Volume3D* mask) {
  const double m = mse(x, y, mask);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / m);
}

double mae(const Volume3D& x, const Volume3D& y, const Volume3D* mask) {
  require_same_shape(x, y, "mae");
  if (mask != nullptr) require_same_shape(x, *mask, "mae mask");
  auto px = x.data();
  auto py = y.data();
  const auto [sum, n] = masked_sum(x.shape(), mask, [&](int64_t i) {
    return std::abs(static_cast<double>(px[i]) - py[i]);
  });
  if (n == 0) throw Error("mae: empty mask");
  return sum / static_cast<double>(n);
}

double nmse(const Volume3D& x, const Volume3D& y, const Volume3D* mask) {
  require_same_shape(x, y, "nmse");
  if (mask != nullptr) require_same_shape(x, *mask, "nmse mask");
  auto px = x.data();
  auto py = y.data();
  const auto [err, n] = masked_sum(x.shape(), mask, [&](int64_t i) {
    const double d = static_cast<double>(px[i]) - py[i];
    return d * d;
  });
  const auto [energy, n2] = masked_sum(x.shape(), mask, [&](int64_t i) {
    return static_cast<double>(py[i]) * py[i];
  });
  if (!(energy > 0.0)) throw Error("nmse: reference has zero energy inside the mask");
  return err / energy;
}

double challenge_score(double ssim, double psnr, double mae, double nmse, bool* psnr_clipped) {
  const bool clip = !(psnr <= kScorePsnrCap);
  if (psnr_clipped != nullptr) *psnr_clipped = clip;
  const double p = clip ? kScorePsnrCap : psnr;
  return 0.7 * ssim + 0.1 * (p / 32.0) + 0.1 * (1.0 - mae) + 0.1 * (1.0 - nmse);
}

MetricEntry evaluate_pair(const Volume3D& pred, const Volume3D& ref, const Volume3D& mask,
                          std::string subject_id, std::string contrast) {
  MetricEntry e;
  e.subject_id = std::move(subject_id);
  e.contrast = std::move(contrast);
  e.full = {ssim3d(pred, ref), psnr(pred, ref), mae(pred, ref), nmse(pred, ref)};
  e.masked = {ssim3d(pred, ref, &mask), psnr(pred, ref, 1.0, &mask), mae(pred, ref, &mask),
              nmse(pred, ref, &mask)};
  e.score = challenge_score(e.masked.ssim, e.masked.psnr, e.masked.mae, e.masked.nmse,
                            &e.psnr_clipped);
  return e;
}

void MetricReport::aggregate() {
  full = {};
  masked = {};
  score = 0.0;
  psnr_clipped = false;
  if (entries.empty()) return;
  const auto n = static_cast<double>(entries.size());
  for (const auto& e : entries) {
    full.ssim += e.full.ssim / n;
    full.psnr += e.full.psnr / n;
    full.mae += e.full.mae / n;
    full.nmse += e.full.nmse / n;
    masked.ssim += e.masked.ssim / n;
    masked.psnr += e.masked.psnr / n;
    masked.mae += e.masked.mae / n;
    masked.nmse += e.masked.nmse / n;
    score += e.score / n;
    psnr_clipped = psnr_clipped || e.psnr_clipped;
  }
}

std::string conventions() {
  return "SSIM: uniform 11x11x11 window, population local statistics, C1=1e-4, C2=9e-4, "
         "mean over fully-interior windows (masked: window centers inside the mask). "
         "PSNR/MAE/NMSE: data range 1, sums restricted to mask voxels when masked. "
         "Score: 0.7*SSIM + 0.1*PSNR/32 + 0.1*(1-MAE) + 0.1*(1-NMSE) on masked metrics, "
         "PSNR capped at 32 dB; aggregates are means over subjects and contrasts.";
}

json to_json(const MetricReport& report) {
  json j;
  j["conventions"] = conventions();
  j["entries"] = json::array();
  for (const auto& e : report.entries) {
    j["entries"].push_back(json{{"subject_id", e.subject_id},
                                {"contrast", e.contrast},
                                {"full", set_json(e.full)},
                                {"masked", set_json(e.masked)},
                                {"score", e.score},
                                {"psnr_clipped", e.psnr_clipped}});
  }
  j["aggregate"] = json{{"full", set_json(report.full)},
                        {"masked", set_json(report.masked)},
                        {"score", report.score},
                        {"psnr_clipped", report.psnr_clipped}};
  return j;
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  for (const json& je : j.at("entries")) {
    MetricEntry e;
    e.subject_id = je.at("subject_id").get<std::string>();
    e.contrast = je.at("contrast").get<std::string>();
    e.full = set_from_json(je.at("full"));
    e.masked = set_from_json(je.at("masked"));
    e.score = je.at("score").get<double>();
    e.psnr_clipped = je.value("psnr_clipped", false);
    r.entries.push_back(std::move(e));
  }
  const json& agg = j.at("aggregate");
  r.full = set_from_json(agg.at("full"));
  r.masked = set_from_json(agg.at("masked"));
  r.score = agg.at("score").get<double>();
  r.psnr_clipped = agg.value("psnr_clipped", false);
  return r;
}

}  // namespace ulfenc::metrics
