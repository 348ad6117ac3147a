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

// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance                      all criteria
//   acceptance --only 7 --work-dir d
//   acceptance --skip 7 --expect-fail 8
//
// A criterion named with --expect-fail still prints FAIL when it fails, but
// does not turn the exit status red; it prints PASS and fails the run if it
// unexpectedly passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <torch/torch.h>

#include "ulfenc/augment.hpp"
#include "ulfenc/log.hpp"
#include "ulfenc/metrics.hpp"
#include "ulfenc/model.hpp"
#include "ulfenc/objective.hpp"
#include "ulfenc/phantom.hpp"
#include "ulfenc/report.hpp"
#include "ulfenc/rng.hpp"
#include "ulfenc/tasking.hpp"
#include "ulfenc/trainer.hpp"
#include "ulfenc/volio.hpp"

namespace {

using namespace ulfenc;
namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Volume3D random_volume(const Shape3& s, Rng& rng) {
  Volume3D v(s);
  for (auto& x : v.data()) x = static_cast<float>(rng.uniform());
  return v;
}

trainer::TrainConfig tiny_config() {
  trainer::TrainConfig c;
  c.epochs = 1;
  c.patch_size = {16, 16, 16};
  c.generator.level_channels = {8, 12, 16, 20};
  c.generator.blocks_per_level = 1;
  c.generator.attention_levels = {3};
  c.generator.attention_heads = 2;
  c.generator.cond_embed_dim = 16;
  c.generator.groupnorm_groups = 4;
  c.discriminator.level_features = {8, 12, 16, 20};
  c.discriminator.groupnorm_groups = 4;
  c.keep_checkpoints = 1;
  return c;
}

torch::Tensor stack_input(const tasking::AssembledExample& ex) {
  std::vector<torch::Tensor> ch;
  for (const auto& v : ex.input) {
    const auto& s = v.shape();
    ch.push_back(torch::from_blob(const_cast<float*>(v.data().data()), {s.d, s.h, s.w}).clone());
  }
  return torch::stack(ch).unsqueeze(0);
}

// 1
Outcome score_oracle() {
  const double s = metrics::challenge_score(0.714, 29.84, 0.070, 0.066);
  return {std::abs(s - 0.779) <= 0.001, "score " + fmt("%.5f", s) + " vs 0.779 +- 0.001"};
}

// 2: explicit per-window loop with population statistics.
double ssim_loop(const Volume3D& x, const Volume3D& y) {
  const int64_t k = 11;
  const Shape3 s = x.shape();
  const double n = static_cast<double>(k * k * k), c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int64_t windows = 0;
  for (int64_t z = 0; z + k <= s.d; ++z)
    for (int64_t r = 0; r + k <= s.h; ++r)
      for (int64_t c = 0; c + k <= s.w; ++c) {
        double sx = 0, sy = 0;
        for (int64_t a = 0; a < k; ++a)
          for (int64_t b = 0; b < k; ++b)
            for (int64_t d = 0; d < k; ++d) {
              sx += x.at(z + a, r + b, c + d);
              sy += y.at(z + a, r + b, c + d);
            }
        const double mx = sx / n, my = sy / n;
        double vx = 0, vy = 0, cov = 0;
        for (int64_t a = 0; a < k; ++a)
          for (int64_t b = 0; b < k; ++b)
            for (int64_t d = 0; d < k; ++d) {
              const double dx = x.at(z + a, r + b, c + d) - mx;
              const double dy = y.at(z + a, r + b, c + d) - my;
              vx += dx * dx;
              vy += dy * dy;
              cov += dx * dy;
            }
        vx /= n;
        vy /= n;
        cov /= n;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
  return total / static_cast<double>(windows);
}

Outcome ssim_equivalence() {
  Rng rng(2);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Shape3 s{12 + rng.index(3), 12 + rng.index(3), 12 + rng.index(3)};
    const Volume3D x = random_volume(s, rng);
    Volume3D y = x;
    // Mix correlated and independent pairs.
    const double noise = rng.uniform(0.0, 0.5);
    for (auto& v : y.data()) v = static_cast<float>(std::clamp(v + noise * rng.normal(), 0.0, 1.0));
    worst = std::max(worst, std::abs(metrics::ssim3d(x, y) - ssim_loop(x, y)));
  }
  return {worst <= 1e-6, "max |diff| " + fmt("%.3g", worst) + " over 50 pairs (<= 1e-6)"};
}

// 3
Outcome intensity_properties() {
  Rng rng(3);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    augment::Support s{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    std::sort(s.begin(), s.end());
    if (augment::intensity_map(0.0, s) != 0.0 || augment::intensity_map(1.0, s) != 1.0) ++violations;
    double prev = 0.0;
    for (int j = 0; j <= 500; ++j) {
      const double v = augment::intensity_map(j / 500.0, s);
      if (v < prev) ++violations;
      prev = v;
    }
  }
  double identity_err = 0.0;
  const augment::Support diag{0.2, 0.4, 0.6, 0.8};
  for (int j = 0; j <= 10000; ++j) {
    const double v = j / 10000.0;
    identity_err = std::max(identity_err, std::abs(augment::intensity_map(v, diag) - v));
  }
  return {violations == 0 && identity_err <= 1e-7,
          std::to_string(violations) + " violations over 1000 supports; identity error " + fmt("%.2g", identity_err)};
}

// 4
Outcome zeroing_invariants() {
  phantom::PhantomConfig pc;
  pc.shape = {16, 16, 16};
  std::vector<PairedSample> pool;
  for (uint64_t s = 0; s < 4; ++s) pool.push_back(phantom::generate_sample(pc, s));
  torch::manual_seed(4);
  model::Generator net(tiny_config().generator);
  torch::NoGradGuard ng;

  int violations = 0, translate = 0, output_mismatch = 0;
  augment::AugmentConfig aug;
  aug.p_intensity = aug.p_degrade = 0.5;
  for (uint64_t i = 0; i < 500; ++i) {
    Rng rng(derive_seed(4, {i}));
    const PairedSample& sample = pool[static_cast<size_t>(rng.index(4))];
    const tasking::TaskSpec task = tasking::decode_condition(static_cast<int>(rng.index(9)));
    const uint64_t seed = rng.engine()();
    const auto ex = tasking::assemble(sample, task, aug, seed);
    try {
      tasking::check_zeroing(ex);
    } catch (const Error&) {
      ++violations;
    }
    if (task.kind != tasking::TaskKind::kTranslate) continue;
    ++translate;
    PairedSample perturbed = sample;
    for (auto& hf : perturbed.hf)
      for (auto& v : hf.data()) v = static_cast<float>(rng.uniform());
    const auto ex2 = tasking::assemble(perturbed, task, aug, seed);
    const auto cond = torch::tensor({static_cast<int64_t>(ex.condition)}, torch::kLong);
    if (!torch::equal(net->forward(stack_input(ex), cond), net->forward(stack_input(ex2), cond))) ++output_mismatch;
  }
  return {violations == 0 && output_mismatch == 0 && translate > 0,
          std::to_string(violations) + " zeroing violations / 500; " + std::to_string(output_mismatch) +
              " output changes under HF perturbation / " + std::to_string(translate) + " translate"};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// 5
Outcome gradient_checks() {
  torch::manual_seed(5);
  Rng rng(5);
  const double eps = 1e-6;
  double worst_recon = 0.0, worst_gen = 0.0;

  const auto target = torch::rand({1, 1, 12, 12, 12}, torch::kDouble);
  auto pred = torch::rand({1, 1, 12, 12, 12}, torch::kDouble).requires_grad_(true);
  const objective::LossWeights w;
  objective::recon_loss(pred, target, {}, w).total.backward();
  auto flat = pred.detach().clone().view(-1);
  const auto grad = pred.grad().view(-1);
  for (int i = 0; i < 10; ++i) {
    const int64_t at = rng.index(flat.numel());
    const double orig = flat[at].item<double>();
    flat[at] = orig + eps;
    const double up = objective::recon_loss(flat.view({1, 1, 12, 12, 12}), target, {}, w).total.item<double>();
    flat[at] = orig - eps;
    const double down = objective::recon_loss(flat.view({1, 1, 12, 12, 12}), target, {}, w).total.item<double>();
    flat[at] = orig;
    worst_recon = std::max(worst_recon, rel_err(grad[at].item<double>(), (up - down) / (2 * eps)));
  }

  model::GeneratorConfig gc;
  gc.level_channels = {2, 4, 6, 8};
  gc.blocks_per_level = 1;
  gc.attention_levels = {3};
  gc.attention_heads = 2;
  gc.attention_mlp_ratio = 1;
  gc.cond_embed_dim = 4;
  gc.groupnorm_groups = 2;
  gc.in_channels = 3;
  model::Generator g(gc);
  g->to(torch::kDouble);
  {
    torch::NoGradGuard ng;
    for (auto& p : g->named_parameters())
      if (p.key().find("film") != std::string::npos) p.value().normal_(0.0, 0.1);
  }
  const auto x = torch::rand({1, 3, 8, 8, 8}, torch::kDouble);
  const auto cond = torch::tensor({int64_t{4}}, torch::kLong);
  const auto weights = torch::randn({1, 1, 8, 8, 8}, torch::kDouble);
  auto objective_fn = [&] { return (g->forward(x, cond) * weights).sum(); };
  g->zero_grad();
  objective_fn().backward();
  auto params = g->parameters();
  for (int i = 0; i < 10; ++i) {
    auto& p = params[static_cast<size_t>(rng.index(static_cast<int64_t>(params.size())))];
    auto pf = p.view(-1);
    const int64_t at = rng.index(pf.numel());
    torch::NoGradGuard ng;
    const double orig = pf[at].item<double>();
    pf[at] = orig + eps;
    const double up = objective_fn().item<double>();
    pf[at] = orig - eps;
    const double down = objective_fn().item<double>();
    pf[at] = orig;
    worst_gen = std::max(worst_gen, rel_err(p.grad().view(-1)[at].item<double>(), (up - down) / (2 * eps)));
  }
  return {worst_recon <= 1e-2 && worst_gen <= 1e-2,
          "max relative error recon " + fmt("%.2g", worst_recon) + ", generator " + fmt("%.2g", worst_gen) +
              " (<= 1e-2)"};
}

// 6
Outcome r1_oracle(const fs::path& work) {
  auto w = torch::rand({1, 1, 4, 4, 4}, torch::kDouble);
  w = w / w.norm();
  const auto x = torch::rand({2, 1, 4, 4, 4}, torch::kDouble);
  const double r1 =
      objective::r1_penalty([&](const torch::Tensor& c) { return (c * w).flatten(1).sum(1); }, x, 10.0)
          .item<double>();

  phantom::PhantomConfig pc;
  pc.shape = {16, 16, 16};
  const auto manifest = phantom::generate_dataset(pc, 6, work / "r1_data");
  auto cfg = tiny_config();
  cfg.epochs = 5;
  trainer::TrainOptions o;
  o.out_dir = work / "r1_run";
  o.num_workers = 1;
  int wrong = 0, rows = 0;
  for (const auto& row : trainer::read_log(trainer::train(manifest, cfg, o).log)) {
    const bool has_r1 = row.at("losses").at("r1").get<double>() != 0.0;
    if (has_r1 != (row.at("d_step").get<int64_t>() % 2 == 0)) ++wrong;
    ++rows;
  }
  return {std::abs(r1 - 5.0) <= 1e-5 && wrong == 0 && rows == 10,
          "penalty " + fmt("%.8f", r1) + " (5 +- 1e-5); cadence wrong on " + std::to_string(wrong) + "/" +
              std::to_string(rows) + " logged steps"};
}

// 7
struct AblationRun {
  std::string name;
  std::string preset;
};

Outcome ablation_trend(const fs::path& work, bool reuse) {
  const std::vector<AblationRun> runs{{"proposed", "none"}, {"a", "a"}, {"b", "b"}, {"c", "c"}, {"e", "e"}};
  const std::vector<uint64_t> seeds{0, 1, 2};
  phantom::PhantomConfig pc;  // 32^3
  const fs::path data = work / "ablation_data";
  const auto manifest = reuse && fs::exists(data / "manifest.json")
                            ? volio::read_manifest(data / "manifest.json")
                            : phantom::generate_dataset(pc, 14, data);  // 12 train + 2 val

  std::map<std::string, std::vector<double>> ssim;
  std::map<std::string, std::vector<std::pair<std::string, metrics::MetricReport>>> by_seed;
  for (uint64_t seed : seeds) {
    for (const auto& r : runs) {
      const fs::path dir = work / (r.name + "_seed" + std::to_string(seed));
      const fs::path result = dir / "val_report.json";
      metrics::MetricReport rep;
      if (reuse && fs::exists(result)) {
        std::ifstream in(result);
        rep = metrics::report_from_json(json::parse(in));
      } else {
        auto cfg = trainer::apply_preset(trainer::TrainConfig{}, r.preset);
        cfg.seed = seed;
        cfg.keep_checkpoints = 1;
        trainer::TrainOptions o;
        o.out_dir = dir;
        const auto t0 = std::chrono::steady_clock::now();
        const auto tr = trainer::train(manifest, cfg, o);
        rep = trainer::evaluate(tr.checkpoint, manifest, volio::Split::kVal);
        std::ofstream(result) << metrics::to_json(rep).dump(2) << '\n';
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "  " << r.name << " seed " << seed << ": val masked SSIM " << fmt("%.4f", rep.masked.ssim)
                  << " (" << fmt("%.0f", secs) << " s)" << std::endl;
      }
      ssim[r.name].push_back(rep.masked.ssim);
      by_seed[r.name].emplace_back(std::to_string(seed), rep);
    }
  }

  auto mean = [&](const std::string& n) {
    double s = 0.0;
    for (double v : ssim.at(n)) s += v;
    return s / static_cast<double>(ssim.at(n).size());
  };
  std::vector<report::NamedReport> table;
  for (const auto& r : runs) {
    metrics::MetricReport avg;
    avg.masked.ssim = mean(r.name);
    table.emplace_back(r.name, avg);
  }
  std::cout << report::render_ablation(table);

  const std::vector<std::pair<std::string, std::string>> order{
      {"proposed", "c"}, {"c", "b"}, {"b", "a"}, {"proposed", "e"}};
  std::string detail;
  bool pass = true;
  for (const auto& [hi, lo] : order) {
    const double gap = mean(hi) - mean(lo);
    pass = pass && gap > 0.0;
    detail += (detail.empty() ? "" : ", ") + hi + "-" + lo + " " + fmt("%+.4f", gap);
  }
  return {pass, "mean val SSIM gaps " + detail};
}

// 8
Outcome shape_contract() {
  torch::manual_seed(8);
  model::Generator desk(model::GeneratorConfig{});
  torch::NoGradGuard ng;
  int wrong = 0;
  for (const auto& s : std::vector<std::array<int64_t, 3>>{{16, 16, 16}, {24, 24, 24}, {32, 32, 32}, {16, 32, 32}}) {
    const auto out = desk->forward(torch::rand({1, 6, s[0], s[1], s[2]}), torch::tensor({int64_t{3}}));
    if (out.sizes() != torch::IntArrayRef({1, 1, s[0], s[1], s[2]}) || !torch::isfinite(out).all().item<bool>()) {
      ++wrong;
    }
  }
  model::Generator full(model::GeneratorConfig::full_scale());
  const int64_t n = model::parameter_count(*full);
  const bool in_range = n >= 70'000'000 && n <= 110'000'000;
  return {wrong == 0 && in_range, std::to_string(wrong) + " shape mismatches over 4 shapes; full-scale parameters " +
                                      std::to_string(n) + " (required 70M-110M)"};
}

// 9
Outcome determinism(const fs::path& work) {
  phantom::PhantomConfig pc;
  pc.shape = {16, 16, 16};
  const auto manifest = phantom::generate_dataset(pc, 6, work / "det_data");
  auto cfg = tiny_config();
  cfg.epochs = 2;
  auto run = [&](const std::string& name) {
    trainer::TrainOptions o;
    o.out_dir = work / name;
    o.num_workers = 2;
    return trainer::train(manifest, cfg, o);
  };
  const auto a = run("det_a");
  const auto b = run("det_b");
  const bool same = a.generator_hash == b.generator_hash && a.discriminator_hash == b.discriminator_hash;

  Rng rng(9);
  int io_mismatch = 0;
  for (int i = 0; i < 10; ++i) {
    Volume3D v = random_volume({1 + rng.index(16), 1 + rng.index(16), 1 + rng.index(16)}, rng);
    for (auto& x : v.data()) x = static_cast<float>(rng.normal(0.0, 100.0));
    const fs::path p = work / ("io_" + std::to_string(i));
    volio::write_volume(v, p);
    if (!volio::read_volume(p).identical(v)) ++io_mismatch;
  }
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(a.generator_hash));
  return {same && io_mismatch == 0, std::string("weight hashes ") + (same ? "equal" : "differ") + " (" + hash +
                                        "); " + std::to_string(io_mismatch) + "/10 volume round trips differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ulfenc acceptance checks"};
  std::set<int> only, skip, expect_fail;
  std::string work_dir = (fs::temp_directory_path() / "ulfenc_acceptance").string();
  bool reuse = false;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--skip", skip, "Skip these criteria");
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail");
  app.add_option("--work-dir", work_dir, "Scratch directory for datasets and runs");
  app.add_flag("--reuse", reuse, "Reuse finished ablation runs found in the work dir");
  CLI11_PARSE(app, argc, argv);

  log::set_level(log::Level::kWarn);
  const fs::path work(work_dir);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"score formula oracle", score_oracle},
      {"SSIM brute-force equivalence", ssim_equivalence},
      {"intensity-map properties", intensity_properties},
      {"channel-zeroing invariants", zeroing_invariants},
      {"gradient checks", gradient_checks},
      {"R1 analytic oracle and cadence", [&] { return r1_oracle(work); }},
      {"desk-scale ablation trend", [&] { return ablation_trend(work / "ablation", reuse); }},
      {"shape and parameter contract", shape_contract},
      {"determinism", [&] { return determinism(work); }},
  };

  int unexpected = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if ((!only.empty() && !only.count(id)) || skip.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = expect_fail.count(id) > 0;
    std::cout << "criterion " << id << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL")
              << (known && !o.pass ? " (known failure)" : "") << " - " << o.detail << " (" << fmt("%.1f", secs)
              << " s)" << std::endl;
    if (o.pass == known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
