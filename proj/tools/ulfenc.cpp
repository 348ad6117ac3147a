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

// ulfenc command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ulfenc/augment.hpp"
#include "ulfenc/log.hpp"
#include "ulfenc/metrics.hpp"
#include "ulfenc/phantom.hpp"
#include "ulfenc/report.hpp"
#include "ulfenc/tasking.hpp"
#include "ulfenc/trainer.hpp"
#include "ulfenc/volio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ulfenc;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("cannot parse " + p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

Shape3 parse_shape(const std::string& s) {
  std::vector<int64_t> v;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      v.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw UsageError("bad shape '" + s + "', expected D,H,W");
    }
  }
  if (v.size() != 3) throw UsageError("bad shape '" + s + "', expected D,H,W");
  return {v[0], v[1], v[2]};
}

struct Globals {
  std::optional<uint64_t> seed;
  std::string log_level = "info";
};

struct PhantomArgs {
  std::string out, shape = "32,32,32";
  int64_t subjects = 14;
  std::optional<double> misreg, noise;
};

int run_phantom(const PhantomArgs& a, const Globals& g) {
  phantom::PhantomConfig cfg;
  cfg.shape = parse_shape(a.shape);
  cfg.seed = g.seed.value_or(0);
  if (a.misreg) cfg.misreg_max_mm = *a.misreg;
  if (a.noise) cfg.lf_noise_sigma = *a.noise;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto manifest = phantom::generate_dataset(cfg, a.subjects, a.out);
  log::info("wrote " + std::to_string(manifest.entries.size()) + " subjects to " + a.out);
  return 0;
}

struct PreviewArgs {
  std::string manifest, subject, out, task = "translate", target = "T1w", config;
};

int run_preview(const PreviewArgs& a, const Globals& g) {
  const auto manifest = volio::read_manifest(a.manifest);
  const auto& entry = a.subject.empty() ? manifest.entries.at(0) : manifest.find(a.subject);
  augment::AugmentConfig aug;
  if (!a.config.empty()) aug = augment::config_from_json(read_json(a.config));
  tasking::TaskSpec task;
  try {
    task = {tasking::parse_task(a.task), parse_contrast(a.target)};
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto sample = volio::load_sample(manifest, entry);
  const auto ex = tasking::assemble(sample, task, aug, g.seed.value_or(0));
  const fs::path out(a.out);
  fs::create_directories(out);
  static const char* names[] = {"lf_T1w", "lf_T2w", "lf_FLAIR", "hf_T1w", "hf_T2w", "hf_FLAIR"};
  for (int c = 0; c < tasking::kNumInputChannels; ++c) {
    volio::write_volume(ex.input[c], out / (std::string("input_") + names[c] + ".vol.json"));
  }
  volio::write_volume(ex.target, out / "target.vol.json");
  volio::write_volume(ex.loss_mask, out / "loss_mask.vol.json");
  write_json(out / "plan.json", {{"subject_id", entry.subject_id},
                                 {"task", tasking::to_json(ex.task)},
                                 {"plan", augment::to_json(ex.plan)}});
  return 0;
}

struct TrainArgs {
  std::string manifest, config, preset, out, resume;
  std::optional<int> epochs;
};

int run_train(const TrainArgs& a, const Globals& g) {
  const auto& presets = trainer::preset_names();
  if (!a.preset.empty() && std::find(presets.begin(), presets.end(), a.preset) == presets.end()) {
    std::string valid;
    for (const auto& n : presets) valid += (valid.empty() ? "" : ",") + n;
    throw UsageError("unknown preset '" + a.preset + "'; valid presets: {" + valid + "}");
  }
  trainer::TrainConfig cfg;
  if (!a.config.empty()) cfg = trainer::config_from_json(read_json(a.config));
  if (!a.preset.empty()) cfg = trainer::apply_preset(cfg, a.preset);
  if (g.seed) cfg.seed = *g.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  cfg.validate();
  const auto manifest = volio::read_manifest(a.manifest);
  trainer::TrainOptions opt;
  opt.out_dir = a.out;
  if (!a.resume.empty()) opt.resume = fs::path(a.resume);
  const auto result = trainer::train(manifest, cfg, opt);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(result.generator_hash));
  write_json(fs::path(a.out) / "result.json", {{"checkpoint", result.checkpoint.filename().string()},
                                               {"epoch_mean_total_g", result.epoch_mean_total_g},
                                               {"generator_hash", hash}});
  std::cout << result.checkpoint.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, manifest, split = "val", out, pred_out;
};

int run_eval(const EvalArgs& a, const Globals&) {
  volio::Split split;
  try {
    split = volio::parse_split(a.split);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto manifest = volio::read_manifest(a.manifest);
  std::optional<fs::path> pred_out;
  if (!a.pred_out.empty()) pred_out = fs::path(a.pred_out);
  const auto report = trainer::evaluate(a.checkpoint, manifest, split, pred_out);
  write_json(a.out, metrics::to_json(report));
  std::cout << report::render_metrics(report);
  return 0;
}

struct ScoreArgs {
  std::string pred, ref, mask, out;
  bool normalize_ref = false;
};

int run_score(const ScoreArgs& a, const Globals&) {
  const std::string suffix = ".vol.json";
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.pred)) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix) && name.find("_hf_") != std::string::npos) {
      files.push_back(e.path());
    }
  }
  if (files.empty()) throw Error("no '<subject>_hf_<contrast>.vol.json' predictions in " + a.pred);
  std::sort(files.begin(), files.end());

  metrics::MetricReport report;
  for (const auto& p : files) {
    const std::string name = p.filename().string();
    const size_t at = name.rfind("_hf_");
    const std::string subject = name.substr(0, at);
    const std::string contrast = name.substr(at + 4, name.size() - suffix.size() - at - 4);
    const Volume3D pred = volio::read_volume(p);
    Volume3D ref = volio::read_volume(fs::path(a.ref) / name);
    if (a.normalize_ref) ref = volio::normalize(ref);
    const Volume3D mask = volio::read_volume(fs::path(a.mask) / (subject + "_" + volio::kMaskKey + suffix));
    report.entries.push_back(metrics::evaluate_pair(pred, ref, mask, subject, contrast));
  }
  report.aggregate();
  write_json(a.out, metrics::to_json(report));
  std::cout << report::render_metrics(report);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string config, out, markdown;
};

int run_report(const ReportArgs& a, const Globals&) {
  std::vector<report::NamedReport> reports;
  for (const auto& r : a.runs) {
    const size_t eq = r.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--run expects NAME=report.json, got '" + r + "'");
    reports.emplace_back(r.substr(0, eq), metrics::report_from_json(read_json(r.substr(eq + 1))));
  }
  const json config = a.config.empty() ? json::object() : read_json(a.config);
  const json run = report::run_report(config, reports);
  write_json(a.out, run);
  const std::string text = report::render_run_report(run);
  if (!a.markdown.empty()) {
    std::ofstream(a.markdown) << text;
  } else {
    std::cout << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ulfenc: multi-task low-field to high-field MRI enhancement on synthetic phantoms", "ulfenc"};
  app.set_version_flag("--version", report::version_string());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed threaded to all randomness (default 0)");
  app.add_option("--log-level", g.log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}))
      ->capture_default_str();

  PhantomArgs pa;
  auto* phantom_cmd = app.add_subcommand("phantom-gen", "Generate a paired phantom dataset and manifest");
  phantom_cmd->add_option("--out", pa.out, "Output directory")->required();
  phantom_cmd->add_option("--subjects", pa.subjects, "Number of subjects; the last 2 are validation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  phantom_cmd->add_option("--shape", pa.shape, "Volume shape D,H,W")->capture_default_str();
  phantom_cmd->add_option("--misreg", pa.misreg, "Maximum low-field misregistration in mm (default 1.5)");
  phantom_cmd->add_option("--noise", pa.noise, "Low-field noise standard deviation (default 0.03)");

  PreviewArgs va;
  auto* preview_cmd = app.add_subcommand("augment-preview", "Write one assembled, augmented training example");
  preview_cmd->add_option("--manifest", va.manifest, "Dataset manifest")->required();
  preview_cmd->add_option("--subject", va.subject, "Subject id (default: first entry)");
  preview_cmd->add_option("--task", va.task, "translate, synthesize or restore")->capture_default_str();
  preview_cmd->add_option("--target", va.target, "T1w, T2w or FLAIR")->capture_default_str();
  preview_cmd->add_option("--config", va.config, "AugmentConfig JSON (default probabilities 0.2/0.2/1.0)");
  preview_cmd->add_option("--out", va.out, "Output directory")->required();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand(
      "train",
      "Train generator and discriminator. Defaults: 30 epochs, AdamW lr 2e-4 (both), weight decay 1e-2, "
      "cosine schedule to 0, batch 2, patch 32^3, L1/SSIM/adv weights 0.2/0.8/0.2, R1 gamma 10 on every "
      "second discriminator step, task mix 0.5/0.25/0.25");
  train_cmd->add_option("--manifest", ta.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--config", ta.config, "TrainConfig JSON; missing fields keep their defaults");
  train_cmd->add_option("--preset", ta.preset, "Ablation preset a|b|c|d|e");
  train_cmd->add_option("--epochs", ta.epochs, "Override the configured epoch count");
  train_cmd->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the translate task");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", ea.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--split", ea.split, "train or val")->capture_default_str();
  eval_cmd->add_option("--out", ea.out, "Report JSON")->required();
  eval_cmd->add_option("--pred-out", ea.pred_out, "Directory for predicted volumes");

  ScoreArgs sa;
  auto* score_cmd = app.add_subcommand("score", "Score predicted volumes against references");
  score_cmd->add_option("--pred", sa.pred, "Directory of <subject>_hf_<contrast>.vol.json predictions")
      ->required()
      ->check(CLI::ExistingDirectory);
  score_cmd->add_option("--ref", sa.ref, "Directory with same-named references")
      ->required()
      ->check(CLI::ExistingDirectory);
  score_cmd->add_option("--mask", sa.mask, "Directory with <subject>_mask.vol.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  score_cmd->add_option("--out", sa.out, "Report JSON")->required();
  score_cmd->add_flag("--normalize-ref", sa.normalize_ref, "Percentile-normalize references as the loader does");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "Combine metric reports into a run report and tables");
  report_cmd->add_option("--run", ra.runs, "NAME=report.json; two or more add an ablation table")->required();
  report_cmd->add_option("--config", ra.config, "Config snapshot to embed");
  report_cmd->add_option("--out", ra.out, "Run report JSON")->required();
  report_cmd->add_option("--markdown", ra.markdown, "Write the markdown view here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    log::set_level(log::parse_level(g.log_level));
    if (*phantom_cmd) return run_phantom(pa, g);
    if (*preview_cmd) return run_preview(va, g);
    if (*train_cmd) return run_train(ta, g);
    if (*eval_cmd) return run_eval(ea, g);
    if (*score_cmd) return run_score(sa, g);
    if (*report_cmd) return run_report(ra, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
