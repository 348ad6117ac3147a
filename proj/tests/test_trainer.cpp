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

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "helpers.hpp"
#include "ulfenc/phantom.hpp"
#include "ulfenc/trainer.hpp"

namespace ulfenc {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using trainer::TrainConfig;
using trainer::TrainOptions;

// Small networks on 16^3 phantoms keep every run to a few seconds.
TrainConfig tiny_config() {
  TrainConfig c;
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
  c.keep_checkpoints = 0;
  return c;
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = std::make_unique<TempDir>("trainer_data");
    phantom::PhantomConfig cfg;
    cfg.shape = {16, 16, 16};
    manifest_ = phantom::generate_dataset(cfg, 6, data_->path());  // 4 train + 2 val
  }
  static void TearDownTestSuite() { data_.reset(); }

  TrainOptions options(const std::string& name) const {
    TrainOptions o;
    o.out_dir = out_ / name;
    o.num_workers = 1;
    return o;
  }

  static std::unique_ptr<TempDir> data_;
  static volio::DatasetManifest manifest_;
  TempDir out_{"trainer"};
};

std::unique_ptr<TempDir> TrainerTest::data_;
volio::DatasetManifest TrainerTest::manifest_;

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(trainer::cosine_lr(0, 100, 2e-4, 0.0), 2e-4);
  EXPECT_NEAR(trainer::cosine_lr(50, 100, 2e-4, 0.0), 1e-4, 1e-18);
  EXPECT_NEAR(trainer::cosine_lr(100, 100, 2e-4, 1e-5), 1e-5, 1e-18);
  double prev = 1.0;
  for (int s = 0; s <= 100; ++s) {
    const double lr = trainer::cosine_lr(s, 100, 1.0, 0.1);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_THROW(trainer::cosine_lr(101, 100, 1.0, 0.0), Error);
  EXPECT_THROW(trainer::cosine_lr(0, 0, 1.0, 0.0), Error);
}

// Flattened key/value pairs of a config, for diffing presets.
void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  if (j.is_object()) {
    for (const auto& it : j.items()) flatten(it.value(), prefix + "/" + it.key(), out);
  } else {
    out[prefix] = j;
  }
}

std::set<std::string> changed_fields(const TrainConfig& a, const TrainConfig& b) {
  std::map<std::string, nlohmann::json> fa, fb;
  flatten(trainer::to_json(a), "", fa);
  flatten(trainer::to_json(b), "", fb);
  std::set<std::string> diff;
  for (const auto& [k, v] : fa)
    if (fb.at(k) != v) diff.insert(k);
  return diff;
}

TEST(Presets, ChangeOnlyTheirFields) {
  const TrainConfig base;
  const std::map<std::string, std::set<std::string>> expected{
      {"a", {"/task_mix/synthesize", "/task_mix/restore", "/task_mix/translate", "/aug/p_intensity",
             "/aug/p_degrade", "/aug/p_geometric"}},
      {"b", {"/task_mix/synthesize", "/task_mix/restore", "/task_mix/translate", "/aug/p_intensity",
             "/aug/p_degrade", "/aug/nonrigid_max_disp_vox"}},
      {"c", {"/task_mix/synthesize", "/task_mix/restore", "/task_mix/translate"}},
      {"d", {"/loss/w_adv"}},
      {"e", {"/generator/spatial_dims", "/discriminator/spatial_dims"}},
  };
  for (const auto& name : trainer::preset_names()) {
    const TrainConfig p = trainer::apply_preset(base, name);
    auto want = expected.at(name);
    want.insert("/ablation_preset");
    EXPECT_EQ(changed_fields(base, p), want) << "preset " << name;
    EXPECT_NO_THROW(p.validate());
  }
  EXPECT_TRUE(changed_fields(base, trainer::apply_preset(base, "none")).empty());
}

TEST(Presets, UnknownNameListsValidOnes) {
  try {
    trainer::apply_preset(TrainConfig{}, "q");
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("{a,b,c,d,e}"), std::string::npos);
  }
}

TEST(TrainConfigJson, RoundTripAndStrictness) {
  TrainConfig c = trainer::apply_preset(tiny_config(), "b");
  c.seed = 42;
  c.lr_min = 1e-6;
  const auto back = trainer::config_from_json(trainer::to_json(c));
  EXPECT_EQ(trainer::to_json(back), trainer::to_json(c));
  EXPECT_THROW(trainer::config_from_json({{"epoch", 3}}), Error);
  EXPECT_THROW(trainer::config_from_json({{"aug", {{"p_rotate", 0.5}}}}), Error);
}

TEST(TrainConfigValidate, RejectsBadValues) {
  TrainConfig c;
  c.patch_size = {24, 32, 32};
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.generator.spatial_dims = 2;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.lr_min = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST_F(TrainerTest, SmokeRunWritesLogAndReloadableCheckpoint) {
  const auto cfg = tiny_config();
  const auto r = trainer::train(manifest_, cfg, options("smoke"));
  ASSERT_TRUE(fs::exists(r.checkpoint));
  const auto rows = trainer::read_log(r.log);
  ASSERT_EQ(rows.size(), 2u);  // 4 training subjects, batch 2
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].at("step"), i + 1);
    EXPECT_EQ(rows[i].at("epoch"), 1);
    const auto& l = rows[i].at("losses");
    const double total = cfg.loss.w_l1 * l.at("l1").get<double>() +
                         cfg.loss.w_ssim * l.at("ssim_loss").get<double>() +
                         cfg.loss.w_adv * l.at("adv_g").get<double>();
    EXPECT_EQ(l.at("total_g").get<double>(), total);
  }
  const auto ck = trainer::load_checkpoint(r.checkpoint);
  EXPECT_EQ(ck.epoch, 1);
  EXPECT_EQ(ck.global_step, 2);
  EXPECT_EQ(model::weight_hash(*ck.generator), r.generator_hash);
  ASSERT_TRUE(ck.discriminator);
  EXPECT_EQ(model::weight_hash(*ck.discriminator), r.discriminator_hash);
  EXPECT_EQ(trainer::to_json(ck.config), trainer::to_json(cfg));
  EXPECT_TRUE(fs::exists(options("smoke").out_dir / "config.json"));
}

TEST_F(TrainerTest, PresetDHasNoAdversarialTerms) {
  const auto cfg = trainer::apply_preset(tiny_config(), "d");
  const auto r = trainer::train(manifest_, cfg, options("d"));
  EXPECT_EQ(r.discriminator_hash, 0u);
  for (const auto& row : trainer::read_log(r.log)) {
    const auto& l = row.at("losses");
    for (const char* k : {"adv_g", "d_real", "d_fake", "r1", "total_d"}) EXPECT_EQ(l.at(k), 0.0) << k;
    EXPECT_FALSE(row.contains("d_step"));
  }
  EXPECT_FALSE(trainer::load_checkpoint(r.checkpoint).discriminator);
}

TEST_F(TrainerTest, R1OnEverySecondDiscriminatorStep) {
  auto cfg = tiny_config();
  cfg.epochs = 5;  // 10 steps
  const auto rows = trainer::read_log(trainer::train(manifest_, cfg, options("r1")).log);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& row : rows) {
    const int64_t d_step = row.at("d_step");
    const double r1 = row.at("losses").at("r1");
    EXPECT_EQ(r1 != 0.0, d_step % 2 == 0) << "d_step " << d_step;
  }
}

TEST_F(TrainerTest, UpdatesAreIsolated) {
  auto o = options("iso");
  o.check_isolation = true;
  auto cfg = tiny_config();
  cfg.epochs = 2;
  EXPECT_NO_THROW(trainer::train(manifest_, cfg, o));
}

TEST_F(TrainerTest, ZeroAdversarialWeightIgnoresDiscriminator) {
  auto cfg = tiny_config();
  cfg.loss.w_adv = 0.0;
  auto with_d = options("with_d");
  with_d.force_discriminator = true;
  const auto a = trainer::train(manifest_, cfg, with_d);
  const auto b = trainer::train(manifest_, cfg, options("without_d"));
  EXPECT_NE(a.discriminator_hash, 0u);
  EXPECT_EQ(b.discriminator_hash, 0u);
  EXPECT_EQ(a.generator_hash, b.generator_hash);
}

TEST_F(TrainerTest, DeterministicAcrossRunsAndWorkers) {
  auto cfg = tiny_config();
  cfg.epochs = 2;
  const auto a = trainer::train(manifest_, cfg, options("det_a"));
  const auto b = trainer::train(manifest_, cfg, options("det_b"));
  auto two = options("det_c");
  two.num_workers = 2;
  const auto c = trainer::train(manifest_, cfg, two);
  EXPECT_EQ(a.generator_hash, b.generator_hash);
  EXPECT_EQ(a.discriminator_hash, b.discriminator_hash);
  EXPECT_EQ(a.generator_hash, c.generator_hash);
  EXPECT_EQ(trainer::read_log(a.log), trainer::read_log(c.log));

  cfg.seed = 1;
  EXPECT_NE(trainer::train(manifest_, cfg, options("det_d")).generator_hash, a.generator_hash);
}

TEST_F(TrainerTest, ResumeMatchesUninterruptedRun) {
  auto cfg = tiny_config();
  cfg.epochs = 3;
  const auto full = trainer::train(manifest_, cfg, options("full"));

  auto first = options("split");
  first.stop_after_epoch = 1;
  const auto part = trainer::train(manifest_, cfg, first);
  auto second = options("split");
  second.resume = part.checkpoint;
  const auto rest = trainer::train(manifest_, cfg, second);

  EXPECT_EQ(rest.generator_hash, full.generator_hash);
  EXPECT_EQ(rest.discriminator_hash, full.discriminator_hash);
  EXPECT_EQ(trainer::read_log(rest.log), trainer::read_log(full.log));
}

TEST_F(TrainerTest, ResumeRejectsDifferentConfig) {
  const auto cfg = tiny_config();
  const auto part = trainer::train(manifest_, cfg, options("base"));
  auto other = cfg;
  other.lr_g = 1e-3;
  auto o = options("other");
  o.resume = part.checkpoint;
  EXPECT_THROW(trainer::train(manifest_, other, o), trainer::TrainingError);
}

TEST_F(TrainerTest, NonFiniteLossAborts) {
  auto cfg = tiny_config();
  cfg.epochs = 4;
  cfg.lr_g = cfg.lr_d = 1e30;
  const auto o = options("nan");
  EXPECT_THROW(trainer::train(manifest_, cfg, o), trainer::TrainingError);
  std::ifstream in(o.out_dir / "nan_dump.json");
  ASSERT_TRUE(in.good());
  const auto dump = nlohmann::json::parse(in);
  EXPECT_TRUE(dump.contains("item_seeds"));
  EXPECT_TRUE(dump.contains("losses"));
}

TEST_F(TrainerTest, KeepsOnlyRecentCheckpoints) {
  auto cfg = tiny_config();
  cfg.epochs = 4;
  cfg.keep_checkpoints = 2;
  const auto r = trainer::train(manifest_, cfg, options("keep"));
  const fs::path dir = r.checkpoint.parent_path();
  EXPECT_FALSE(fs::exists(dir / "epoch_001.pt"));
  EXPECT_FALSE(fs::exists(dir / "epoch_002.pt"));
  EXPECT_TRUE(fs::exists(dir / "epoch_003.pt"));
  EXPECT_TRUE(fs::exists(dir / "epoch_004.pt"));
}

TEST_F(TrainerTest, TwoDimensionalPresetTrainsAndEvaluates) {
  const auto cfg = trainer::apply_preset(tiny_config(), "e");
  const auto r = trainer::train(manifest_, cfg, options("e"));
  const auto report = trainer::evaluate(r.checkpoint, manifest_, volio::Split::kVal);
  EXPECT_EQ(report.entries.size(), 6u);
  EXPECT_TRUE(std::isfinite(report.score));
}

TEST_F(TrainerTest, EvaluateWithOracleAndBlankPredictors) {
  const auto oracle = trainer::evaluate_with([](const tasking::AssembledExample& ex) { return ex.target; },
                                             manifest_, volio::Split::kVal, out_ / "pred");
  ASSERT_EQ(oracle.entries.size(), 6u);
  EXPECT_DOUBLE_EQ(oracle.masked.ssim, 1.0);
  EXPECT_DOUBLE_EQ(oracle.score, 1.0);
  EXPECT_TRUE(fs::exists(out_ / "pred" / (manifest_.split(volio::Split::kVal)[0]->subject_id + "_hf_T1w.vol.json")));

  const auto blank = trainer::evaluate_with(
      [](const tasking::AssembledExample& ex) { return Volume3D(ex.target.shape(), 0.0f); }, manifest_,
      volio::Split::kVal);
  EXPECT_LT(blank.score, oracle.score);
  EXPECT_NEAR(blank.masked.nmse, 1.0, 1e-9);
}

TEST_F(TrainerTest, EvaluateUntrainedCheckpoint) {
  const auto r = trainer::train(manifest_, tiny_config(), options("eval"));
  const auto report = trainer::evaluate(r.checkpoint, manifest_, volio::Split::kVal, out_ / "eval_pred");
  EXPECT_EQ(report.entries.size(), 6u);
  for (const auto& e : report.entries) {
    EXPECT_TRUE(std::isfinite(e.score));
    const auto pred = volio::read_volume(out_ / "eval_pred" / (e.subject_id + "_hf_" + e.contrast + ".vol.json"));
    EXPECT_GE(pred.min(), 0.0f);
    EXPECT_LE(pred.max(), 1.0f);
  }
}

TEST_F(TrainerTest, PredictPadsOddShapes) {
  torch::manual_seed(0);
  model::Generator g(tiny_config().generator);
  const Shape3 shape{13, 17, 10};
  PairedSample s;
  for (int c = 0; c < 3; ++c) {
    s.lf[c] = testing::random_volume(shape, 10 + c);
    s.hf[c] = testing::random_volume(shape, 20 + c);
  }
  s.mask = Volume3D(shape, 1.0f);
  const auto ex = tasking::assemble(s, {tasking::TaskKind::kTranslate, Contrast::T2w},
                                    augment::AugmentConfig::none(), 0);
  const Volume3D out = trainer::predict(g, ex);
  EXPECT_EQ(out.shape(), shape);
}

TEST_F(TrainerTest, RejectsPatchLargerThanSubjects) {
  auto cfg = tiny_config();
  cfg.patch_size = {32, 32, 32};
  EXPECT_THROW(trainer::train(manifest_, cfg, options("big")), trainer::TrainingError);
}

// Desk-scale proposed config; learning must show within five epochs.
TEST(TrainerDesk, LossFallsByEpochFive) {
  TempDir dir("desk");
  phantom::PhantomConfig pc;
  const auto manifest = phantom::generate_dataset(pc, 14, dir / "data");
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.keep_checkpoints = 1;
  TrainOptions o;
  o.out_dir = dir / "run";
  const auto r = trainer::train(manifest, cfg, o);
  ASSERT_EQ(r.epoch_mean_total_g.size(), 5u);
  EXPECT_LT(r.epoch_mean_total_g[4], r.epoch_mean_total_g[0]);
}

}  // namespace
}  // namespace ulfenc
