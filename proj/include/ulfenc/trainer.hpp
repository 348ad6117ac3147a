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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "ulfenc/augment.hpp"
#include "ulfenc/metrics.hpp"
#include "ulfenc/model.hpp"
#include "ulfenc/objective.hpp"
#include "ulfenc/tasking.hpp"
#include "ulfenc/volio.hpp"

namespace ulfenc::trainer {

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  int epochs = 30;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double lr_min = 0.0;
  double weight_decay = 1e-2;
  int batch_size = 2;
  Shape3 patch_size{32, 32, 32};
  uint64_t seed = 0;
  objective::LossWeights loss;
  bool mask_recon_loss = false;  // restrict L1/SSIM to the brain mask
  augment::AugmentConfig aug;
  tasking::TaskMix task_mix;
  std::string ablation_preset = "none";
  model::GeneratorConfig generator;
  model::DiscriminatorConfig discriminator;
  int keep_checkpoints = 3;  // most recent epoch files kept; 0 keeps all

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Valid names for `apply_preset`, excluding "none".
const std::vector<std::string>& preset_names();

/// Applies a named ablation; "none" leaves the config untouched.
TrainConfig apply_preset(TrainConfig cfg, std::string_view name);

double cosine_lr(int64_t step, int64_t total_steps, double lr_max, double lr_min);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  int num_workers = 0;  // 0 = ULFENC_NUM_WORKERS or available cores
  /// Stop after this many epochs of the current invocation (for resume tests).
  std::optional<int> stop_after_epoch;
  /// Hash the idle network around every update and throw if it moved.
  bool check_isolation = false;
  /// Build and update the discriminator even when w_adv = 0.
  bool force_discriminator = false;
};

struct TrainResult {
  std::filesystem::path checkpoint;  // latest epoch checkpoint
  std::filesystem::path log;
  std::vector<double> epoch_mean_total_g;
  uint64_t generator_hash = 0;
  uint64_t discriminator_hash = 0;  // 0 without a discriminator
};

TrainResult train(const volio::DatasetManifest& manifest, const TrainConfig& cfg, const TrainOptions& opt);

int resolve_workers(int requested);

struct Checkpoint {
  int format_version = 1;
  std::string version;
  TrainConfig config;
  int epoch = 0;            // completed epochs
  int64_t global_step = 0;  // completed optimization steps
  int64_t d_steps = 0;
  model::Generator generator{nullptr};
  model::Discriminator discriminator{nullptr};  // null when disabled
};

/// Networks and counters; optimizer states are only read back by `train`.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Full-volume generator inference for one example. Spatial extents are
/// zero-padded up to the network's multiple and cropped back; the output is
/// clamped to [0, 1].
Volume3D predict(model::Generator& generator, const tasking::AssembledExample& ex);

using Predictor = std::function<Volume3D(const tasking::AssembledExample&)>;

/// Translate task for each subject in `split` and each target contrast,
/// without augmentation, scored against the high-field volume and mask.
/// Predictions are written to `pred_out` when given.
metrics::MetricReport evaluate_with(const Predictor& predictor, const volio::DatasetManifest& manifest,
                                    volio::Split split,
                                    const std::optional<std::filesystem::path>& pred_out = std::nullopt);

metrics::MetricReport evaluate(const std::filesystem::path& checkpoint, const volio::DatasetManifest& manifest,
                               volio::Split split,
                               const std::optional<std::filesystem::path>& pred_out = std::nullopt);

/// Rows of a JSON-lines log.
std::vector<nlohmann::json> read_log(const std::filesystem::path& path);

}  // namespace ulfenc::trainer
