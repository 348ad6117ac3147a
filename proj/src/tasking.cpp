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

#include "ulfenc/tasking.hpp"

#include <algorithm>
#include <cmath>

#include "ulfenc/rng.hpp"

namespace ulfenc::tasking {

namespace {

bool all_zero(const Volume3D& v) {
  return std::all_of(v.data().begin(), v.data().end(), [](float x) { return x == 0.0f; });
}

}  // namespace

std::string_view task_name(TaskKind k) {
  switch (k) {
    case TaskKind::kTranslate: return "translate";
    case TaskKind::kSynthesize: return "synthesize";
    case TaskKind::kRestore: return "restore";
  }
  return "?";
}

TaskKind parse_task(std::string_view name) {
  for (auto k : {TaskKind::kTranslate, TaskKind::kSynthesize, TaskKind::kRestore}) {
    if (task_name(k) == name) return k;
  }
  throw Error("unknown task '" + std::string(name) + "'");
}

TaskSpec decode_condition(int code) {
  if (code < 0 || code >= kNumConditions) {
    throw Error("condition code " + std::to_string(code) + " outside [0, 8]");
  }
  return {static_cast<TaskKind>(code / 3), static_cast<Contrast>(code % 3)};
}

void TaskMix::validate() const {
  if (!(translate >= 0.0 && synthesize >= 0.0 && restore >= 0.0)) {
    throw Error("task mix probabilities must be non-negative");
  }
  if (std::abs(translate + synthesize + restore - 1.0) > 1e-9) {
    throw Error("task mix probabilities must sum to 1");
  }
}

TaskSpec sample_task(const TaskMix& mix, uint64_t rng_seed) {
  mix.validate();
  Rng rng(rng_seed);
  const double u = rng.uniform();
  TaskSpec t;
  const std::array<double, 3> p{mix.translate, mix.synthesize, mix.restore};
  // Falls back to the last kind with nonzero mass if rounding leaves u beyond the total.
  int kind = 2;
  while (p[kind] == 0.0) --kind;
  double cumulative = 0.0;
  for (int k = 0; k < 3; ++k) {
    cumulative += p[k];
    if (p[k] > 0.0 && u < cumulative) {
      kind = k;
      break;
    }
  }
  t.kind = static_cast<TaskKind>(kind);
  t.target = static_cast<Contrast>(rng.index(3));
  return t;
}

AssembledExample assemble(const PairedSample& sample, const TaskSpec& task,
                          const augment::AugmentConfig& aug, uint64_t rng_seed) {
  AssembledExample ex;
  ex.task = task;
  ex.condition = condition_code(task);
  ex.plan = augment::sample_plan(aug, derive_seed(rng_seed, {1}));

  const bool translate = task.kind == TaskKind::kTranslate;
  const auto& sources = translate ? sample.lf : sample.hf;
  const int target_idx = contrast_index(task.target);

  std::array<Volume3D, 3> inputs;
  if (ex.plan.geometric) {
    const auto grid = augment::geometric_grid(sample.shape(), *ex.plan.geometric);
    for (int c = 0; c < 3; ++c) inputs[c] = augment::warp(sources[c], grid);
    ex.target = translate ? augment::warp(sample.hf[target_idx], grid) : inputs[target_idx];
    ex.loss_mask = augment::warp(sample.mask, grid, true);
  } else {
    inputs = sources;
    ex.target = sample.hf[target_idx];
    ex.loss_mask = sample.mask;
  }

  if (ex.plan.intensity && task.kind != TaskKind::kRestore) {
    for (int c = 0; c < 3; ++c) inputs[c] = augment::apply_intensity(inputs[c], (*ex.plan.intensity)[c]);
  }

  std::optional<std::array<augment::DegradeParams, 3>> degrade = ex.plan.degrade;
  if (task.kind == TaskKind::kRestore && !degrade) {
    degrade = augment::draw_degrade(aug, derive_seed(rng_seed, {2}));
  }
  if (degrade) {
    for (int c = 0; c < 3; ++c) {
      inputs[c] = augment::apply_degrade(inputs[c], (*degrade)[c],
                                         derive_seed(rng_seed, {3, static_cast<uint64_t>(c)}));
    }
  }

  const Shape3 s = sample.shape();
  const int offset = translate ? 0 : 3;
  for (int ch = 0; ch < kNumInputChannels; ++ch) ex.input[ch] = Volume3D(s, 0.0f, sample.mask.spacing_mm());
  for (int c = 0; c < 3; ++c) {
    if (task.kind == TaskKind::kSynthesize && c == target_idx) continue;
    ex.input[offset + c] = std::move(inputs[c]);
  }
  return ex;
}

void check_zeroing(const AssembledExample& ex) {
  const bool translate = ex.task.kind == TaskKind::kTranslate;
  for (int ch = 0; ch < 3; ++ch) {
    const Volume3D& zeroed = ex.input[translate ? 3 + ch : ch];
    if (!all_zero(zeroed)) {
      throw Error(std::string(task_name(ex.task.kind)) + ": channel " +
                  std::to_string(translate ? 3 + ch : ch) + " is not zero");
    }
  }
  if (ex.task.kind == TaskKind::kSynthesize && !all_zero(ex.input[3 + contrast_index(ex.task.target)])) {
    throw Error("synthesize: target contrast channel is not zero");
  }
  if (ex.condition != condition_code(ex.task)) throw Error("condition code does not match task");
}

nlohmann::json to_json(const TaskSpec& t) {
  return nlohmann::json{{"kind", std::string(task_name(t.kind))},
                        {"target", std::string(contrast_name(t.target))},
                        {"condition", condition_code(t)}};
}

}  // namespace ulfenc::tasking
