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

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "ulfenc/augment.hpp"
#include "ulfenc/volume.hpp"

namespace ulfenc::tasking {

enum class TaskKind : int { kTranslate = 0, kSynthesize = 1, kRestore = 2 };

std::string_view task_name(TaskKind k);
TaskKind parse_task(std::string_view name);

struct TaskSpec {
  TaskKind kind = TaskKind::kTranslate;
  Contrast target = Contrast::T1w;
  bool operator==(const TaskSpec&) const = default;
};

inline constexpr int kNumConditions = 9;
inline constexpr int kNumInputChannels = 6;

/// kind * 3 + contrast, in [0, 8].
constexpr int condition_code(const TaskSpec& t) {
  return static_cast<int>(t.kind) * 3 + contrast_index(t.target);
}
TaskSpec decode_condition(int code);

/// Probabilities of (translate, synthesize, restore).
struct TaskMix {
  double translate = 0.5;
  double synthesize = 0.25;
  double restore = 0.25;

  void validate() const;
};

/// Kind drawn from `mix`, target contrast uniform over the three contrasts.
TaskSpec sample_task(const TaskMix& mix, uint64_t rng_seed);

/// Network input and supervision for one training or evaluation example.
/// Channels 0-2 hold low-field T1w/T2w/FLAIR, channels 3-5 high-field.
struct AssembledExample {
  std::array<Volume3D, kNumInputChannels> input;
  Volume3D target;
  Volume3D loss_mask;
  int condition = 0;
  TaskSpec task;
  augment::AugmentPlan plan;
};

/// Builds one example. The geometric transform is applied to the input
/// sources, the target and the mask alike; intensity remapping and
/// degradation touch input channels only; channel zeroing is applied last.
/// The restore task always degrades its inputs and skips intensity
/// remapping, so it stays a pure denoising/deblurring problem.
AssembledExample assemble(const PairedSample& sample, const TaskSpec& task,
                          const augment::AugmentConfig& aug, uint64_t rng_seed);

/// Throws if the channel-zeroing rules for the example's task are violated.
void check_zeroing(const AssembledExample& ex);

nlohmann::json to_json(const TaskSpec& t);

}  // namespace ulfenc::tasking
