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

#include <functional>

#include <json.hpp>
#include <torch/torch.h>

#include "ulfenc/volume.hpp"

namespace ulfenc::objective {

struct LossWeights {
  double w_l1 = 0.2;
  double w_ssim = 0.8;
  double w_adv = 0.2;
  double r1_gamma = 10.0;
  int r1_every = 2;  // discriminator steps

  void validate() const;
};

/// Scalars logged per optimization step.
struct LossBreakdown {
  double l1 = 0.0;
  double ssim_loss = 0.0;
  double adv_g = 0.0;
  double total_g = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
  double r1 = 0.0;
  double total_d = 0.0;
};

nlohmann::json to_json(const LossBreakdown& b);

struct ReconTerms {
  torch::Tensor total;
  torch::Tensor l1;
  torch::Tensor ssim_loss;  // 1 - SSIM
};

struct SsimConstants {
  double c1 = 1e-4;
  double c2 = 9e-4;
};

/// Differentiable mean SSIM of [N, 1, D, H, W] tensors over fully-interior
/// uniform windows. With a defined `mask`, only windows whose center voxel is
/// inside the mask count.
torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& mask = {},
                   const Shape3& window = {11, 11, 11}, const SsimConstants& k = {});

/// w_l1 * MAE + w_ssim * (1 - SSIM). An undefined mask means the whole volume.
ReconTerms recon_loss(const torch::Tensor& pred, const torch::Tensor& target,
                      const torch::Tensor& mask, const LossWeights& w,
                      const Shape3& window = {11, 11, 11});

/// mean(max(0, 1 - real)) + mean(max(0, 1 + fake)).
torch::Tensor hinge_d(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

/// -mean(fake).
torch::Tensor hinge_g(const torch::Tensor& fake_logits);

/// (gamma / 2) * batch mean of ||d(sum D) / d candidate||^2, differentiable
/// with respect to the discriminator's parameters.
torch::Tensor r1_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& discriminator,
                         const torch::Tensor& real_candidate, double gamma);

}  // namespace ulfenc::objective
