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

#include "ulfenc/objective.hpp"

namespace ulfenc::objective {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

void LossWeights::validate() const {
  if (!(w_l1 >= 0.0 && w_ssim >= 0.0 && w_adv >= 0.0 && r1_gamma >= 0.0)) {
    throw Error("loss weights must be non-negative");
  }
  if (r1_every < 1) throw Error("r1_every must be at least 1");
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"l1", b.l1},         {"ssim_loss", b.ssim_loss}, {"adv_g", b.adv_g},
          {"total_g", b.total_g}, {"d_real", b.d_real},     {"d_fake", b.d_fake},
          {"r1", b.r1},         {"total_d", b.total_d}};
}

torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& mask,
                   const Shape3& window, const SsimConstants& k) {
  if (x.sizes() != y.sizes() || x.dim() != 5) {
    throw ShapeError("ssim expects two [N,C,D,H,W] tensors of equal shape");
  }
  if (x.size(2) < window.d || x.size(3) < window.h || x.size(4) < window.w) {
    throw ShapeError("ssim: volume smaller than the window");
  }
  const auto pool = F::AvgPool3dFuncOptions({window.d, window.h, window.w}).stride(1);
  const auto mx = F::avg_pool3d(x, pool);
  const auto my = F::avg_pool3d(y, pool);
  const auto mxx = F::avg_pool3d(x * x, pool);
  const auto myy = F::avg_pool3d(y * y, pool);
  const auto mxy = F::avg_pool3d(x * y, pool);
  const auto var_x = mxx - mx * mx;
  const auto var_y = myy - my * my;
  const auto cov = mxy - mx * my;
  const auto map = ((2 * mx * my + k.c1) * (2 * cov + k.c2)) /
                   ((mx * mx + my * my + k.c1) * (var_x + var_y + k.c2));
  if (!mask.defined()) return map.mean();

  if (mask.sizes() != x.sizes()) throw ShapeError("ssim: mask shape differs from the volumes");
  const auto centers = mask.index({Slice(), Slice(),
                                   Slice(window.d / 2, window.d / 2 + map.size(2)),
                                   Slice(window.h / 2, window.h / 2 + map.size(3)),
                                   Slice(window.w / 2, window.w / 2 + map.size(4))})
                           .to(map.dtype());
  const auto count = centers.sum();
  if (count.item<double>() == 0.0) throw Error("ssim: no window centers inside the mask");
  return (map * centers).sum() / count;
}

ReconTerms recon_loss(const torch::Tensor& pred, const torch::Tensor& target, const torch::Tensor& mask,
                      const LossWeights& w, const Shape3& window) {
  if (pred.sizes() != target.sizes()) throw ShapeError("recon_loss: prediction and target differ in shape");
  ReconTerms t;
  const auto abs_err = (pred - target).abs();
  if (mask.defined()) {
    const auto m = mask.to(pred.dtype());
    t.l1 = (abs_err * m).sum() / m.sum();
  } else {
    t.l1 = abs_err.mean();
  }
  t.ssim_loss = 1.0 - ssim(pred, target, mask, window);
  t.total = t.l1 * w.w_l1 + t.ssim_loss * w.w_ssim;
  return t;
}

torch::Tensor hinge_d(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  if (real_logits.sizes() != fake_logits.sizes()) throw ShapeError("hinge_d: logit grids differ in shape");
  return torch::relu(1.0 - real_logits).mean() + torch::relu(1.0 + fake_logits).mean();
}

torch::Tensor hinge_g(const torch::Tensor& fake_logits) { return -fake_logits.mean(); }

torch::Tensor r1_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& discriminator,
                         const torch::Tensor& real_candidate, double gamma) {
  auto x = real_candidate.detach().clone().requires_grad_(true);
  const auto out = discriminator(x);
  const auto zero = torch::zeros({}, real_candidate.options());
  if (!out.requires_grad()) return zero;
  auto grads = torch::autograd::grad({out.sum()}, {x}, /*grad_outputs=*/{}, /*retain_graph=*/true,
                                     /*create_graph=*/true, /*allow_unused=*/true);
  if (!grads[0].defined()) return zero;
  const auto sq_norm = grads[0].pow(2).flatten(1).sum(1);
  return 0.5 * gamma * sq_norm.mean();
}

}  // namespace ulfenc::objective
