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

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "helpers.hpp"
#include "ulfenc/metrics.hpp"
#include "ulfenc/objective.hpp"

namespace ulfenc {
namespace {

using objective::LossWeights;

torch::Tensor as_tensor(const Volume3D& v) {
  const auto& s = v.shape();
  return torch::from_blob(const_cast<float*>(v.data().data()), {1, 1, s.d, s.h, s.w}, torch::kFloat32)
      .clone()
      .to(torch::kDouble);
}

TEST(Recon, IdenticalVolumesGiveZero) {
  const auto x = torch::rand({2, 1, 12, 12, 12}, torch::kDouble);
  const auto t = objective::recon_loss(x, x, {}, LossWeights{});
  EXPECT_NEAR(t.total.item<double>(), 0.0, 1e-12);
  EXPECT_NEAR(t.l1.item<double>(), 0.0, 1e-12);
  EXPECT_NEAR(t.ssim_loss.item<double>(), 0.0, 1e-12);
}

TEST(Recon, ZeroVersusOneClosedForm) {
  const auto zero = torch::zeros({1, 1, 11, 11, 11}, torch::kDouble);
  const auto one = torch::ones({1, 1, 11, 11, 11}, torch::kDouble);
  const LossWeights w;
  const double c1 = 1e-4;
  // Constant windows: means 0 and 1, zero variances and covariance.
  const double ssim = c1 / (1.0 + c1);
  const double expect = w.w_l1 * 1.0 + w.w_ssim * (1.0 - ssim);
  const auto t = objective::recon_loss(zero, one, {}, w);
  EXPECT_NEAR(t.total.item<double>(), expect, 1e-12);
  EXPECT_NEAR(t.total.item<double>(), 0.99992, 1e-6);
}

TEST(Recon, TotalIsWeightedSumOfParts) {
  const auto x = torch::rand({1, 1, 16, 16, 16}, torch::kDouble);
  const auto y = torch::rand({1, 1, 16, 16, 16}, torch::kDouble);
  LossWeights w;
  w.w_l1 = 0.37;
  w.w_ssim = 1.9;
  const auto t = objective::recon_loss(x, y, {}, w);
  EXPECT_DOUBLE_EQ(t.total.item<double>(),
                   (w.w_l1 * t.l1 + w.w_ssim * t.ssim_loss).item<double>());
}

TEST(Recon, MaskRestrictsL1) {
  auto x = torch::zeros({1, 1, 12, 12, 12}, torch::kDouble);
  auto y = torch::zeros({1, 1, 12, 12, 12}, torch::kDouble);
  auto mask = torch::zeros({1, 1, 12, 12, 12}, torch::kDouble);
  mask.index_put_({0, 0, torch::indexing::Slice(0, 6)}, 1.0);
  y.index_put_({0, 0, torch::indexing::Slice(6, 12)}, 1.0);
  EXPECT_NEAR(objective::recon_loss(x, y, mask, LossWeights{}).l1.item<double>(), 0.0, 1e-12);
  EXPECT_NEAR(objective::recon_loss(x, y, {}, LossWeights{}).l1.item<double>(), 0.5, 1e-12);
}

TEST(Ssim, SymmetricAndBounded) {
  torch::manual_seed(0);
  for (int i = 0; i < 5; ++i) {
    const auto x = torch::rand({1, 1, 14, 13, 12}, torch::kDouble);
    const auto y = torch::rand({1, 1, 14, 13, 12}, torch::kDouble);
    const double a = objective::ssim(x, y).item<double>();
    EXPECT_NEAR(a, objective::ssim(y, x).item<double>(), 1e-12);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(a, -1.0);
  }
}

TEST(Ssim, MatchesEvaluationImplementation) {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const Volume3D x = testing::random_volume({15, 14, 13}, seed);
    Volume3D y = x;
    const Volume3D noise = testing::random_volume({15, 14, 13}, seed + 100, -0.2f, 0.2f);
    for (int64_t i = 0; i < y.size(); ++i) y[i] += noise[i];
    Volume3D mask({15, 14, 13}, 0.0f);
    for (int64_t z = 3; z < 12; ++z)
      for (int64_t r = 2; r < 12; ++r)
        for (int64_t c = 5; c < 13; ++c) mask.at(z, r, c) = 1.0f;
    const double expect = metrics::ssim3d(x, y);
    EXPECT_NEAR(objective::ssim(as_tensor(x), as_tensor(y)).item<double>(), expect, 1e-9);
    const double masked = metrics::ssim3d(x, y, &mask);
    EXPECT_NEAR(objective::ssim(as_tensor(x), as_tensor(y), as_tensor(mask)).item<double>(), masked, 1e-9);
  }
}

TEST(Recon, GradientMatchesFiniteDifferences) {
  torch::manual_seed(7);
  const auto target = torch::rand({1, 1, 12, 12, 12}, torch::kDouble);
  auto pred = torch::rand({1, 1, 12, 12, 12}, torch::kDouble).requires_grad_(true);
  const LossWeights w;
  objective::recon_loss(pred, target, {}, w).total.backward();
  const auto grad = pred.grad().view(-1);
  auto flat = pred.detach().clone().view(-1);
  const double eps = 1e-6;
  for (int64_t i : {0, 17, 200, 431, 777, 901, 1000, 1234, 1500, 1727}) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = objective::recon_loss(flat.view({1, 1, 12, 12, 12}), target, {}, w).total.item<double>();
    flat[i] = orig - eps;
    const double down = objective::recon_loss(flat.view({1, 1, 12, 12, 12}), target, {}, w).total.item<double>();
    flat[i] = orig;
    EXPECT_NEAR(grad[i].item<double>(), (up - down) / (2 * eps), 1e-6) << "voxel " << i;
  }
}

TEST(Hinge, Examples) {
  const auto real = torch::tensor({2.0, 0.5, -1.0});
  const auto fake = torch::tensor({-2.0, 0.0, 1.0});
  // real: (0 + 0.5 + 2) / 3; fake: (0 + 1 + 2) / 3
  EXPECT_NEAR(objective::hinge_d(real, fake).item<double>(), 2.5 / 3 + 1.0, 1e-6);
  EXPECT_NEAR(objective::hinge_g(fake).item<double>(), 1.0 / 3, 1e-6);
  EXPECT_NEAR(objective::hinge_d(torch::ones({4}), -torch::ones({4})).item<double>(), 0.0, 1e-12);
}

TEST(Hinge, DiscriminatorLossNonNegative) {
  torch::manual_seed(1);
  for (int i = 0; i < 20; ++i) {
    const auto r = torch::randn({8}) * 3;
    const auto f = torch::randn({8}) * 3;
    EXPECT_GE(objective::hinge_d(r, f).item<double>(), 0.0);
  }
}

TEST(R1, ConstantDiscriminatorIsZero) {
  const auto x = torch::rand({2, 1, 4, 4, 4});
  auto d = [](const torch::Tensor& c) { return torch::zeros({c.size(0), 1}) + 3.0; };
  EXPECT_EQ(objective::r1_penalty(d, x, 10.0).item<double>(), 0.0);
}

TEST(R1, LinearDiscriminatorClosedForm) {
  auto w = torch::rand({1, 1, 4, 4, 4}, torch::kDouble);
  w = (w / w.norm()).requires_grad_(true);
  const auto x = torch::rand({3, 1, 4, 4, 4}, torch::kDouble);
  auto d = [&](const torch::Tensor& c) { return (c * w).flatten(1).sum(1); };
  const auto r1 = objective::r1_penalty(d, x, 10.0);
  EXPECT_NEAR(r1.item<double>(), 5.0, 1e-12);
  // Differentiable in the discriminator's parameters: d/dw (gamma/2)||w||^2 = gamma * w.
  r1.backward();
  EXPECT_TRUE(torch::allclose(w.grad(), 10.0 * w.detach(), 1e-9, 1e-12));
}

TEST(R1, BiasDoesNotChangePenalty) {
  auto w = torch::randn({1, 1, 4, 4, 4}, torch::kDouble);
  const auto x = torch::rand({2, 1, 4, 4, 4}, torch::kDouble);
  auto d = [&](const torch::Tensor& c) { return (c * w).flatten(1).sum(1); };
  auto d_bias = [&](const torch::Tensor& c) { return (c * w).flatten(1).sum(1) + 42.0; };
  EXPECT_NEAR(objective::r1_penalty(d, x, 4.0).item<double>(), objective::r1_penalty(d_bias, x, 4.0).item<double>(),
              1e-12);
}

TEST(LossWeightsValidate, RejectsBadValues) {
  LossWeights w;
  w.w_l1 = -1;
  EXPECT_THROW(w.validate(), Error);
  w = LossWeights{};
  w.r1_every = 0;
  EXPECT_THROW(w.validate(), Error);
}

}  // namespace
}  // namespace ulfenc
