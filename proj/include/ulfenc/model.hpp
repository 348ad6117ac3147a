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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "ulfenc/volume.hpp"

namespace ulfenc::model {

struct GeneratorConfig {
  std::array<int64_t, 4> level_channels{16, 32, 48, 64};
  int blocks_per_level = 2;
  std::vector<int> attention_levels{2, 3};
  int attention_heads = 4;
  int attention_mlp_ratio = 4;  // 0 = attention without a feed-forward layer
  int cond_vocab = 9;
  int cond_embed_dim = 64;
  int groupnorm_groups = 8;
  int in_channels = 6;  // coordinate channels are appended internally
  int out_channels = 1;
  int spatial_dims = 3;  // 2 = slice-wise kernels (1 x k x k)

  /// 64 -> 128 -> 192 -> 256 channels.
  static GeneratorConfig full_scale();
  void validate() const;
};

struct DiscriminatorConfig {
  std::array<int64_t, 4> level_features{32, 64, 128, 256};
  int kernel = 4;
  int cond_vocab = 9;
  int cond_embed_dim = 8;
  int groupnorm_groups = 8;
  int in_channels = 6;  // network inputs; + 1 candidate + cond_embed_dim
  double leaky_slope = 0.2;
  int spatial_dims = 3;

  void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base = {});
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j, DiscriminatorConfig base = {});

/// [3, D, H, W]; channel k holds the axis-k coordinate scaled to [-1, 1]
/// (0 along axes of length 1).
torch::Tensor coordinate_grid(int64_t d, int64_t h, int64_t w,
                              const torch::TensorOptions& options = torch::kFloat32);

/// out[:, c] = gamma[:, c] * in[:, c] + beta[:, c]; gamma/beta are [B, C].
torch::Tensor film_modulate(const torch::Tensor& features, const torch::Tensor& gamma,
                            const torch::Tensor& beta);

/// Per-site affine head mapping the condition features to (gamma, beta).
/// Zero-initialized with gamma = 1 + head output, so it starts as identity.
class FiLMImpl : public torch::nn::Module {
 public:
  FiLMImpl(int64_t cond_dim, int64_t channels);
  std::pair<torch::Tensor, torch::Tensor> params(const torch::Tensor& cond);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond);
  [[nodiscard]] int64_t channels() const { return channels_; }

 private:
  int64_t channels_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(FiLM);

/// GN -> SiLU -> conv -> GN -> FiLM -> SiLU -> conv, plus a (1x1) residual path.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t in, int64_t out, int64_t cond_dim, int groups, int spatial_dims);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond);

 private:
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv3d conv1_{nullptr}, conv2_{nullptr};
  FiLM film_{nullptr};
  torch::nn::Conv3d skip_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Pre-normalized residual multi-head self-attention over per-voxel tokens,
/// optionally followed by a pre-normalized residual 1x1 feed-forward layer.
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int64_t channels, int heads, int groups, int mlp_ratio, int spatial_dims);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int heads_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Conv3d qkv_{nullptr}, proj_{nullptr};
  torch::nn::Sequential mlp_{nullptr};
};
TORCH_MODULE(Attention);

/// Contrast-conditioned multi-contrast U-Net. Every encoder stage output is a
/// FiLM-modulated skip; each decoder level runs blocks_per_level + 1 blocks,
/// one per skip, with a res-attention-res bottleneck in between.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorConfig cfg);

  /// input [B, in_channels, D, H, W], condition [B] (int64) -> [B, out_channels, D, H, W] in (0, 1).
  torch::Tensor forward(const torch::Tensor& input, const torch::Tensor& condition);

  /// Throws ShapeError unless the spatial extent is valid for this network.
  void check_input_shape(const torch::Tensor& input) const;
  [[nodiscard]] const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  torch::nn::Embedding embed_{nullptr};
  torch::nn::Sequential cond_mlp_{nullptr};
  torch::nn::Conv3d conv_in_{nullptr};
  torch::nn::ModuleList enc_blocks_{nullptr}, enc_attn_{nullptr}, downs_{nullptr};
  torch::nn::ModuleList mid_{nullptr};
  torch::nn::ModuleList skip_films_{nullptr};
  torch::nn::ModuleList dec_blocks_{nullptr}, dec_attn_{nullptr}, ups_{nullptr};
  torch::nn::GroupNorm norm_out_{nullptr};
  torch::nn::Conv3d conv_out_{nullptr};
  std::vector<bool> attention_at_;
};
TORCH_MODULE(Generator);

/// Conditional PatchGAN: the condition embedding is broadcast over space and
/// concatenated with the inputs and the candidate before the first level.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorConfig cfg);

  /// candidate [B,1,D,H,W], inputs [B,6,D,H,W], condition [B] -> logits [B,1,D/16,H/16,W/16].
  torch::Tensor forward(const torch::Tensor& candidate, const torch::Tensor& inputs,
                        const torch::Tensor& condition);

  void check_input_shape(const torch::Tensor& candidate) const;
  [[nodiscard]] const DiscriminatorConfig& config() const { return cfg_; }
  torch::nn::Embedding& embedding() { return embed_; }

 private:
  DiscriminatorConfig cfg_;
  torch::nn::Embedding embed_{nullptr};
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::ModuleList norms_{nullptr};
  torch::nn::Conv3d head_{nullptr};
};
TORCH_MODULE(Discriminator);

int64_t parameter_count(const torch::nn::Module& m);

/// FNV-1a over parameter names and raw bytes, in registration order.
uint64_t weight_hash(const torch::nn::Module& m);

}  // namespace ulfenc::model
