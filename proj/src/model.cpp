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

#include "ulfenc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ulfenc::model {

namespace F = torch::nn::functional;
using nlohmann::json;

namespace {

torch::ExpandingArray<3> cube(int spatial_dims, int64_t k) {
  return torch::ExpandingArray<3>({spatial_dims == 3 ? k : 1, k, k});
}

torch::nn::Conv3d conv(int64_t in, int64_t out, int64_t k, int spatial_dims, int64_t stride = 1,
                       int64_t padding = -1) {
  if (padding < 0) padding = k / 2;
  return torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, cube(spatial_dims, k))
                               .stride(cube(spatial_dims, stride))
                               .padding(torch::ExpandingArray<3>(
                                   {spatial_dims == 3 ? padding : 0, padding, padding})));
}

torch::nn::GroupNorm group_norm(int groups, int64_t channels) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, channels));
}

void check_channels(const std::array<int64_t, 4>& ch, int groups, const char* what) {
  for (size_t i = 0; i < ch.size(); ++i) {
    if (ch[i] <= 0) throw Error(std::string(what) + ": channel counts must be positive");
    if (i > 0 && ch[i] <= ch[i - 1]) throw Error(std::string(what) + ": channels must strictly increase");
    if (groups <= 0 || ch[i] % groups != 0) {
      throw Error(std::string(what) + ": groupnorm_groups must divide every channel count");
    }
  }
}

}  // namespace

GeneratorConfig GeneratorConfig::full_scale() {
  GeneratorConfig c;
  c.level_channels = {64, 128, 192, 256};
  return c;
}

void GeneratorConfig::validate() const {
  check_channels(level_channels, groupnorm_groups, "generator");
  if (blocks_per_level < 1) throw Error("generator: blocks_per_level must be >= 1");
  for (int l : attention_levels) {
    if (l < 0 || l > 3) throw Error("generator: attention level outside [0, 3]");
    if (level_channels[l] % attention_heads != 0) {
      throw Error("generator: attention heads must divide the channel count");
    }
  }
  if (cond_vocab < 1 || cond_embed_dim < 1 || in_channels < 1 || out_channels < 1 || attention_mlp_ratio < 0) {
    throw Error("generator: sizes must be positive");
  }
  if (spatial_dims != 2 && spatial_dims != 3) throw Error("generator: spatial_dims must be 2 or 3");
}

void DiscriminatorConfig::validate() const {
  check_channels(level_features, groupnorm_groups, "discriminator");
  if (kernel != 4) throw Error("discriminator: kernel must be 4");
  if (cond_vocab < 1 || cond_embed_dim < 1 || in_channels < 1) {
    throw Error("discriminator: sizes must be positive");
  }
  if (spatial_dims != 2 && spatial_dims != 3) throw Error("discriminator: spatial_dims must be 2 or 3");
}

json to_json(const GeneratorConfig& c) {
  return {{"level_channels", c.level_channels}, {"blocks_per_level", c.blocks_per_level},
          {"attention_levels", c.attention_levels}, {"attention_heads", c.attention_heads},
          {"attention_mlp_ratio", c.attention_mlp_ratio},
          {"cond_vocab", c.cond_vocab}, {"cond_embed_dim", c.cond_embed_dim},
          {"groupnorm_groups", c.groupnorm_groups}, {"in_channels", c.in_channels},
          {"out_channels", c.out_channels}, {"spatial_dims", c.spatial_dims}};
}

json to_json(const DiscriminatorConfig& c) {
  return {{"level_features", c.level_features}, {"kernel", c.kernel},
          {"cond_vocab", c.cond_vocab}, {"cond_embed_dim", c.cond_embed_dim},
          {"groupnorm_groups", c.groupnorm_groups}, {"in_channels", c.in_channels},
          {"leaky_slope", c.leaky_slope}, {"spatial_dims", c.spatial_dims}};
}

GeneratorConfig generator_config_from_json(const json& j, GeneratorConfig c) {
  for (const auto& item : j.items()) {
    if (!to_json(c).contains(item.key())) throw Error("unknown generator config field '" + item.key() + "'");
  }
  c.level_channels = j.value("level_channels", c.level_channels);
  c.blocks_per_level = j.value("blocks_per_level", c.blocks_per_level);
  c.attention_levels = j.value("attention_levels", c.attention_levels);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.cond_vocab = j.value("cond_vocab", c.cond_vocab);
  c.cond_embed_dim = j.value("cond_embed_dim", c.cond_embed_dim);
  c.groupnorm_groups = j.value("groupnorm_groups", c.groupnorm_groups);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.spatial_dims = j.value("spatial_dims", c.spatial_dims);
  c.attention_mlp_ratio = j.value("attention_mlp_ratio", c.attention_mlp_ratio);
  c.validate();
  return c;
}

DiscriminatorConfig discriminator_config_from_json(const json& j, DiscriminatorConfig c) {
  for (const auto& item : j.items()) {
    if (!to_json(c).contains(item.key())) throw Error("unknown discriminator config field '" + item.key() + "'");
  }
  c.level_features = j.value("level_features", c.level_features);
  c.kernel = j.value("kernel", c.kernel);
  c.cond_vocab = j.value("cond_vocab", c.cond_vocab);
  c.cond_embed_dim = j.value("cond_embed_dim", c.cond_embed_dim);
  c.groupnorm_groups = j.value("groupnorm_groups", c.groupnorm_groups);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.spatial_dims = j.value("spatial_dims", c.spatial_dims);
  c.validate();
  return c;
}

torch::Tensor coordinate_grid(int64_t d, int64_t h, int64_t w, const torch::TensorOptions& options) {
  if (d <= 0 || h <= 0 || w <= 0) throw ShapeError("coordinate_grid: dimensions must be positive");
  auto axis = [&](int64_t n) {
    return n == 1 ? torch::zeros({1}, options) : torch::linspace(-1.0, 1.0, n, options);
  };
  const auto gz = axis(d).view({d, 1, 1}).expand({d, h, w});
  const auto gy = axis(h).view({1, h, 1}).expand({d, h, w});
  const auto gx = axis(w).view({1, 1, w}).expand({d, h, w});
  return torch::stack({gz, gy, gx}, 0);
}

torch::Tensor film_modulate(const torch::Tensor& features, const torch::Tensor& gamma,
                            const torch::Tensor& beta) {
  if (features.dim() < 2 || gamma.dim() != 2 || beta.sizes() != gamma.sizes() ||
      gamma.size(0) != features.size(0) || gamma.size(1) != features.size(1)) {
    throw ShapeError("film_modulate: gamma/beta must be [B, C] matching the features");
  }
  std::vector<int64_t> view{gamma.size(0), gamma.size(1)};
  view.resize(static_cast<size_t>(features.dim()), 1);
  return features * gamma.view(view) + beta.view(view);
}

FiLMImpl::FiLMImpl(int64_t cond_dim, int64_t channels) : channels_(channels) {
  head_ = register_module("head", torch::nn::Linear(cond_dim, 2 * channels));
  torch::NoGradGuard guard;
  head_->weight.zero_();
  head_->bias.zero_();
}

std::pair<torch::Tensor, torch::Tensor> FiLMImpl::params(const torch::Tensor& cond) {
  const auto out = head_->forward(cond);
  auto parts = out.chunk(2, 1);
  return {1.0 + parts[0], parts[1]};
}

torch::Tensor FiLMImpl::forward(const torch::Tensor& x, const torch::Tensor& cond) {
  auto [gamma, beta] = params(cond);
  return film_modulate(x, gamma, beta);
}

ResBlockImpl::ResBlockImpl(int64_t in, int64_t out, int64_t cond_dim, int groups, int spatial_dims) {
  norm1_ = register_module("norm1", group_norm(groups, in));
  conv1_ = register_module("conv1", conv(in, out, 3, spatial_dims));
  norm2_ = register_module("norm2", group_norm(groups, out));
  film_ = register_module("film", FiLM(cond_dim, out));
  conv2_ = register_module("conv2", conv(out, out, 3, spatial_dims));
  if (in != out) skip_ = register_module("skip", conv(in, out, 1, spatial_dims));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& cond) {
  auto h = conv1_->forward(F::silu(norm1_->forward(x)));
  h = film_->forward(norm2_->forward(h), cond);
  h = conv2_->forward(F::silu(h));
  return h + (skip_ ? skip_->forward(x) : x);
}

AttentionImpl::AttentionImpl(int64_t channels, int heads, int groups, int mlp_ratio, int spatial_dims)
    : heads_(heads) {
  norm_ = register_module("norm", group_norm(groups, channels));
  qkv_ = register_module("qkv", conv(channels, 3 * channels, 1, spatial_dims));
  proj_ = register_module("proj", conv(channels, channels, 1, spatial_dims));
  if (mlp_ratio > 0) {
    mlp_ = register_module("mlp", torch::nn::Sequential(group_norm(groups, channels),
                                                       conv(channels, mlp_ratio * channels, 1, spatial_dims),
                                                       torch::nn::SiLU(),
                                                       conv(mlp_ratio * channels, channels, 1, spatial_dims)));
  }
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0), c = x.size(1);
  const int64_t n = x.size(2) * x.size(3) * x.size(4);
  const int64_t hd = c / heads_;
  // [B, 3C, N] -> 3 x [B, heads, N, hd]
  auto qkv = qkv_->forward(norm_->forward(x)).reshape({b, 3, heads_, hd, n}).permute({1, 0, 2, 4, 3});
  const auto q = qkv[0], k = qkv[1], v = qkv[2];
  const auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)), -1);
  const auto out = torch::matmul(attn, v).permute({0, 1, 3, 2}).reshape(x.sizes());
  auto h = x + proj_->forward(out);
  return mlp_ ? h + mlp_->forward(h) : h;
}

GeneratorImpl::GeneratorImpl(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& ch = cfg_.level_channels;
  const int g = cfg_.groupnorm_groups;
  const int sd = cfg_.spatial_dims;
  const int64_t e = cfg_.cond_embed_dim;
  const int nb = cfg_.blocks_per_level;

  attention_at_.assign(4, false);
  for (int l : cfg_.attention_levels) attention_at_[l] = true;
  auto attention = [&](int64_t c) { return Attention(c, cfg_.attention_heads, g, cfg_.attention_mlp_ratio, sd); };

  embed_ = register_module("embed", torch::nn::Embedding(cfg_.cond_vocab, e));
  cond_mlp_ = register_module("cond_mlp", torch::nn::Sequential(torch::nn::Linear(e, e), torch::nn::SiLU(),
                                                                 torch::nn::Linear(e, e), torch::nn::SiLU()));
  conv_in_ = register_module("conv_in", conv(cfg_.in_channels + 3, ch[0], 3, sd));

  // Every encoder stage output is kept as a skip; skip_ch mirrors that stack.
  std::vector<int64_t> skip_ch{ch[0]};
  enc_blocks_ = register_module("encoder", torch::nn::ModuleList());
  enc_attn_ = register_module("encoder_attention", torch::nn::ModuleList());
  downs_ = register_module("down", torch::nn::ModuleList());
  int64_t c = ch[0];
  for (int l = 0; l < 4; ++l) {
    for (int b = 0; b < nb; ++b) {
      enc_blocks_->push_back(ResBlock(c, ch[l], e, g, sd));
      c = ch[l];
      if (attention_at_[l]) enc_attn_->push_back(attention(c));
      skip_ch.push_back(c);
    }
    if (l < 3) {
      downs_->push_back(conv(c, c, 3, sd, 2));
      skip_ch.push_back(c);
    }
  }

  mid_ = register_module("middle", torch::nn::ModuleList());
  mid_->push_back(ResBlock(c, c, e, g, sd));
  mid_->push_back(attention(c));
  mid_->push_back(ResBlock(c, c, e, g, sd));

  skip_films_ = register_module("skip_film", torch::nn::ModuleList());
  dec_blocks_ = register_module("decoder", torch::nn::ModuleList());
  dec_attn_ = register_module("decoder_attention", torch::nn::ModuleList());
  ups_ = register_module("up", torch::nn::ModuleList());
  for (int l = 3; l >= 0; --l) {
    for (int b = 0; b <= nb; ++b) {
      const int64_t s = skip_ch.back();
      skip_ch.pop_back();
      skip_films_->push_back(FiLM(e, s));
      dec_blocks_->push_back(ResBlock(c + s, ch[l], e, g, sd));
      c = ch[l];
      if (attention_at_[l]) dec_attn_->push_back(attention(c));
    }
    if (l > 0) ups_->push_back(conv(c, c, 3, sd));
  }
  norm_out_ = register_module("norm_out", group_norm(g, ch[0]));
  conv_out_ = register_module("conv_out", conv(ch[0], cfg_.out_channels, 3, sd));
}

void GeneratorImpl::check_input_shape(const torch::Tensor& input) const {
  if (input.dim() != 5 || input.size(1) != cfg_.in_channels) {
    throw ShapeError("generator expects [B, " + std::to_string(cfg_.in_channels) + ", D, H, W] input");
  }
  for (int a = 2; a < 5; ++a) {
    if (cfg_.spatial_dims == 2 && a == 2) continue;
    if (input.size(a) < 8 || input.size(a) % 8 != 0) {
      throw ShapeError("generator: spatial dims must be divisible by 8 and >= 8, got " +
                       std::to_string(input.size(a)));
    }
  }
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& input, const torch::Tensor& condition) {
  check_input_shape(input);
  const int64_t b = input.size(0);
  const int nb = cfg_.blocks_per_level;
  const auto cond = cond_mlp_->forward(embed_->forward(condition.to(torch::kLong)));
  const auto coords = coordinate_grid(input.size(2), input.size(3), input.size(4), input.options())
                          .unsqueeze(0)
                          .expand({b, 3, input.size(2), input.size(3), input.size(4)});
  auto h = conv_in_->forward(torch::cat({input, coords}, 1));

  std::vector<torch::Tensor> skips{h};
  size_t block = 0, attn = 0;
  for (int l = 0; l < 4; ++l) {
    for (int i = 0; i < nb; ++i) {
      h = enc_blocks_->ptr<ResBlockImpl>(block++)->forward(h, cond);
      if (attention_at_[l]) h = enc_attn_->ptr<AttentionImpl>(attn++)->forward(h);
      skips.push_back(h);
    }
    if (l < 3) {
      h = downs_->ptr<torch::nn::Conv3dImpl>(l)->forward(h);
      skips.push_back(h);
    }
  }

  h = mid_->ptr<ResBlockImpl>(0)->forward(h, cond);
  h = mid_->ptr<AttentionImpl>(1)->forward(h);
  h = mid_->ptr<ResBlockImpl>(2)->forward(h, cond);

  block = 0;
  attn = 0;
  for (int l = 3; l >= 0; --l) {
    for (int i = 0; i <= nb; ++i) {
      auto skip = skip_films_->ptr<FiLMImpl>(block)->forward(skips.back(), cond);
      skips.pop_back();
      h = dec_blocks_->ptr<ResBlockImpl>(block++)->forward(torch::cat({h, skip}, 1), cond);
      if (attention_at_[l]) h = dec_attn_->ptr<AttentionImpl>(attn++)->forward(h);
    }
    if (l > 0) {
      const auto& next = skips.back();
      h = F::interpolate(h, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{next.size(2), next.size(3), next.size(4)})
                                .mode(torch::kTrilinear)
                                .align_corners(false));
      h = ups_->ptr<torch::nn::Conv3dImpl>(static_cast<size_t>(3 - l))->forward(h);
    }
  }
  // Bounded output: SSIM rewards sign-inverted images when predictions may go negative.
  return torch::sigmoid(conv_out_->forward(F::silu(norm_out_->forward(h))));
}

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int sd = cfg_.spatial_dims;
  embed_ = register_module("embed", torch::nn::Embedding(cfg_.cond_vocab, cfg_.cond_embed_dim));
  convs_ = register_module("levels", torch::nn::ModuleList());
  norms_ = register_module("norms", torch::nn::ModuleList());
  int64_t in = cfg_.in_channels + 1 + cfg_.cond_embed_dim;
  for (int l = 0; l < 4; ++l) {
    const int64_t out = cfg_.level_features[l];
    convs_->push_back(conv(in, out, cfg_.kernel, sd, 2, 1));
    // The first level stays unnormalized, as in the usual PatchGAN layout.
    if (l > 0) norms_->push_back(group_norm(cfg_.groupnorm_groups, out));
    in = out;
  }
  head_ = register_module("head", conv(in, 1, 3, sd));
}

void DiscriminatorImpl::check_input_shape(const torch::Tensor& candidate) const {
  if (candidate.dim() != 5 || candidate.size(1) != 1) {
    throw ShapeError("discriminator expects a [B, 1, D, H, W] candidate");
  }
  for (int a = 2; a < 5; ++a) {
    if (cfg_.spatial_dims == 2 && a == 2) continue;
    if (candidate.size(a) < 16 || candidate.size(a) % 16 != 0) {
      throw ShapeError("discriminator: spatial dims must be divisible by 16, got " +
                       std::to_string(candidate.size(a)));
    }
  }
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& candidate, const torch::Tensor& inputs,
                                         const torch::Tensor& condition) {
  check_input_shape(candidate);
  if (inputs.dim() != 5 || inputs.size(1) != cfg_.in_channels ||
      inputs.sizes().slice(2) != candidate.sizes().slice(2) || inputs.size(0) != candidate.size(0)) {
    throw ShapeError("discriminator: inputs must be [B, " + std::to_string(cfg_.in_channels) +
                     ", D, H, W] matching the candidate");
  }
  const auto sizes = candidate.sizes();
  const auto e = embed_->forward(condition.to(torch::kLong))
                     .view({sizes[0], cfg_.cond_embed_dim, 1, 1, 1})
                     .expand({sizes[0], cfg_.cond_embed_dim, sizes[2], sizes[3], sizes[4]});
  auto h = torch::cat({inputs, candidate, e.to(candidate.dtype())}, 1);
  for (int l = 0; l < 4; ++l) {
    h = convs_->ptr<torch::nn::Conv3dImpl>(l)->forward(h);
    if (l > 0) h = norms_->ptr<torch::nn::GroupNormImpl>(l - 1)->forward(h);
    h = F::leaky_relu(h, F::LeakyReLUFuncOptions().negative_slope(cfg_.leaky_slope));
  }
  return head_->forward(h);
}

int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

uint64_t weight_hash(const torch::nn::Module& m) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& item : m.named_parameters()) {
    feed(item.key().data(), item.key().size());
    const auto t = item.value().detach().contiguous().cpu();
    feed(t.data_ptr(), static_cast<size_t>(t.numel()) * t.element_size());
  }
  return h;
}

}  // namespace ulfenc::model
