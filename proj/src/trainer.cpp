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

#include "ulfenc/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numbers>

#include "ulfenc/log.hpp"
#include "ulfenc/rng.hpp"

namespace ulfenc::trainer {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using nlohmann::json;
using tasking::AssembledExample;
using tasking::TaskKind;
using tasking::TaskSpec;

namespace {

constexpr int kCheckpointFormat = 1;

// Seed streams hanging off the run seed.
enum Stream : uint64_t { kInitG = 1, kInitD = 2, kStep = 3 };
enum ItemStream : uint64_t { kSubject = 1, kTask = 2, kAssemble = 3, kCrop = 4 };

json to_json(const objective::LossWeights& w) {
  return {{"w_l1", w.w_l1}, {"w_ssim", w.w_ssim}, {"w_adv", w.w_adv},
          {"r1_gamma", w.r1_gamma}, {"r1_every", w.r1_every}};
}

objective::LossWeights weights_from_json(const json& j, objective::LossWeights w) {
  w.w_l1 = j.value("w_l1", w.w_l1);
  w.w_ssim = j.value("w_ssim", w.w_ssim);
  w.w_adv = j.value("w_adv", w.w_adv);
  w.r1_gamma = j.value("r1_gamma", w.r1_gamma);
  w.r1_every = j.value("r1_every", w.r1_every);
  return w;
}

json shape_json(const Shape3& s) { return json::array({s.d, s.h, s.w}); }

Shape3 shape_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected a [D, H, W] array");
  return {j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
}

torch::Tensor to_tensor(const Volume3D& v) {
  const Shape3& s = v.shape();
  return torch::from_blob(const_cast<float*>(v.voxels().data()), {s.d, s.h, s.w}, torch::kFloat32).clone();
}

Volume3D to_volume(const torch::Tensor& t, const std::array<double, 3>& spacing) {
  const auto c = t.to(torch::kFloat32).contiguous();
  const Shape3 s{c.size(0), c.size(1), c.size(2)};
  const float* p = c.data_ptr<float>();
  return Volume3D(s, std::vector<float>(p, p + s.size()), spacing);
}

Volume3D crop(const Volume3D& v, const Shape3& origin, const Shape3& size) {
  if (v.shape() == size) return v;
  Volume3D out(size, 0.0f, v.spacing_mm());
  for (int64_t z = 0; z < size.d; ++z) {
    for (int64_t y = 0; y < size.h; ++y) {
      for (int64_t x = 0; x < size.w; ++x) out.at(z, y, x) = v.at(origin.d + z, origin.h + y, origin.w + x);
    }
  }
  return out;
}

PairedSample crop_sample(const PairedSample& s, const Shape3& size, uint64_t seed) {
  const Shape3 full = s.shape();
  if (full == size) return s;
  Rng rng(seed);
  const Shape3 origin{rng.index(full.d - size.d + 1), rng.index(full.h - size.h + 1),
                      rng.index(full.w - size.w + 1)};
  PairedSample out;
  out.subject_id = s.subject_id;
  for (int c = 0; c < 3; ++c) {
    out.lf[c] = crop(s.lf[c], origin, size);
    out.hf[c] = crop(s.hf[c], origin, size);
  }
  out.mask = crop(s.mask, origin, size);
  return out;
}

// [B, C, D, H, W] <-> [B * D, C, 1, H, W] for slice-wise networks.
torch::Tensor to_slices(const torch::Tensor& x) {
  return x.permute({0, 2, 1, 3, 4}).reshape({x.size(0) * x.size(2), x.size(1), 1, x.size(3), x.size(4)});
}

torch::Tensor from_slices(const torch::Tensor& y, int64_t batch) {
  const int64_t d = y.size(0) / batch;
  return y.reshape({batch, d, y.size(1), y.size(3), y.size(4)}).permute({0, 2, 1, 3, 4}).contiguous();
}

torch::Tensor run_generator(model::Generator& g, const torch::Tensor& input, const torch::Tensor& cond) {
  if (g->config().spatial_dims == 3) return g->forward(input, cond);
  return from_slices(g->forward(to_slices(input), cond.repeat_interleave(input.size(2))), input.size(0));
}

torch::Tensor run_discriminator(model::Discriminator& d, const torch::Tensor& candidate, const torch::Tensor& inputs,
                                const torch::Tensor& cond) {
  if (d->config().spatial_dims == 3) return d->forward(candidate, inputs, cond);
  return d->forward(to_slices(candidate), to_slices(inputs), cond.repeat_interleave(candidate.size(2)));
}

struct Batch {
  torch::Tensor input;   // [B, 6, D, H, W]
  torch::Tensor target;  // [B, 1, D, H, W]
  torch::Tensor mask;    // [B, 1, D, H, W]
  torch::Tensor cond;    // [B]
  std::vector<TaskSpec> tasks;
  std::vector<std::string> subjects;
  std::vector<uint64_t> seeds;
};

Batch make_batch(const std::vector<PairedSample>& pool, const TrainConfig& cfg, int64_t global_step, int workers) {
  const int b = cfg.batch_size;
  std::vector<AssembledExample> examples(static_cast<size_t>(b));
  Batch batch;
  batch.seeds.resize(static_cast<size_t>(b));
  batch.subjects.resize(static_cast<size_t>(b));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(b));

  // Every item draws from its own seed, so the batch is independent of the worker count.
#pragma omp parallel for num_threads(workers) schedule(static)
  for (int i = 0; i < b; ++i) {
    try {
      const uint64_t seed = derive_seed(cfg.seed, {kStep, static_cast<uint64_t>(global_step), static_cast<uint64_t>(i)});
      Rng pick(derive_seed(seed, {kSubject}));
      const auto& sample = pool[static_cast<size_t>(pick.index(static_cast<int64_t>(pool.size())))];
      const TaskSpec task = tasking::sample_task(cfg.task_mix, derive_seed(seed, {kTask}));
      const PairedSample patch = crop_sample(sample, cfg.patch_size, derive_seed(seed, {kCrop}));
      examples[i] = tasking::assemble(patch, task, cfg.aug, derive_seed(seed, {kAssemble}));
      batch.seeds[i] = seed;
      batch.subjects[i] = sample.subject_id;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<torch::Tensor> inputs, targets, masks;
  std::vector<int64_t> conds;
  for (const auto& ex : examples) {
    std::vector<torch::Tensor> ch;
    for (const auto& v : ex.input) ch.push_back(to_tensor(v));
    inputs.push_back(torch::stack(ch));
    targets.push_back(to_tensor(ex.target).unsqueeze(0));
    masks.push_back(to_tensor(ex.loss_mask).unsqueeze(0));
    conds.push_back(ex.condition);
    batch.tasks.push_back(ex.task);
  }
  batch.input = torch::stack(inputs);
  batch.target = torch::stack(targets);
  batch.mask = torch::stack(masks);
  batch.cond = torch::tensor(conds, torch::kLong);
  return batch;
}

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.requires_grad_(on);
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03d.pt", epoch);
  return buf;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck, torch::optim::AdamW& opt_g,
                     torch::optim::AdamW* opt_d) {
  torch::serialize::OutputArchive root;
  root.write("format_version", c10::IValue(static_cast<int64_t>(ck.format_version)));
  root.write("version", c10::IValue(ck.version));
  root.write("train_config", c10::IValue(to_json(ck.config).dump()));
  root.write("generator_config", c10::IValue(model::to_json(ck.generator->config()).dump()));
  root.write("epoch", c10::IValue(static_cast<int64_t>(ck.epoch)));
  root.write("global_step", c10::IValue(ck.global_step));
  root.write("d_steps", c10::IValue(ck.d_steps));

  torch::serialize::OutputArchive g, og;
  ck.generator->save(g);
  opt_g.save(og);
  root.write("generator", g);
  root.write("optimizer_g", og);
  if (ck.discriminator) {
    torch::serialize::OutputArchive d, od;
    ck.discriminator->save(d);
    opt_d->save(od);
    root.write("discriminator_config", c10::IValue(model::to_json(ck.discriminator->config()).dump()));
    root.write("discriminator", d);
    root.write("optimizer_d", od);
  }
  // Written next to the target and renamed, so a crash never leaves a torn file.
  const fs::path tmp = path.string() + ".tmp";
  root.save_to(tmp.string());
  fs::rename(tmp, path);
}

struct Restored {
  Checkpoint meta;
  bool has_discriminator = false;
};

// Reads everything but the networks' weights into `meta`; weights and
// optimizer states go into the given objects when present.
Restored read_checkpoint(const fs::path& path, model::Generator* g, model::Discriminator* d,
                         torch::optim::AdamW* opt_g, torch::optim::AdamW* opt_d) {
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path.string());
  torch::serialize::InputArchive root;
  try {
    root.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  auto read_int = [&](const char* key) {
    c10::IValue v;
    root.read(key, v);
    return v.toInt();
  };
  auto read_string = [&](const char* key) {
    c10::IValue v;
    root.read(key, v);
    return v.toStringRef();
  };

  Restored r;
  r.meta.format_version = static_cast<int>(read_int("format_version"));
  if (r.meta.format_version != kCheckpointFormat) {
    throw Error("unsupported checkpoint format " + std::to_string(r.meta.format_version));
  }
  r.meta.version = read_string("version");
  r.meta.config = config_from_json(json::parse(read_string("train_config")));
  r.meta.epoch = static_cast<int>(read_int("epoch"));
  r.meta.global_step = read_int("global_step");
  r.meta.d_steps = read_int("d_steps");
  c10::IValue probe;
  r.has_discriminator = root.try_read("discriminator_config", probe);

  if (g) {
    torch::serialize::InputArchive a;
    root.read("generator", a);
    (*g)->load(a);
    if (opt_g) {
      torch::serialize::InputArchive o;
      root.read("optimizer_g", o);
      opt_g->load(o);
    }
  }
  if (d && *d && r.has_discriminator) {
    torch::serialize::InputArchive a;
    root.read("discriminator", a);
    (*d)->load(a);
    if (opt_d) {
      torch::serialize::InputArchive o;
      root.read("optimizer_d", o);
      opt_d->load(o);
    }
  }
  return r;
}

bool finite(const objective::LossBreakdown& b) {
  for (double v : {b.l1, b.ssim_loss, b.adv_g, b.total_g, b.d_real, b.d_fake, b.r1, b.total_d}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

json task_list(const Batch& batch) {
  json out = json::array();
  for (const auto& t : batch.tasks) out.push_back(tasking::to_json(t));
  return out;
}

[[noreturn]] void abort_non_finite(const fs::path& out_dir, const json& row, const Batch& batch) {
  json dump = row;
  dump["item_seeds"] = batch.seeds;
  dump["input_finite"] = torch::isfinite(batch.input).all().item<bool>();
  dump["target_finite"] = torch::isfinite(batch.target).all().item<bool>();
  const fs::path path = out_dir / "nan_dump.json";
  std::ofstream(path) << dump.dump(2) << '\n';
  throw TrainingError("non-finite loss at step " + std::to_string(row.value("step", int64_t{0})) +
                      "; diagnostics in " + path.string());
}

void rewrite_log_prefix(const fs::path& path, int64_t keep_steps) {
  if (!fs::exists(path)) return;
  std::vector<std::string> kept;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (json::parse(line).value("step", int64_t{0}) <= keep_steps) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

void prune_checkpoints(const fs::path& dir, int current_epoch, int keep) {
  if (keep <= 0) return;
  for (int e = current_epoch - keep; e >= 1; --e) {
    const fs::path p = dir / checkpoint_name(e);
    if (!fs::exists(p)) break;
    fs::remove(p);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("epochs must be at least 1");
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (!(lr_g > 0.0 && lr_d > 0.0 && lr_min >= 0.0 && lr_min <= std::min(lr_g, lr_d))) {
    throw Error("learning rates must satisfy 0 <= lr_min <= lr_g, lr_d and lr_g, lr_d > 0");
  }
  if (weight_decay < 0.0) throw Error("weight_decay must be non-negative");
  for (int64_t v : {patch_size.d, patch_size.h, patch_size.w}) {
    if (v < 16 || v % 16 != 0) throw Error("patch dims must be positive multiples of 16");
  }
  if (keep_checkpoints < 0) throw Error("keep_checkpoints must be non-negative");
  if (generator.spatial_dims != discriminator.spatial_dims) {
    throw Error("generator and discriminator must agree on spatial_dims");
  }
  if (generator.in_channels != tasking::kNumInputChannels ||
      discriminator.in_channels != tasking::kNumInputChannels || generator.out_channels != 1) {
    throw Error("networks must take 6 input channels and emit 1");
  }
  loss.validate();
  aug.validate();
  task_mix.validate();
  generator.validate();
  discriminator.validate();
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"lr_min", c.lr_min},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"patch_size", shape_json(c.patch_size)},
          {"seed", c.seed},
          {"loss", to_json(c.loss)},
          {"mask_recon_loss", c.mask_recon_loss},
          {"aug", augment::to_json(c.aug)},
          {"task_mix", {{"translate", c.task_mix.translate},
                        {"synthesize", c.task_mix.synthesize},
                        {"restore", c.task_mix.restore}}},
          {"ablation_preset", c.ablation_preset},
          {"generator", model::to_json(c.generator)},
          {"discriminator", model::to_json(c.discriminator)},
          {"keep_checkpoints", c.keep_checkpoints}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw Error("train config must be a JSON object");
  static const std::vector<std::string> known{
      "epochs", "lr_g", "lr_d", "lr_min", "weight_decay", "batch_size", "patch_size", "seed",
      "loss", "mask_recon_loss", "aug", "task_mix", "ablation_preset", "generator", "discriminator",
      "keep_checkpoints"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw Error("unknown train config field '" + item.key() + "'");
    }
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("patch_size")) c.patch_size = shape_from_json(j["patch_size"]);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss")) c.loss = weights_from_json(j["loss"], c.loss);
    c.mask_recon_loss = j.value("mask_recon_loss", c.mask_recon_loss);
    if (j.contains("aug")) c.aug = augment::config_from_json(j["aug"], c.aug);
    if (j.contains("task_mix")) {
      const auto& m = j["task_mix"];
      c.task_mix.translate = m.value("translate", c.task_mix.translate);
      c.task_mix.synthesize = m.value("synthesize", c.task_mix.synthesize);
      c.task_mix.restore = m.value("restore", c.task_mix.restore);
    }
    c.ablation_preset = j.value("ablation_preset", c.ablation_preset);
    if (j.contains("generator")) c.generator = model::generator_config_from_json(j["generator"], c.generator);
    if (j.contains("discriminator")) {
      c.discriminator = model::discriminator_config_from_json(j["discriminator"], c.discriminator);
    }
    c.keep_checkpoints = j.value("keep_checkpoints", c.keep_checkpoints);
  } catch (const json::exception& e) {
    throw Error(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  return names;
}

TrainConfig apply_preset(TrainConfig cfg, std::string_view name) {
  const tasking::TaskMix translate_only{1.0, 0.0, 0.0};
  if (name == "none") {
  } else if (name == "a") {
    cfg.task_mix = translate_only;
    cfg.aug.p_intensity = 0.0;
    cfg.aug.p_degrade = 0.0;
    cfg.aug.p_geometric = 0.0;
  } else if (name == "b") {
    cfg.task_mix = translate_only;
    cfg.aug.p_intensity = 0.0;
    cfg.aug.p_degrade = 0.0;
    cfg.aug.nonrigid_max_disp_vox = 0.0;
  } else if (name == "c") {
    cfg.task_mix = translate_only;
  } else if (name == "d") {
    cfg.loss.w_adv = 0.0;
  } else if (name == "e") {
    cfg.generator.spatial_dims = 2;
    cfg.discriminator.spatial_dims = 2;
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ",") + n;
    throw Error("unknown preset '" + std::string(name) + "'; valid presets: {" + valid + "}");
  }
  cfg.ablation_preset = std::string(name);
  return cfg;
}

double cosine_lr(int64_t step, int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps <= 0 || step < 0 || step > total_steps) {
    throw Error("cosine_lr: need 0 <= step <= total_steps and total_steps > 0");
  }
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ULFENC_NUM_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
    log::warn("ignoring ULFENC_NUM_WORKERS='" + std::string(env) + "'");
  }
  return std::max(1, omp_get_num_procs());
}

TrainResult train(const volio::DatasetManifest& manifest, const TrainConfig& cfg, const TrainOptions& opt) {
  cfg.validate();
  const auto entries = manifest.split(volio::Split::kTrain);
  if (entries.empty()) throw TrainingError("manifest has no training subjects");
  if (opt.out_dir.empty()) throw Error("train: output directory required");

  std::vector<PairedSample> pool;
  for (const auto* e : entries) {
    pool.push_back(volio::load_sample(manifest, *e));
    const Shape3 s = pool.back().shape();
    if (s.d < cfg.patch_size.d || s.h < cfg.patch_size.h || s.w < cfg.patch_size.w) {
      throw TrainingError("subject " + e->subject_id + " (" + to_string(s) + ") is smaller than the patch " +
                          to_string(cfg.patch_size));
    }
  }

  const fs::path ck_dir = opt.out_dir / "checkpoints";
  fs::create_directories(ck_dir);
  const int workers = resolve_workers(opt.num_workers);
  const bool adversarial = cfg.loss.w_adv > 0.0;
  const bool use_d = adversarial || opt.force_discriminator;

  // Separate init streams keep the generator independent of the discriminator's existence.
  torch::manual_seed(derive_seed(cfg.seed, {kInitG}));
  model::Generator gen(cfg.generator);
  model::Discriminator disc{nullptr};
  if (use_d) {
    torch::manual_seed(derive_seed(cfg.seed, {kInitD}));
    disc = model::Discriminator(cfg.discriminator);
  }
  torch::optim::AdamW opt_g(gen->parameters(), torch::optim::AdamWOptions(cfg.lr_g).weight_decay(cfg.weight_decay));
  std::unique_ptr<torch::optim::AdamW> opt_d;
  if (use_d) {
    opt_d = std::make_unique<torch::optim::AdamW>(
        disc->parameters(), torch::optim::AdamWOptions(cfg.lr_d).weight_decay(cfg.weight_decay));
  }

  int start_epoch = 0;
  int64_t global_step = 0, d_steps = 0;
  const fs::path log_path = opt.out_dir / "train_log.jsonl";
  if (opt.resume) {
    const Restored r = read_checkpoint(*opt.resume, &gen, &disc, &opt_g, opt_d.get());
    json a = to_json(r.meta.config), b = to_json(cfg);
    a.erase("epochs");
    b.erase("epochs");
    if (a != b) throw TrainingError("resume: checkpoint config differs from the requested config");
    if (use_d && !r.has_discriminator) throw TrainingError("resume: checkpoint has no discriminator");
    start_epoch = r.meta.epoch;
    global_step = r.meta.global_step;
    d_steps = r.meta.d_steps;
    rewrite_log_prefix(log_path, global_step);
    log::info("resuming after epoch " + std::to_string(start_epoch));
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }
  std::ofstream(opt.out_dir / "config.json") << to_json(cfg).dump(2) << '\n';
  std::ofstream log_out(log_path, std::ios::app);

  const int64_t steps_per_epoch = (static_cast<int64_t>(pool.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;
  const auto& w = cfg.loss;

  TrainResult result;
  result.log = log_path;
  int epochs_run = 0;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    double sum_total_g = 0.0;
    for (int64_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
      const Batch batch = make_batch(pool, cfg, global_step, workers);
      const double lr_g = cosine_lr(global_step, total_steps, cfg.lr_g, cfg.lr_min);
      const double lr_d = cosine_lr(global_step, total_steps, cfg.lr_d, cfg.lr_min);
      set_lr(opt_g, lr_g);
      if (opt_d) set_lr(*opt_d, lr_d);

      objective::LossBreakdown lb;
      json row{{"epoch", epoch + 1}, {"step", global_step + 1}, {"lr_g", lr_g}, {"lr_d", use_d ? lr_d : 0.0},
               {"tasks", task_list(batch)}, {"subjects", batch.subjects}};

      // Generator update.
      const uint64_t d_before = opt.check_isolation && disc ? model::weight_hash(*disc) : 0;
      if (disc) set_requires_grad(*disc, false);
      const auto fake = run_generator(gen, batch.input, batch.cond);
      const auto recon = objective::recon_loss(fake, batch.target,
                                               cfg.mask_recon_loss ? batch.mask : torch::Tensor(), w);
      torch::Tensor total_g = recon.total;
      if (adversarial) {
        const auto adv = objective::hinge_g(run_discriminator(disc, fake, batch.input, batch.cond));
        total_g = total_g + w.w_adv * adv;
        lb.adv_g = adv.item<double>();
      }
      lb.l1 = recon.l1.item<double>();
      lb.ssim_loss = recon.ssim_loss.item<double>();
      lb.total_g = w.w_l1 * lb.l1 + w.w_ssim * lb.ssim_loss + w.w_adv * lb.adv_g;
      if (!finite(lb) || !std::isfinite(total_g.item<double>())) {
        row["losses"] = objective::to_json(lb);
        abort_non_finite(opt.out_dir, row, batch);
      }
      opt_g.zero_grad();
      total_g.backward();
      opt_g.step();
      if (disc) set_requires_grad(*disc, true);
      if (opt.check_isolation && disc && model::weight_hash(*disc) != d_before) {
        throw TrainingError("generator update modified the discriminator");
      }

      // Discriminator update.
      if (disc) {
        const uint64_t g_before = opt.check_isolation ? model::weight_hash(*gen) : 0;
        ++d_steps;
        const auto fake_d = fake.detach();
        const auto real_logits = run_discriminator(disc, batch.target, batch.input, batch.cond);
        const auto fake_logits = run_discriminator(disc, fake_d, batch.input, batch.cond);
        const auto d_real = torch::relu(1.0 - real_logits).mean();
        const auto d_fake = torch::relu(1.0 + fake_logits).mean();
        torch::Tensor total_d = objective::hinge_d(real_logits, fake_logits);
        if (d_steps % w.r1_every == 0) {
          const auto r1 = objective::r1_penalty(
              [&](const torch::Tensor& x) { return run_discriminator(disc, x, batch.input, batch.cond); },
              batch.target, w.r1_gamma);
          total_d = total_d + r1;
          lb.r1 = r1.item<double>();
        }
        lb.d_real = d_real.item<double>();
        lb.d_fake = d_fake.item<double>();
        lb.total_d = total_d.item<double>();
        row["d_step"] = d_steps;
        if (!finite(lb)) {
          row["losses"] = objective::to_json(lb);
          abort_non_finite(opt.out_dir, row, batch);
        }
        opt_d->zero_grad();
        total_d.backward();
        opt_d->step();
        if (opt.check_isolation && model::weight_hash(*gen) != g_before) {
          throw TrainingError("discriminator update modified the generator");
        }
      }

      row["losses"] = objective::to_json(lb);
      log_out << row.dump() << '\n';
      log_out.flush();
      sum_total_g += lb.total_g;
      log::debug("step " + std::to_string(global_step + 1) + " total_g " + std::to_string(lb.total_g));
    }

    Checkpoint ck;
    ck.version = ULFENC_VERSION;
    ck.config = cfg;
    ck.epoch = epoch + 1;
    ck.global_step = global_step;
    ck.d_steps = d_steps;
    ck.generator = gen;
    ck.discriminator = disc;
    result.checkpoint = ck_dir / checkpoint_name(epoch + 1);
    save_checkpoint(result.checkpoint, ck, opt_g, opt_d.get());
    prune_checkpoints(ck_dir, epoch + 1, cfg.keep_checkpoints);
    result.epoch_mean_total_g.push_back(sum_total_g / static_cast<double>(steps_per_epoch));
    log::info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " mean total_g " +
              std::to_string(result.epoch_mean_total_g.back()));
    ++epochs_run;
    if (opt.stop_after_epoch && epochs_run >= *opt.stop_after_epoch) break;
  }

  result.generator_hash = model::weight_hash(*gen);
  result.discriminator_hash = disc ? model::weight_hash(*disc) : 0;
  return result;
}

Checkpoint load_checkpoint(const fs::path& path) {
  Restored r = read_checkpoint(path, nullptr, nullptr, nullptr, nullptr);
  Checkpoint ck = std::move(r.meta);
  ck.generator = model::Generator(ck.config.generator);
  if (r.has_discriminator) ck.discriminator = model::Discriminator(ck.config.discriminator);
  read_checkpoint(path, &ck.generator, &ck.discriminator, nullptr, nullptr);
  return ck;
}

Volume3D predict(model::Generator& generator, const AssembledExample& ex) {
  const Shape3 s = ex.target.shape();
  const bool slices = generator->config().spatial_dims == 2;
  auto pad_to = [](int64_t n) { return std::max<int64_t>(8, (n + 7) / 8 * 8) - n; };
  const int64_t pd = slices ? 0 : pad_to(s.d), ph = pad_to(s.h), pw = pad_to(s.w);

  std::vector<torch::Tensor> ch;
  for (const auto& v : ex.input) {
    if (v.shape() != s) throw ShapeError("predict: input channels differ in shape");
    ch.push_back(to_tensor(v));
  }
  auto input = torch::stack(ch).unsqueeze(0);
  if (pd || ph || pw) input = F::pad(input, F::PadFuncOptions({0, pw, 0, ph, 0, pd}));
  const auto cond = torch::tensor({static_cast<int64_t>(ex.condition)}, torch::kLong);

  torch::NoGradGuard no_grad;
  auto out = run_generator(generator, input, cond);
  out = out.index({0, 0, torch::indexing::Slice(0, s.d), torch::indexing::Slice(0, s.h),
                   torch::indexing::Slice(0, s.w)})
            .clamp(0.0, 1.0);
  return to_volume(out, ex.target.spacing_mm());
}

metrics::MetricReport evaluate_with(const Predictor& predictor, const volio::DatasetManifest& manifest,
                                    volio::Split split, const std::optional<fs::path>& pred_out) {
  const auto entries = manifest.split(split);
  if (entries.empty()) throw Error("evaluate: no subjects in split '" + std::string(volio::to_string(split)) + "'");
  if (pred_out) fs::create_directories(*pred_out);

  metrics::MetricReport report;
  const auto none = augment::AugmentConfig::none();
  for (const auto* entry : entries) {
    const PairedSample sample = volio::load_sample(manifest, *entry);
    for (Contrast c : kContrasts) {
      const auto ex = tasking::assemble(sample, {TaskKind::kTranslate, c}, none, 0);
      const Volume3D pred = predictor(ex);
      if (pred.shape() != sample.shape()) throw ShapeError("evaluate: prediction shape differs from the data");
      if (pred_out) volio::write_volume(pred, *pred_out / (entry->subject_id + "_" + volio::hf_key(c) + ".vol.json"));
      report.entries.push_back(metrics::evaluate_pair(pred, sample.hf[contrast_index(c)], sample.mask,
                                                      entry->subject_id, std::string(contrast_name(c))));
    }
  }
  report.aggregate();
  return report;
}

metrics::MetricReport evaluate(const fs::path& checkpoint, const volio::DatasetManifest& manifest,
                               volio::Split split, const std::optional<fs::path>& pred_out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.generator->config().in_channels != tasking::kNumInputChannels) {
    throw ShapeError("evaluate: checkpoint generator does not take 6 input channels");
  }
  return evaluate_with([&](const AssembledExample& ex) { return predict(ck.generator, ex); }, manifest, split,
                       pred_out);
}

std::vector<json> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open log " + path.string());
  std::vector<json> rows;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

}  // namespace ulfenc::trainer
