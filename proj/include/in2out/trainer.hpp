#pragma once

// The adversarial fine-tuning loop: per iteration, one discriminator update
// on the design's objective against a detached fake, then one generator
// update on reconstruction + adversarial (+ flow hook) through the freshly
// updated, frozen discriminator.
//
// Reproducibility contract: fixed seed + single context => bitwise-identical
// logs and checkpoints. Everything that feeds randomness is serialized: the
// loop RNG state rides in the checkpoint, per-iteration RNG consumption order
// is fixed (ratio, then clip index and frame sample per batch item), and JSON
// output goes through sorted-key dumps with shortest-roundtrip doubles.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "in2out/designs.hpp"
#include "in2out/generator.hpp"
#include "in2out/losses.hpp"
#include "in2out/masking.hpp"
#include "in2out/metrics.hpp"
#include "in2out/optim.hpp"
#include "in2out/rng.hpp"
#include "in2out/synth.hpp"
#include "in2out/tensorio.hpp"

namespace in2out {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- configuration ---------------------------------------------------------

struct TrainConfig {
  std::int64_t iters = 500;
  double lr = 4e-5;
  std::int64_t batch = 1;
  std::int64_t resize_w = 96;   // config key "resize": [W, H]
  std::int64_t resize_h = 56;
  double mask_lo = 1.0 / 12.0;  // config key "mask_ratio_range": [lo, hi]
  double mask_hi = 1.0 / 3.0;
  DesignKind design = DesignKind::hierarchical;
  LossWeights weights;
  std::uint64_t seed = 1;
  std::string profile = "e2fgvi";  // e2fgvi | propainter | custom
  std::string generator_kind = "toy";
  std::string data_dir;  // empty -> IN2OUT_DATA_DIR environment variable
  std::string out_dir = "runs/default";
  bool literal_printed_adv = false;

  void validate() const {
    if (iters < 1) throw std::invalid_argument("config error at $.iters: must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("config error at $.lr: must be > 0");
    if (batch < 1) throw std::invalid_argument("config error at $.batch: must be >= 1");
    if (resize_w < 8 || resize_h < 8 || resize_w % 8 != 0 || resize_h % 8 != 0)
      throw std::invalid_argument("config error at $.resize: dims must be positive multiples of 8");
    if (!(mask_lo > 0 && mask_lo <= mask_hi && mask_hi < 1))
      throw std::invalid_argument(
          "config error at $.mask_ratio_range: need 0 < lo <= hi < 1");
    if (profile != "e2fgvi" && profile != "propainter" && profile != "custom")
      throw std::invalid_argument(
          "config error at $.profile: expected e2fgvi|propainter|custom");
    weights.validate();
  }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                                const std::string& path) {
  for (const auto& [key, v] : j.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw std::invalid_argument("config error at " + path + "." + key + ": unknown key");
  }
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config error at " + path + ": wrong type");
  }
}

}  // namespace detail

/// Strict parse: unknown keys are errors; profile weights apply first and
/// explicit "weights" entries override per key.
inline TrainConfig parse_train_config(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config error at $: expected an object");
  detail::reject_unknown_keys(
      j,
      {"iters", "lr", "batch", "resize", "mask_ratio_range", "design", "weights", "seed",
       "profile", "generator", "data_dir", "out_dir", "literal_printed_adv"},
      "$");
  TrainConfig c;
  if (j.contains("iters")) c.iters = detail::get_as<std::int64_t>(j.at("iters"), "$.iters");
  if (j.contains("lr")) c.lr = detail::get_as<double>(j.at("lr"), "$.lr");
  if (j.contains("batch")) c.batch = detail::get_as<std::int64_t>(j.at("batch"), "$.batch");
  if (j.contains("resize")) {
    const auto& r = j.at("resize");
    if (!r.is_array() || r.size() != 2)
      throw std::invalid_argument("config error at $.resize: expected [width, height]");
    c.resize_w = detail::get_as<std::int64_t>(r[0], "$.resize[0]");
    c.resize_h = detail::get_as<std::int64_t>(r[1], "$.resize[1]");
  }
  if (j.contains("mask_ratio_range")) {
    const auto& r = j.at("mask_ratio_range");
    if (!r.is_array() || r.size() != 2)
      throw std::invalid_argument("config error at $.mask_ratio_range: expected [lo, hi]");
    c.mask_lo = detail::get_as<double>(r[0], "$.mask_ratio_range[0]");
    c.mask_hi = detail::get_as<double>(r[1], "$.mask_ratio_range[1]");
  }
  if (j.contains("design")) {
    try {
      c.design = parse_design_kind(detail::get_as<std::string>(j.at("design"), "$.design"));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config error at $.design: " + std::string(e.what()));
    }
  }
  if (j.contains("seed")) c.seed = detail::get_as<std::uint64_t>(j.at("seed"), "$.seed");
  if (j.contains("profile")) c.profile = detail::get_as<std::string>(j.at("profile"), "$.profile");
  if (c.profile == "propainter") c.weights = LossWeights::propainter_profile();
  else c.weights = LossWeights::e2fgvi_profile();
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (!w.is_object()) throw std::invalid_argument("config error at $.weights: expected an object");
    detail::reject_unknown_keys(
        w, {"lambda_rec", "lambda_valid", "lambda_adv", "lambda_flow", "alpha_local", "alpha_global"},
        "$.weights");
    auto opt = [&w](const char* key, double& slot) {
      if (w.contains(key)) slot = detail::get_as<double>(w.at(key), std::string("$.weights.") + key);
    };
    opt("lambda_rec", c.weights.lambda_rec);
    opt("lambda_valid", c.weights.lambda_valid);
    opt("lambda_adv", c.weights.lambda_adv);
    opt("lambda_flow", c.weights.lambda_flow);
    opt("alpha_local", c.weights.alpha_local);
    opt("alpha_global", c.weights.alpha_global);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    if (!g.is_object()) throw std::invalid_argument("config error at $.generator: expected an object");
    detail::reject_unknown_keys(g, {"kind"}, "$.generator");
    if (g.contains("kind"))
      c.generator_kind = detail::get_as<std::string>(g.at("kind"), "$.generator.kind");
  }
  if (j.contains("data_dir")) c.data_dir = detail::get_as<std::string>(j.at("data_dir"), "$.data_dir");
  if (j.contains("out_dir")) c.out_dir = detail::get_as<std::string>(j.at("out_dir"), "$.out_dir");
  if (j.contains("literal_printed_adv"))
    c.literal_printed_adv = detail::get_as<bool>(j.at("literal_printed_adv"), "$.literal_printed_adv");
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_train_config(j);
}

/// Canonical JSON for a config (round-trips through parse_train_config).
inline json train_config_json(const TrainConfig& c) {
  json j;
  j["iters"] = c.iters;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["resize"] = {c.resize_w, c.resize_h};
  j["mask_ratio_range"] = {c.mask_lo, c.mask_hi};
  j["design"] = design_kind_name(c.design);
  j["weights"] = {{"lambda_rec", c.weights.lambda_rec},     {"lambda_valid", c.weights.lambda_valid},
                  {"lambda_adv", c.weights.lambda_adv},     {"lambda_flow", c.weights.lambda_flow},
                  {"alpha_local", c.weights.alpha_local},   {"alpha_global", c.weights.alpha_global}};
  j["seed"] = c.seed;
  j["profile"] = c.profile;
  j["generator"] = {{"kind", c.generator_kind}};
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  j["literal_printed_adv"] = c.literal_printed_adv;
  return j;
}

/// Hash over the physics-relevant fields only — iteration budget and paths
/// may differ between a checkpointing run and its resumption.
inline std::string config_hash(const TrainConfig& c) {
  json j = train_config_json(c);
  j.erase("iters");
  j.erase("data_dir");
  j.erase("out_dir");
  std::ostringstream hex;
  hex << std::hex << std::hash<std::string>{}(j.dump());
  return hex.str();
}

inline fs::path resolve_data_dir(const TrainConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("IN2OUT_DATA_DIR"); env && *env) return env;
  throw std::runtime_error(
      "no data directory: set \"data_dir\" in the config or the IN2OUT_DATA_DIR environment "
      "variable");
}

// ---- data ------------------------------------------------------------------

/// Nearest-neighbour spatial resample of a pixel video.
template <class S>
VideoTensor<S> resize_nearest(const VideoTensor<S>& v, std::int64_t out_w, std::int64_t out_h) {
  v.data.require_ndim(5, "resize_nearest");
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize_nearest: bad target size");
  if (out_w == v.width() && out_h == v.height()) return v;
  Tensor<S> out({v.batches(), v.frames(), v.channels(), out_h, out_w});
  for (std::int64_t b = 0; b < v.batches(); ++b)
    for (std::int64_t t = 0; t < v.frames(); ++t)
      for (std::int64_t c = 0; c < v.channels(); ++c)
        for (std::int64_t h = 0; h < out_h; ++h) {
          const std::int64_t sh = h * v.height() / out_h;
          for (std::int64_t w = 0; w < out_w; ++w)
            out.at5(b, t, c, h, w) = v.data.at5(b, t, c, sh, w * v.width() / out_w);
        }
  return VideoTensor<S>(std::move(out), v.space);
}

struct Dataset {
  std::vector<NamedClip> clips;  // sorted by directory name via list_clip_dirs

  static Dataset load(const fs::path& root, std::int64_t resize_w, std::int64_t resize_h) {
    Dataset d;
    for (const fs::path& dir : list_clip_dirs(root)) {
      VideoTensor<float> v = load_clip(dir);
      d.clips.push_back(NamedClip{load_manifest(dir).clip_id, resize_nearest(v, resize_w, resize_h)});
    }
    if (d.clips.empty()) throw std::runtime_error("dataset is empty: " + root.string());
    return d;
  }

  std::int64_t min_frames() const {
    std::int64_t m = clips.front().video.frames();
    for (const auto& c : clips) m = std::min(m, c.video.frames());
    return m;
  }
};

// ---- checkpointing ---------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string vten_name(const std::string& param_name) { return param_name + ".vten"; }

template <class S>
void save_named_tensors(const fs::path& dir, const std::string& prefix,
                        const std::map<std::string, Tensor<S>>& tensors, json& index) {
  for (const auto& [name, t] : tensors) {
    const std::string file = vten_name(prefix + name);
    save_fixture(dir / file, t.template cast<float>());
    index[prefix + name] = file;
  }
}

}  // namespace detail

/// On-disk checkpoint: meta.json (iteration, config, rng state, name->file
/// index) plus one `.vten` per parameter / optimizer moment / power-iteration
/// vector.
template <class S>
struct CheckpointIO {
  static void save(const fs::path& dir, std::int64_t iteration, const TrainConfig& cfg,
                   const std::string& rng_state, ParamStore<S>& gen_params, Adam<S>& gen_opt,
                   ParamStore<S>* disc_params, Adam<S>* disc_opt,
                   std::vector<std::pair<std::string, SpectralState<S>*>> sn_states) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create checkpoint dir " + dir.string() + ": " + ec.message());
    json index;
    auto dump_store = [&](ParamStore<S>& store) {
      for (auto& [name, p] : store) {
        save_fixture(dir / detail::vten_name(name), p.value().template cast<float>());
        index[name] = detail::vten_name(name);
      }
    };
    dump_store(gen_params);
    detail::save_named_tensors(dir, "opt.g.m.", gen_opt.moment1(), index);
    detail::save_named_tensors(dir, "opt.g.v.", gen_opt.moment2(), index);
    if (disc_params) {
      dump_store(*disc_params);
      detail::save_named_tensors(dir, "opt.d.m.", disc_opt->moment1(), index);
      detail::save_named_tensors(dir, "opt.d.v.", disc_opt->moment2(), index);
    }
    for (auto& [name, st] : sn_states) {
      save_fixture(dir / detail::vten_name(name + ".sn_u"), st->u.template cast<float>());
      save_fixture(dir / detail::vten_name(name + ".sn_v"), st->v.template cast<float>());
      index[name + ".sn_u"] = detail::vten_name(name + ".sn_u");
      index[name + ".sn_v"] = detail::vten_name(name + ".sn_v");
    }
    json meta;
    meta["version"] = kCheckpointVersion;
    meta["iteration"] = iteration;
    meta["config"] = train_config_json(cfg);
    meta["config_hash"] = config_hash(cfg);
    meta["rng_state"] = rng_state;
    meta["adam_g_steps"] = gen_opt.step_count();
    meta["adam_d_steps"] = disc_opt ? disc_opt->step_count() : 0;
    meta["params"] = index;
    std::ofstream f(dir / "meta.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
    f << meta.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + (dir / "meta.json").string());
  }

  static json load_meta(const fs::path& dir) {
    std::ifstream f(dir / "meta.json");
    if (!f) throw std::runtime_error("not a checkpoint (missing meta.json): " + dir.string());
    json meta;
    try {
      meta = json::parse(f);
    } catch (const json::exception& e) {
      throw std::runtime_error("corrupt checkpoint meta in " + dir.string() + ": " + e.what());
    }
    if (meta.value("version", -1) != kCheckpointVersion)
      throw std::runtime_error("unsupported checkpoint version in " + dir.string());
    return meta;
  }

  static Tensor<S> load_tensor(const fs::path& dir, const json& meta, const std::string& name) {
    const auto& index = meta.at("params");
    if (!index.contains(name))
      throw std::runtime_error("checkpoint " + dir.string() + " is missing tensor '" + name + "'");
    return load_fixture(dir / index.at(name).template get<std::string>()).template cast<S>();
  }

  static void restore_store(const fs::path& dir, const json& meta, ParamStore<S>& store) {
    for (auto& [name, p] : store) {
      Tensor<S> t = load_tensor(dir, meta, name);
      if (!t.same_shape(p.value()))
        throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                                 shape_str(t.shape()) + ", expected " + shape_str(p.value().shape()));
      const_cast<Tensor<S>&>(p.value()) = std::move(t);
    }
  }

  static void restore_moments(const fs::path& dir, const json& meta, const std::string& prefix,
                              ParamStore<S>& store, std::map<std::string, Tensor<S>>& moments) {
    moments.clear();
    for (auto& [name, p] : store) moments.emplace(name, load_tensor(dir, meta, prefix + name));
  }
};

// ---- the loop --------------------------------------------------------------

class Trainer {
  using S = float;

 public:
  Trainer(TrainConfig cfg, Dataset data)
      : cfg_(std::move(cfg)),
        data_(std::move(data)),
        bundle_(cfg_.design, DiscConfig::defaults(), cfg_.seed),
        gen_opt_(AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8}),
        disc_opt_(AdamConfig{cfg_.lr, 0.5, 0.999, 1e-8}),
        rng_(derive_seed(cfg_.seed, 0x100b)) {
    cfg_.validate();
    // Every step carves out-bands at pixel resolution (mask + reconstruction
    // split) and the band-supervised designs carve them again at FEM feature
    // resolution, 8x below the pixels. The smallest ratio the range can
    // sample must leave at least one column per side in the tightest space,
    // or whichever iteration draws it dies on an empty band; reject the
    // combination while the fix is still a config edit.
    const bool feat_band =
        cfg_.design == DesignKind::hierarchical || cfg_.design == DesignKind::local_only;
    const std::int64_t min_w = feat_band ? cfg_.resize_w / 8 : cfg_.resize_w;
    if (band_width(cfg_.mask_lo, min_w) < 1)
      throw std::invalid_argument(
          "config error at $.mask_ratio_range: lo " + std::to_string(cfg_.mask_lo) +
          " gives an empty band at " + (feat_band ? "feature" : "pixel") + " width " +
          std::to_string(min_w) + " for design " + design_kind_name(cfg_.design) +
          "; raise lo or widen resize");
    if (data_.min_frames() < 8)
      throw std::runtime_error("dataset clip too short: training needs >= 8 frames per clip");
    for (const auto& c : data_.clips) {
      if (c.video.width() != cfg_.resize_w || c.video.height() != cfg_.resize_h)
        throw std::logic_error("dataset not resized to config geometry");
    }
    gen_ = GeneratorRegistry<S>::instance().create(cfg_.generator_kind,
                                                   derive_seed(cfg_.seed, 0x6765));
  }

  const TrainConfig& config() const { return cfg_; }
  std::int64_t iteration() const { return iter_; }
  Generator<S>& generator() { return *gen_; }
  DesignBundle<S>& design() { return bundle_; }

  /// One D update then one G update; scalar report for the log.
  LossReport train_step() {
    const std::int64_t iter = iter_ + 1;  // 1-based for messages/logs
    try {
      const double ratio = sample_ratio(cfg_.mask_lo, cfg_.mask_hi, rng_);
      Var<S> gt = Var<S>::constant(draw_batch());
      const std::int64_t frames = gt.value().dim(1);
      VideoTensor<S> mask1 = make_mask<S>(MaskSpec{ratio, cfg_.resize_w}, frames, cfg_.resize_h);
      VideoTensor<S> gt_video(gt.value(), Space::pixel);
      const VideoTensor<S> masked = apply_mask(gt_video, tile_batch(mask1, cfg_.batch));

      Var<S> yhat_all = gen_->forward(Var<S>::constant(masked.data));
      Var<S> yhat = slice_frames(yhat_all, 0, kLocalFrames);   // supervised frames
      Var<S> y = slice_frames(gt, 0, kLocalFrames).detach();

      LossReport r;
      if (bundle_.has_discriminator()) {
        DiscStepLoss<S> d = bundle_.disc_loss(y, yhat.detach(), ratio, cfg_.weights.alpha_local,
                                              cfg_.weights.alpha_global, /*update_sn=*/true);
        r.d_loss = scalar_value(d.loss);
        r.out_loss_real_local = d.parts.real_local;
        r.out_loss_real_global = d.parts.real_global;
        r.out_loss_fake_local = d.parts.fake_local;
        r.out_loss_fake_global = d.parts.fake_global;
        bundle_.params().zero_grads();
        d.loss.backward();
        disc_opt_.step(bundle_.params());
      }

      Var<S> adv = bundle_.gen_adv_loss(yhat, ratio, cfg_.literal_printed_adv);
      RecLoss<S> rec = rec_loss(yhat, y, ratio);
      Var<S> flow = gen_->flow_loss();
      Var<S> total = total_gen_loss(rec.hole, rec.valid, adv, flow, cfg_.weights);
      r.adv = scalar_value(adv);
      r.rec_hole = scalar_value(rec.hole);
      r.rec_valid = scalar_value(rec.valid);
      r.flow = scalar_value(flow);
      r.total_g = scalar_value(total);
      gen_->params().zero_grads();
      total.backward();
      gen_opt_.step(gen_->params());

      r.require_finite();
      ++iter_;
      last_ratio_ = ratio;
      return r;
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(iter) + ": " + e.what());
    }
  }

  double last_ratio() const { return last_ratio_; }

  /// Run to cfg.iters, appending one JSON line per iteration to `log` and
  /// checkpointing every max(1, iters/10) iterations into out_dir. Returns
  /// the final checkpoint path.
  fs::path fit(std::ostream& log) {
    const std::int64_t cadence = std::max<std::int64_t>(1, cfg_.iters / 10);
    fs::path last_ckpt;
    while (iter_ < cfg_.iters) {
      LossReport r = train_step();
      json line;
      line["iter"] = iter_;
      line["design"] = design_kind_name(cfg_.design);
      line["ratio"] = last_ratio_;
      for (const auto& [k, v] : r.as_map()) line[k] = v;
      log << line.dump() << "\n";
      if (iter_ % cadence == 0 || iter_ == cfg_.iters) {
        last_ckpt = checkpoint_dir(iter_);
        save_checkpoint(last_ckpt);
      }
    }
    log.flush();
    return last_ckpt;
  }

  fs::path checkpoint_dir(std::int64_t iteration) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%06lld", static_cast<long long>(iteration));
    return fs::path(cfg_.out_dir) / buf;
  }

  void save_checkpoint(const fs::path& dir) {
    CheckpointIO<S>::save(dir, iter_, cfg_, rng_.state(), gen_->params(), gen_opt_,
                          bundle_.has_discriminator() ? &bundle_.params() : nullptr,
                          bundle_.has_discriminator() ? &disc_opt_ : nullptr,
                          bundle_.spectral_states());
  }

  /// Restore parameters, optimizer moments, power-iteration vectors, RNG
  /// state and the iteration counter. The checkpoint must come from the same
  /// physics (config hash check; iteration budget and paths may differ).
  void restore_checkpoint(const fs::path& dir) {
    const json meta = CheckpointIO<S>::load_meta(dir);
    const std::string want = config_hash(cfg_);
    const std::string have = meta.value("config_hash", "");
    if (want != have)
      throw std::runtime_error("checkpoint " + dir.string() +
                               " was produced by a different configuration (hash " + have +
                               ", expected " + want + ")");
    CheckpointIO<S>::restore_store(dir, meta, gen_->params());
    CheckpointIO<S>::restore_moments(dir, meta, "opt.g.m.", gen_->params(), gen_opt_.moment1());
    CheckpointIO<S>::restore_moments(dir, meta, "opt.g.v.", gen_->params(), gen_opt_.moment2());
    gen_opt_.set_step_count(meta.at("adam_g_steps").get<std::int64_t>());
    if (bundle_.has_discriminator()) {
      CheckpointIO<S>::restore_store(dir, meta, bundle_.params());
      CheckpointIO<S>::restore_moments(dir, meta, "opt.d.m.", bundle_.params(), disc_opt_.moment1());
      CheckpointIO<S>::restore_moments(dir, meta, "opt.d.v.", bundle_.params(), disc_opt_.moment2());
      disc_opt_.set_step_count(meta.at("adam_d_steps").get<std::int64_t>());
      for (auto& [name, st] : bundle_.spectral_states()) {
        st->u = CheckpointIO<S>::load_tensor(dir, meta, name + ".sn_u");
        st->v = CheckpointIO<S>::load_tensor(dir, meta, name + ".sn_v");
      }
    }
    rng_.restore(meta.at("rng_state").get<std::string>());
    iter_ = meta.at("iteration").get<std::int64_t>();
  }

  static constexpr std::int64_t kLocalFrames = 5;
  static constexpr std::int64_t kNonLocalFrames = 3;

 private:
  /// (batch, 8, 3, H, W) ground truth: per item, 5 local frames then 3
  /// non-local frames from one uniformly chosen clip.
  Tensor<S> draw_batch() {
    const std::int64_t T = kLocalFrames + kNonLocalFrames;
    Tensor<S> out({cfg_.batch, T, 3, cfg_.resize_h, cfg_.resize_w});
    const std::int64_t chw = 3 * cfg_.resize_h * cfg_.resize_w;
    for (std::int64_t b = 0; b < cfg_.batch; ++b) {
      const auto& clip = data_.clips[rng_.below(data_.clips.size())].video;
      const ClipSample s = sample_clip(clip.frames(), rng_);
      std::vector<std::int64_t> order = s.local;
      order.insert(order.end(), s.non_local.begin(), s.non_local.end());
      for (std::int64_t t = 0; t < T; ++t)
        std::copy_n(clip.data.data() + clip.data.index5(0, order[static_cast<std::size_t>(t)], 0, 0, 0),
                    chw, out.data() + out.index5(b, t, 0, 0, 0));
    }
    return out;
  }

  static VideoTensor<S> tile_batch(const VideoTensor<S>& mask, std::int64_t batch) {
    if (batch == 1) return mask;
    Tensor<S> out({batch, mask.frames(), mask.channels(), mask.height(), mask.width()});
    const std::int64_t per = mask.data.numel();
    for (std::int64_t b = 0; b < batch; ++b)
      std::copy_n(mask.data.data(), per, out.data() + b * per);
    return VideoTensor<S>(std::move(out), mask.space);
  }

  TrainConfig cfg_;
  Dataset data_;
  DesignBundle<S> bundle_;
  std::unique_ptr<Generator<S>> gen_;
  Adam<S> gen_opt_;
  Adam<S> disc_opt_;
  Rng rng_;
  std::int64_t iter_ = 0;
  double last_ratio_ = 0.0;
};

}  // namespace in2out
