#pragma once

// Two-stage video discriminator. The front half (FEM) turns RGB video into a
// local feature map at 1/8 spatial resolution; the back half (FCM) reduces
// those features to a single-channel spatio-temporal logit map at 1/64.
// Training losses can attach to either stage, which is what the design
// ablations exercise.
//
// Also here: the exact per-layer receptive-field recurrence and an empirical
// probe that measures RF through input gradients.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "in2out/autodiff.hpp"
#include "in2out/conv3d.hpp"
#include "in2out/optim.hpp"
#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

namespace detail {

inline Conv3dSpec disc_layer(std::int64_t in_ch, std::int64_t out_ch) {
  Conv3dSpec sp;
  sp.in_channels = in_ch;
  sp.out_channels = out_ch;
  sp.kt = 3;
  sp.kh = sp.kw = 7;
  sp.st = 1;
  sp.sh = sp.sw = 2;
  sp.pt = sp.kt / 2;
  sp.ph = sp.kh / 2;
  sp.pw = sp.kw / 2;
  return sp;
}

}  // namespace detail

struct DiscConfig {
  std::vector<Conv3dSpec> fem_layers;
  std::vector<Conv3dSpec> fcm_layers;
  double slope = 0.2;        // LeakyReLU slope between layers
  bool spectral_norm = true;

  /// 3+3 stride-2 layers, kernels (3,7,7), channels 3-32-64-128 / 128-128-128-1.
  static DiscConfig defaults() {
    DiscConfig c;
    c.fem_layers = {detail::disc_layer(3, 32), detail::disc_layer(32, 64),
                    detail::disc_layer(64, 128)};
    c.fcm_layers = {detail::disc_layer(128, 128), detail::disc_layer(128, 128),
                    detail::disc_layer(128, 1)};
    return c;
  }

  void validate() const {
    if (fem_layers.empty() || fcm_layers.empty())
      throw std::invalid_argument("DiscConfig: need at least one layer per stage");
    for (const auto& l : fem_layers) l.validate();
    for (const auto& l : fcm_layers) l.validate();
    for (std::size_t i = 1; i < fem_layers.size(); ++i)
      if (fem_layers[i].in_channels != fem_layers[i - 1].out_channels)
        throw std::invalid_argument("DiscConfig: fem channel chain broken at layer " +
                                    std::to_string(i));
    if (fcm_layers.front().in_channels != fem_layers.back().out_channels)
      throw std::invalid_argument("DiscConfig: fcm input channels do not match fem output");
    for (std::size_t i = 1; i < fcm_layers.size(); ++i)
      if (fcm_layers[i].in_channels != fcm_layers[i - 1].out_channels)
        throw std::invalid_argument("DiscConfig: fcm channel chain broken at layer " +
                                    std::to_string(i));
    if (fcm_layers.back().out_channels != 1)
      throw std::invalid_argument("DiscConfig: final fcm layer must have one output channel");
  }

  std::vector<Conv3dSpec> all_layers() const {
    std::vector<Conv3dSpec> all = fem_layers;
    all.insert(all.end(), fcm_layers.begin(), fcm_layers.end());
    return all;
  }
};

template <class S>
struct DiscFeatures {
  Var<S> local;   // FEM output
  Var<S> global;  // FCM logit map, channel dim 1
};

template <class S>
class Discriminator {
 public:
  Discriminator(DiscConfig config, ParamStore<S>& store, std::string prefix, Rng& rng)
      : config_(std::move(config)), store_(&store), prefix_(std::move(prefix)) {
    config_.validate();
    init_stage(config_.fem_layers, "fem", rng);
    init_stage(config_.fcm_layers, "fcm", rng);
  }

  /// RGB video in, local feature map out. `update_sn` runs one power-iteration
  /// refresh per weight; `frozen` detaches parameters so no gradient reaches
  /// them (used when only the input gradient is wanted).
  Var<S> fem_forward(const Var<S>& x, bool update_sn = false, bool frozen = false) {
    if (x.value().dim(2) != config_.fem_layers.front().in_channels)
      throw std::invalid_argument("fem_forward: expected " +
                                  std::to_string(config_.fem_layers.front().in_channels) +
                                  " channels, got " + std::to_string(x.value().dim(2)));
    Var<S> h = x;
    for (std::size_t i = 0; i < config_.fem_layers.size(); ++i) {
      h = layer(h, config_.fem_layers[i], "fem", i, update_sn, frozen);
      h = leaky_relu(h, static_cast<S>(config_.slope));
    }
    return h;
  }

  /// Feature map in, single-channel logit map out (no final activation).
  Var<S> fcm_forward(const Var<S>& local, bool update_sn = false, bool frozen = false) {
    if (local.value().dim(2) != config_.fcm_layers.front().in_channels)
      throw std::invalid_argument("fcm_forward: expected " +
                                  std::to_string(config_.fcm_layers.front().in_channels) +
                                  " channels, got " + std::to_string(local.value().dim(2)));
    Var<S> h = local;
    for (std::size_t i = 0; i < config_.fcm_layers.size(); ++i) {
      h = layer(h, config_.fcm_layers[i], "fcm", i, update_sn, frozen);
      if (i + 1 < config_.fcm_layers.size()) h = leaky_relu(h, static_cast<S>(config_.slope));
    }
    return h;
  }

  DiscFeatures<S> forward(const Var<S>& x, bool update_sn = false, bool frozen = false) {
    Var<S> local = fem_forward(x, update_sn, frozen);
    Var<S> global = fcm_forward(local, update_sn, frozen);
    return {local, global};
  }

  const DiscConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }
  std::map<std::string, SpectralState<S>>& spectral_states() { return sn_states_; }

 private:
  void init_stage(const std::vector<Conv3dSpec>& layers, const char* stage, Rng& rng) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& sp = layers[i];
      const std::string base = prefix_ + stage + "." + std::to_string(i);
      store_->add(base + ".w", kaiming_init<S>(sp.weight_shape(), rng));
      store_->add(base + ".b", Tensor<S>({sp.out_channels}));
      if (config_.spectral_norm)
        sn_states_.emplace(base + ".w", SpectralState<S>::init(
                                            sp.out_channels, sp.kernel_volume(), rng));
    }
  }

  Var<S> layer(const Var<S>& h, const Conv3dSpec& sp, const char* stage, std::size_t i,
               bool update_sn, bool frozen) {
    const std::string base = prefix_ + stage + "." + std::to_string(i);
    Var<S> w = store_->at(base + ".w");
    Var<S> b = store_->at(base + ".b");
    if (frozen) {
      w = w.detach();
      b = b.detach();
    }
    if (config_.spectral_norm)
      w = spectral_normalize(w, sn_states_.at(base + ".w"), update_sn);
    return conv3d(h, w, b, sp);
  }

  DiscConfig config_;
  ParamStore<S>* store_;
  std::string prefix_;
  std::map<std::string, SpectralState<S>> sn_states_;
};

// ---- receptive fields ------------------------------------------------------

struct RfEntry {
  std::int64_t t = 1, h = 1, w = 1;
};

/// Exact per-layer receptive field: RF_l = RF_{l-1} + (k_l - 1) * prod_{j<l} s_j.
inline std::vector<RfEntry> receptive_field(const std::vector<Conv3dSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("receptive_field: empty spec list");
  std::vector<RfEntry> out;
  RfEntry rf;  // RF_0 = 1 per axis
  std::int64_t jt = 1, jh = 1, jw = 1;  // cumulative stride ("jump")
  for (const auto& sp : specs) {
    rf.t += (sp.kt - 1) * jt;
    rf.h += (sp.kh - 1) * jh;
    rf.w += (sp.kw - 1) * jw;
    jt *= sp.st;
    jh *= sp.sh;
    jw *= sp.sw;
    out.push_back(rf);
  }
  return out;
}

/// The folklore k * prod(s) estimate (last-layer kernel times all strides).
/// Overstates the true field for stride-2 stacks; kept for comparison output.
inline RfEntry rf_heuristic(const std::vector<Conv3dSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("rf_heuristic: empty spec list");
  RfEntry e{specs.back().kt, specs.back().kh, specs.back().kw};
  for (const auto& sp : specs) {
    e.t *= sp.st;
    e.h *= sp.sh;
    e.w *= sp.sw;
  }
  return e;
}

/// Measure the receptive field of `forward` by differentiating one interior
/// output unit wrt the input and taking the bounding box of nonzero gradient.
/// `unit_offset` shifts the probed unit from the output center (for the
/// translation-invariance check). Throws if the gradient extent touches the
/// probe boundary — the probe was too small to contain the field.
template <class S, class F>
std::array<std::int64_t, 3> empirical_rf(F&& forward, const Shape& probe_shape,
                                         std::array<std::int64_t, 3> unit_offset = {0, 0, 0},
                                         std::array<bool, 3> strict = {true, true, true}) {
  // strict[axis] = false lets the field clip at that axis' probe boundary
  // without raising: useful when only one axis is being measured and a
  // full-size probe on the others would not fit in memory.
  if (probe_shape.size() != 5) throw std::invalid_argument("empirical_rf: probe must have 5 axes");
  Var<S> x = Var<S>::leaf(Tensor<S>(probe_shape), true);
  Var<S> y = forward(x);
  const auto& ys = y.value().shape();
  const std::int64_t tu = ys[1] / 2 + unit_offset[0];
  const std::int64_t hu = ys[3] / 2 + unit_offset[1];
  const std::int64_t wu = ys[4] / 2 + unit_offset[2];
  if (tu < 0 || tu >= ys[1] || hu < 0 || hu >= ys[3] || wu < 0 || wu >= ys[4])
    throw std::invalid_argument("empirical_rf: probed unit outside output");
  element(y, y.value().index5(0, tu, 0, hu, wu)).backward();

  const Tensor<S>& g = x.grad();
  std::int64_t t0 = probe_shape[1], t1 = -1, h0 = probe_shape[3], h1 = -1, w0 = probe_shape[4],
               w1 = -1;
  for (std::int64_t t = 0; t < probe_shape[1]; ++t)
    for (std::int64_t c = 0; c < probe_shape[2]; ++c)
      for (std::int64_t h = 0; h < probe_shape[3]; ++h)
        for (std::int64_t w = 0; w < probe_shape[4]; ++w)
          if (g[g.index5(0, t, c, h, w)] != S(0)) {
            t0 = std::min(t0, t), t1 = std::max(t1, t);
            h0 = std::min(h0, h), h1 = std::max(h1, h);
            w0 = std::min(w0, w), w1 = std::max(w1, w);
          }
  if (t1 < 0) throw std::runtime_error("empirical_rf: gradient vanished everywhere");
  const bool clipped_t = t0 == 0 || t1 == probe_shape[1] - 1;
  const bool clipped_h = h0 == 0 || h1 == probe_shape[3] - 1;
  const bool clipped_w = w0 == 0 || w1 == probe_shape[4] - 1;
  if ((strict[0] && clipped_t) || (strict[1] && clipped_h) || (strict[2] && clipped_w))
    throw std::invalid_argument("empirical_rf: probe too small, field clipped at boundary");
  return {t1 - t0 + 1, h1 - h0 + 1, w1 - w0 + 1};
}

}  // namespace in2out
