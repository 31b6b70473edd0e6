#pragma once

// The pluggable generator side of training. A generator consumes masked
// pixel video carrying an extra mask channel and emits full RGB frames in
// [0,1]. Shipped: a small encoder/residual/decoder video net good enough to
// learn band completion at desk scale. Real inpainting backbones plug in
// through the same contract via the registry.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "in2out/autodiff.hpp"
#include "in2out/conv3d.hpp"
#include "in2out/masking.hpp"
#include "in2out/optim.hpp"
#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

/// Contract: forward maps (B,T,C+1,H,W) masked pixel video (last channel =
/// mask) to (B,T,C,H,W) pixel video in [0,1], differentiable wrt parameters.
/// flow_loss is an optional extra objective hook (zero unless the backbone
/// has a flow branch).
template <class S>
class Generator {
 public:
  virtual ~Generator() = default;
  virtual Var<S> forward(const Var<S>& x_masked) = 0;
  virtual ParamStore<S>& params() = 0;
  virtual Var<S> flow_loss() { return scalar_var<S>(S(0)); }
  virtual std::string kind() const = 0;
};

namespace detail {

inline Conv3dSpec gen_layer(std::int64_t in_ch, std::int64_t out_ch, std::int64_t k_spatial,
                            std::int64_t s_spatial) {
  Conv3dSpec sp;
  sp.in_channels = in_ch;
  sp.out_channels = out_ch;
  sp.kt = 3;
  sp.kh = sp.kw = k_spatial;
  sp.st = 1;
  sp.sh = sp.sw = s_spatial;
  sp.pt = sp.kt / 2;
  sp.ph = sp.kh / 2;
  sp.pw = sp.kw / 2;
  return sp;
}

}  // namespace detail

/// Encoder (3 x stride-2 conv) -> 3 residual blocks -> decoder
/// (3 x nearest-upsample + conv) -> sigmoid. Channels 4-32-64-128-64-32-3.
/// Spatial dims must be divisible by 8. All parameters zero gives a constant
/// 0.5 gray output (sigmoid of zero logits), a useful init sanity point.
template <class S>
class ToyGenerator final : public Generator<S> {
 public:
  explicit ToyGenerator(std::uint64_t seed, std::int64_t in_channels = 4)
      : in_channels_(in_channels) {
    Rng rng(derive_seed(seed, 0x67656e /* "gen" */));
    enc_ = {detail::gen_layer(in_channels_, 32, 5, 2), detail::gen_layer(32, 64, 5, 2),
            detail::gen_layer(64, 128, 5, 2)};
    for (int i = 0; i < kResBlocks; ++i) {
      res_.push_back(detail::gen_layer(128, 128, 3, 1));
      res_.push_back(detail::gen_layer(128, 128, 3, 1));
    }
    dec_ = {detail::gen_layer(128, 64, 3, 1), detail::gen_layer(64, 32, 3, 1),
            detail::gen_layer(32, 3, 3, 1)};
    auto add_layers = [&](const std::vector<Conv3dSpec>& specs, const std::string& stage) {
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string base = "g." + stage + "." + std::to_string(i);
        params_.add(base + ".w", kaiming_init<S>(specs[i].weight_shape(), rng));
        params_.add(base + ".b", Tensor<S>({specs[i].out_channels}));
      }
    };
    add_layers(enc_, "enc");
    add_layers(res_, "res");
    add_layers(dec_, "dec");
  }

  Var<S> forward(const Var<S>& x_masked) override {
    const auto& sh = x_masked.value().shape();
    if (sh.size() != 5 || sh[2] != in_channels_)
      throw std::invalid_argument("toy generator: expected " + std::to_string(in_channels_) +
                                  " input channels (RGB + mask), got shape " + shape_str(sh));
    if (sh[3] % 8 != 0 || sh[4] % 8 != 0)
      throw std::invalid_argument("toy generator: spatial dims must be divisible by 8, got " +
                                  shape_str(sh));
    Var<S> h = x_masked;
    for (std::size_t i = 0; i < enc_.size(); ++i)
      h = leaky_relu(conv(h, enc_[i], "enc", i), kSlope);
    for (int b = 0; b < kResBlocks; ++b) {
      Var<S> r = leaky_relu(conv(h, res_[2 * b], "res", 2 * b), kSlope);
      r = conv(r, res_[2 * b + 1], "res", 2 * b + 1);
      h = add(h, r);
    }
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      h = upsample_nearest2x(h);
      h = conv(h, dec_[i], "dec", i);
      if (i + 1 < dec_.size()) h = leaky_relu(h, kSlope);
    }
    return sigmoid(h);
  }

  ParamStore<S>& params() override { return params_; }
  std::string kind() const override { return "toy"; }

 private:
  static constexpr int kResBlocks = 3;
  static constexpr S kSlope = static_cast<S>(0.2);

  Var<S> conv(const Var<S>& h, const Conv3dSpec& sp, const char* stage, std::size_t i) {
    const std::string base = "g." + std::string(stage) + "." + std::to_string(i);
    return conv3d(h, params_.at(base + ".w"), params_.at(base + ".b"), sp);
  }

  std::int64_t in_channels_;
  std::vector<Conv3dSpec> enc_, res_, dec_;
  ParamStore<S> params_;
};

// ---- temporal sampling -----------------------------------------------------

struct ClipSample {
  std::int64_t local_start = 0;
  std::vector<std::int64_t> local;      // 5 consecutive frames
  std::vector<std::int64_t> non_local;  // 3 distinct frames outside the block

  void validate(std::int64_t t_total) const {
    if (local.size() != 5 || non_local.size() != 3)
      throw std::logic_error("ClipSample: wrong frame counts");
    for (std::size_t i = 0; i < local.size(); ++i)
      if (local[i] != local_start + static_cast<std::int64_t>(i))
        throw std::logic_error("ClipSample: local block not contiguous");
    for (auto f : non_local) {
      if (f < 0 || f >= t_total) throw std::logic_error("ClipSample: frame index out of range");
      if (f >= local_start && f < local_start + 5)
        throw std::logic_error("ClipSample: non-local frame inside local block");
    }
  }
};

/// 5 contiguous local frames (uniform start) + 3 distinct non-local frames
/// drawn uniformly from the remainder, in draw order.
inline ClipSample sample_clip(std::int64_t t_total, Rng& rng) {
  constexpr std::int64_t kLocal = 5, kNonLocal = 3;
  if (t_total < kLocal + kNonLocal)
    throw std::invalid_argument("sample_clip: clip too short, need >= " +
                                std::to_string(kLocal + kNonLocal) + " frames, got " +
                                std::to_string(t_total));
  ClipSample s;
  s.local_start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(t_total - kLocal + 1)));
  for (std::int64_t i = 0; i < kLocal; ++i) s.local.push_back(s.local_start + i);
  std::vector<std::int64_t> rest;
  for (std::int64_t f = 0; f < t_total; ++f)
    if (f < s.local_start || f >= s.local_start + kLocal) rest.push_back(f);
  for (std::int64_t i = 0; i < kNonLocal; ++i) {  // partial Fisher-Yates
    const std::size_t j = static_cast<std::size_t>(i) +
                          static_cast<std::size_t>(rng.below(rest.size() - static_cast<std::size_t>(i)));
    std::swap(rest[static_cast<std::size_t>(i)], rest[j]);
    s.non_local.push_back(rest[static_cast<std::size_t>(i)]);
  }
  return s;
}

// ---- inference -------------------------------------------------------------

/// Replace the center columns of `output` with those of `source` (the known
/// region), leaving the generated bands. Both must be pixel-space video.
template <class S>
VideoTensor<S> paste_center(const VideoTensor<S>& output, const VideoTensor<S>& source,
                            const OutBands& bands) {
  if (!output.data.same_shape(source.data))
    throw std::invalid_argument("paste_center: shape mismatch");
  VideoTensor<S> out = output;
  const std::int64_t b0 = bands.band();
  for (std::int64_t b = 0; b < out.batches(); ++b)
    for (std::int64_t t = 0; t < out.frames(); ++t)
      for (std::int64_t c = 0; c < out.channels(); ++c)
        for (std::int64_t h = 0; h < out.height(); ++h)
          for (std::int64_t w = b0; w < out.width() - b0; ++w)
            out.data.at5(b, t, c, h, w) = source.data.at5(b, t, c, h, w);
  return out;
}

/// Outpaint a full clip in consecutive non-overlapping frame windows; a short
/// tail becomes one smaller window. Every frame is produced exactly once.
template <class S>
VideoTensor<S> sliding_window_infer(Generator<S>& gen, const VideoTensor<S>& video,
                                    std::int64_t window, double ratio) {
  video.validate();
  if (window < 1) throw std::invalid_argument("sliding_window_infer: window must be >= 1");
  const std::int64_t t_total = video.frames();
  VideoTensor<S> out;
  out.data = Tensor<S>(video.data.shape());
  out.space = Space::pixel;
  const MaskSpec spec{ratio, video.width()};
  for (std::int64_t t0 = 0; t0 < t_total; t0 += window) {
    const std::int64_t t1 = std::min(t0 + window, t_total);
    Tensor<S> chunk({video.batches(), t1 - t0, video.channels(), video.height(), video.width()});
    for (std::int64_t b = 0; b < video.batches(); ++b)
      for (std::int64_t t = t0; t < t1; ++t)
        std::copy_n(video.data.data() + video.data.index5(b, t, 0, 0, 0),
                    video.channels() * video.height() * video.width(),
                    chunk.data() + chunk.index5(b, t - t0, 0, 0, 0));
    VideoTensor<S> vchunk{std::move(chunk), Space::pixel};
    const VideoTensor<S> mask = make_mask<S>(spec, t1 - t0, video.height());
    const VideoTensor<S> masked = apply_mask(vchunk, mask);
    Var<S> yhat = gen.forward(Var<S>::constant(masked.data));
    const Tensor<S>& y = yhat.value();
    for (std::int64_t b = 0; b < video.batches(); ++b)
      for (std::int64_t t = t0; t < t1; ++t)
        std::copy_n(y.data() + y.index5(b, t - t0, 0, 0, 0),
                    video.channels() * video.height() * video.width(),
                    out.data.data() + out.data.index5(b, t, 0, 0, 0));
  }
  return out;
}

// ---- registry --------------------------------------------------------------

template <class S>
class GeneratorRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Generator<S>>(std::uint64_t seed)>;

  static GeneratorRegistry& instance() {
    static GeneratorRegistry reg = [] {
      GeneratorRegistry r;
      r.register_kind("toy",
                      [](std::uint64_t seed) { return std::make_unique<ToyGenerator<S>>(seed); });
      return r;
    }();
    return reg;
  }

  void register_kind(const std::string& name, Factory f) { factories_[name] = std::move(f); }

  std::unique_ptr<Generator<S>> create(const std::string& name, std::uint64_t seed) const {
    auto it = factories_.find(name);
    if (it != factories_.end()) return it->second(seed);
    if (name == "e2fgvi" || name == "propainter")
      throw std::invalid_argument("generator kind '" + name +
                                  "' is reserved for an external adapter and is not bundled; "
                                  "register a factory for it or use 'toy'");
    std::string known;
    for (const auto& [k, f] : factories_) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown generator kind '" + name + "' (available: " + known + ")");
  }

  std::vector<std::string> kinds() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : factories_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, Factory> factories_;
};

/// Conformance checks every generator adapter must pass: output shape/range,
/// determinism across two forwards, and gradient flow to parameters.
template <class S>
void check_generator_contract(Generator<S>& gen, const Shape& input_shape) {
  if (input_shape.size() != 5 || input_shape[2] < 2)
    throw std::invalid_argument("contract check: input shape must be 5-axis with >= 2 channels");
  Rng rng(7);
  Tensor<S> x(input_shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<S>(rng.uniform());
  Var<S> y1 = gen.forward(Var<S>::constant(x));
  const Shape want{input_shape[0], input_shape[1], input_shape[2] - 1, input_shape[3],
                   input_shape[4]};
  if (y1.value().shape() != want)
    throw std::runtime_error("contract violation: output shape " + shape_str(y1.value().shape()) +
                             ", expected " + shape_str(want));
  for (std::int64_t i = 0; i < y1.value().numel(); ++i)
    if (y1.value()[i] < S(0) || y1.value()[i] > S(1))
      throw std::runtime_error("contract violation: output outside [0,1]");
  Var<S> y2 = gen.forward(Var<S>::constant(x));
  if (max_abs_diff(y1.value(), y2.value()) != 0.0)
    throw std::runtime_error("contract violation: forward is not deterministic");
  mean_all(y1).backward();
  bool any_grad = false;
  for (auto& [name, p] : gen.params()) {
    const Tensor<S>& g = p.grad();
    if (!g.all_finite()) throw std::runtime_error("contract violation: non-finite gradient in " + name);
    for (std::int64_t i = 0; i < g.numel() && !any_grad; ++i) any_grad = g[i] != S(0);
  }
  if (!any_grad) throw std::runtime_error("contract violation: no gradient reaches parameters");
}

}  // namespace in2out
