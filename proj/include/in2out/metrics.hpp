#pragma once

// Evaluation: PSNR, Gaussian-window SSIM on luminance, and a Fréchet feature
// distance over pooled video features. The bundled feature extractor is a
// fixed-seed random-weight 3-D conv stack with global average pooling — it
// preserves the Fréchet machinery and relative comparisons without shipping
// pretrained weights; externally computed feature dumps plug in through
// stats_from_features / load_feature_dump.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "in2out/discriminator.hpp"
#include "in2out/masking.hpp"
#include "in2out/tensor.hpp"
#include "in2out/tensorio.hpp"

namespace in2out {

template <class S>
double mse(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mse: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.numel());
}

/// 10*log10(1/MSE) for [0,1] pixel data, capped at 100 dB near zero error.
template <class S>
double psnr(const Tensor<S>& yhat, const Tensor<S>& y) {
  const double m = mse(yhat, y);
  if (m < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / m);
}

namespace detail {

inline const std::vector<double>& ssim_window() {  // 11x11 Gaussian, sigma 1.5
  static const std::vector<double> w = [] {
    constexpr int k = 11;
    constexpr double sigma = 1.5;
    std::vector<double> win(k * k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const double di = i - (k - 1) / 2.0, dj = j - (k - 1) / 2.0;
        win[i * k + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
        sum += win[i * k + j];
      }
    for (double& v : win) v /= sum;
    return win;
  }();
  return w;
}

/// ITU-R 601 luminance plane of one frame, H*W doubles.
template <class S>
std::vector<double> luminance(const Tensor<S>& video, std::int64_t b, std::int64_t t) {
  const std::int64_t H = video.dim(3), W = video.dim(4);
  std::vector<double> y(static_cast<std::size_t>(H * W));
  for (std::int64_t h = 0; h < H; ++h)
    for (std::int64_t w = 0; w < W; ++w)
      y[static_cast<std::size_t>(h * W + w)] = 0.299 * double(video[video.index5(b, t, 0, h, w)]) +
                                               0.587 * double(video[video.index5(b, t, 1, h, w)]) +
                                               0.114 * double(video[video.index5(b, t, 2, h, w)]);
  return y;
}

}  // namespace detail

/// Mean SSIM over frames: 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, L=1, luminance channel, windows fully inside the frame.
template <class S>
double ssim(const Tensor<S>& yhat, const Tensor<S>& y) {
  if (!yhat.same_shape(y))
    throw std::invalid_argument("ssim: shape mismatch " + shape_str(yhat.shape()) + " vs " +
                                shape_str(y.shape()));
  yhat.require_ndim(5, "ssim");
  if (yhat.dim(2) != 3) throw std::invalid_argument("ssim: expected 3 channels");
  constexpr int k = 11;
  const std::int64_t B = yhat.dim(0), T = yhat.dim(1), H = yhat.dim(3), W = yhat.dim(4);
  if (H < k || W < k)
    throw std::invalid_argument("ssim: frame " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than the " + std::to_string(k) + "-pixel window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*L)^2 with L=1
  const auto& win = detail::ssim_window();
  double frame_acc = 0.0;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t) {
      const auto ya = detail::luminance(yhat, b, t);
      const auto yb = detail::luminance(y, b, t);
      double acc = 0.0;
      std::int64_t count = 0;
      for (std::int64_t h0 = 0; h0 + k <= H; ++h0)
        for (std::int64_t w0 = 0; w0 + k <= W; ++w0) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double wt = win[i * k + j];
              const double va = ya[static_cast<std::size_t>((h0 + i) * W + (w0 + j))];
              const double vb = yb[static_cast<std::size_t>((h0 + i) * W + (w0 + j))];
              ma += wt * va;
              mb += wt * vb;
              saa += wt * va * va;
              sbb += wt * vb * vb;
              sab += wt * va * vb;
            }
          const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
          acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++count;
        }
      frame_acc += acc / static_cast<double>(count);
    }
  return frame_acc / static_cast<double>(B * T);
}

// ---- Fréchet distance ------------------------------------------------------

struct FeatureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

namespace detail {

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = std::sqrt(std::max(lam[i], 0.0));
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), computed through the
/// symmetric form sqrt(sqrt(S1) S2 sqrt(S1)). Clamped at 0.
inline double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows() ||
      a.sigma.cols() != a.sigma.rows() || b.sigma.cols() != b.sigma.rows())
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  const Eigen::VectorXd d = a.mu - b.mu;
  const Eigen::MatrixXd s1h = detail::psd_sqrt(a.sigma);
  const Eigen::MatrixXd cross = detail::psd_sqrt(s1h * b.sigma * s1h);
  const double val = d.squaredNorm() + (a.sigma + b.sigma).trace() - 2.0 * cross.trace();
  return std::max(val, 0.0);
}

// ---- feature extraction ----------------------------------------------------

using FeatureExtractor = std::function<std::vector<double>(const VideoTensor<float>&)>;

/// Fixed seed for the bundled random-weight extractor; changing it would
/// change every stored fvd number, so it is part of the repo contract.
inline constexpr std::uint64_t kFeatureExtractorSeed = 0x1337fe;

/// Random-weight 3-layer 3-D conv stack (the FEM topology, spectral norm
/// off) followed by global average pooling to 128 features.
inline FeatureExtractor default_feature_extractor() {
  struct Net {
    ParamStore<float> params;
    std::unique_ptr<Discriminator<float>> disc;
  };
  auto net = std::make_shared<Net>();
  DiscConfig cfg = DiscConfig::defaults();
  cfg.spectral_norm = false;
  Rng rng(kFeatureExtractorSeed);
  net->disc = std::make_unique<Discriminator<float>>(cfg, net->params, "fx.", rng);
  return [net](const VideoTensor<float>& clip) {
    clip.validate();
    Var<float> feats = net->disc->fem_forward(Var<float>::constant(clip.data), false, true);
    const Tensor<float>& f = feats.value();
    const std::int64_t C = f.dim(2);
    std::vector<double> pooled(static_cast<std::size_t>(C), 0.0);
    const std::int64_t per_channel = f.dim(0) * f.dim(1) * f.dim(3) * f.dim(4);
    for (std::int64_t b = 0; b < f.dim(0); ++b)
      for (std::int64_t t = 0; t < f.dim(1); ++t)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t h = 0; h < f.dim(3); ++h)
            for (std::int64_t w = 0; w < f.dim(4); ++w)
              pooled[static_cast<std::size_t>(c)] += double(f[f.index5(b, t, c, h, w)]);
    for (double& v : pooled) v /= static_cast<double>(per_channel);
    return pooled;
  };
}

/// Mean and unbiased covariance of feature rows (>= 2 rows required).
inline FeatureStats stats_from_features(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2)
    throw std::invalid_argument("feature stats: need >= 2 clips, got " + std::to_string(rows.size()));
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  for (const auto& r : rows)
    if (static_cast<Eigen::Index>(r.size()) != d)
      throw std::invalid_argument("feature stats: ragged feature rows");
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  FeatureStats st;
  st.mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - st.mu.transpose();
  st.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
  return st;
}

struct NamedClip {
  std::string clip_id;
  VideoTensor<float> video;
};

/// Pooled-feature stats over clips, reduced in clip_id order so the result
/// is independent of input ordering.
inline FeatureStats video_feature_stats(const FeatureExtractor& extract,
                                        std::vector<const NamedClip*> clips) {
  if (clips.size() < 2)
    throw std::invalid_argument("video_feature_stats: need >= 2 clips, got " +
                                std::to_string(clips.size()));
  std::sort(clips.begin(), clips.end(),
            [](const NamedClip* a, const NamedClip* b) { return a->clip_id < b->clip_id; });
  std::vector<std::vector<double>> rows;
  rows.reserve(clips.size());
  for (const NamedClip* c : clips) rows.push_back(extract(c->video));
  return stats_from_features(rows);
}

inline FeatureStats video_feature_stats(const FeatureExtractor& extract,
                                        const std::vector<NamedClip>& clips) {
  std::vector<const NamedClip*> ptrs;
  ptrs.reserve(clips.size());
  for (const auto& c : clips) ptrs.push_back(&c);
  return video_feature_stats(extract, std::move(ptrs));
}

/// External feature dump: a 2-D `.vten` tensor, one row per clip.
inline std::vector<std::vector<double>> load_feature_dump(const std::filesystem::path& path) {
  const Tensor<float> t = load_fixture(path);
  if (t.ndim() != 2)
    throw std::runtime_error("feature dump must be 2-D (clips x features): " + path.string());
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(t.dim(0)));
  for (std::int64_t i = 0; i < t.dim(0); ++i) {
    rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(t.dim(1)));
    for (std::int64_t j = 0; j < t.dim(1); ++j)
      rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(t[i * t.dim(1) + j]);
  }
  return rows;
}

// ---- report ----------------------------------------------------------------

enum class EvalRegion { whole, out_band };

inline std::string eval_region_name(EvalRegion r) {
  return r == EvalRegion::whole ? "whole" : "out_band";
}

inline EvalRegion parse_eval_region(const std::string& s) {
  if (s == "whole") return EvalRegion::whole;
  if (s == "band" || s == "out_band") return EvalRegion::out_band;
  throw std::invalid_argument("unknown eval region '" + s + "' (expected whole|band)");
}

struct ClipMetrics {
  std::string clip_id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<ClipMetrics> per_clip;  // sorted by clip_id
  double aggregate_psnr = 0.0;        // mean of per-clip values
  double aggregate_ssim = 0.0;
  double fvd = 0.0;
  double mask_ratio = 0.0;
  EvalRegion region = EvalRegion::whole;

  void finalize_aggregates() {
    if (per_clip.empty()) throw std::logic_error("MetricsReport: no per-clip entries");
    std::sort(per_clip.begin(), per_clip.end(),
              [](const ClipMetrics& a, const ClipMetrics& b) { return a.clip_id < b.clip_id; });
    double p = 0, s = 0;
    for (const auto& c : per_clip) {
      p += c.psnr;
      s += c.ssim;
    }
    aggregate_psnr = p / static_cast<double>(per_clip.size());
    aggregate_ssim = s / static_cast<double>(per_clip.size());
  }
};

}  // namespace in2out
