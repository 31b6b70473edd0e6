#pragma once

// Mask-ratio geometry. A ratio m over width W defines two lateral bands of
// band = floor(m*W/2) columns each: the region to outpaint. The same rule is
// applied directly at feature resolution (band from the feature-map width).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

struct MaskSpec {
  double ratio = 0.25;
  std::int64_t width = 0;

  void validate() const {
    if (!(ratio > 0.0 && ratio < 1.0))
      throw std::invalid_argument("mask ratio must lie in (0,1), got " + std::to_string(ratio));
    if (width < 1) throw std::invalid_argument("mask width must be positive");
  }
};

/// Columns per lateral band: floor(m*W/2).
inline std::int64_t band_width(double ratio, std::int64_t width) {
  MaskSpec{ratio, width}.validate();
  return static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(width) / 2.0));
}

struct OutBands {
  std::vector<std::int64_t> left, right;

  std::int64_t band() const { return static_cast<std::int64_t>(left.size()); }

  // left and right band columns followed by nothing else; order matches the
  // width-concatenated extraction layout
  std::vector<std::int64_t> all() const {
    std::vector<std::int64_t> cols = left;
    cols.insert(cols.end(), right.begin(), right.end());
    return cols;
  }

  static OutBands from(double ratio, std::int64_t width) {
    const std::int64_t b = band_width(ratio, width);
    if (b < 1)
      throw std::invalid_argument("empty band: ratio " + std::to_string(ratio) + " at width " +
                                  std::to_string(width));
    if (2 * b > width) throw std::invalid_argument("bands overlap: 2*band exceeds width");
    OutBands out;
    out.left.resize(b);
    out.right.resize(b);
    for (std::int64_t i = 0; i < b; ++i) {
      out.left[i] = i;
      out.right[i] = width - b + i;
    }
    return out;
  }
};

inline std::vector<std::int64_t> center_columns(double ratio, std::int64_t width) {
  const std::int64_t b = band_width(ratio, width);
  std::vector<std::int64_t> cols;
  cols.reserve(width - 2 * b);
  for (std::int64_t i = b; i < width - b; ++i) cols.push_back(i);
  return cols;
}

/// Binary mask of shape (1,T,1,H,W): 1 on band columns (region to generate),
/// 0 elsewhere; constant across frames and rows.
template <class S>
VideoTensor<S> make_mask(const MaskSpec& spec, std::int64_t frames, std::int64_t height) {
  const OutBands bands = OutBands::from(spec.ratio, spec.width);
  Tensor<S> t({1, frames, 1, height, spec.width});
  for (std::int64_t f = 0; f < frames; ++f)
    for (std::int64_t h = 0; h < height; ++h) {
      for (std::int64_t c : bands.left) t.at5(0, f, 0, h, c) = S(1);
      for (std::int64_t c : bands.right) t.at5(0, f, 0, h, c) = S(1);
    }
  return VideoTensor<S>(std::move(t), Space::pixel);
}

/// Restrict a 5-axis tensor to its lateral bands, concatenated along width.
template <class S>
Tensor<S> select_columns(const Tensor<S>& x, const std::vector<std::int64_t>& cols) {
  x.require_ndim(5, "select_columns");
  for (std::int64_t c : cols)
    if (c < 0 || c >= x.dim(4)) throw std::out_of_range("select_columns: column out of range");
  const std::int64_t B = x.dim(0), T = x.dim(1), C = x.dim(2), H = x.dim(3);
  Tensor<S> out({B, T, C, H, static_cast<std::int64_t>(cols.size())});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t h = 0; h < H; ++h)
          for (std::size_t i = 0; i < cols.size(); ++i)
            out.at5(b, t, c, h, static_cast<std::int64_t>(i)) = x.at5(b, t, c, h, cols[i]);
  return out;
}

template <class S>
Tensor<S> out_extract(const Tensor<S>& x, double ratio) {
  x.require_ndim(5, "out_extract");
  return select_columns(x, OutBands::from(ratio, x.dim(4)).all());
}

template <class S>
Tensor<S> center_extract(const Tensor<S>& x, double ratio) {
  x.require_ndim(5, "center_extract");
  OutBands::from(ratio, x.dim(4));  // validates band >= 1
  return select_columns(x, center_columns(ratio, x.dim(4)));
}

/// Zero the band columns of a pixel video and append the mask as an extra
/// channel (C -> C+1). Mask convention: 1 = to-generate.
template <class S>
VideoTensor<S> apply_mask(const VideoTensor<S>& video, const VideoTensor<S>& mask) {
  video.data.require_ndim(5, "apply_mask");
  mask.data.require_ndim(5, "apply_mask mask");
  const std::int64_t B = video.batches(), T = video.frames(), C = video.channels(),
                     H = video.height(), W = video.width();
  if (mask.batches() != B || mask.frames() != T || mask.channels() != 1 || mask.height() != H ||
      mask.width() != W)
    throw std::invalid_argument("apply_mask: mask shape " + shape_str(mask.data.shape()) +
                                " does not match video " + shape_str(video.data.shape()));
  Tensor<S> out({B, T, C + 1, H, W});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t h = 0; h < H; ++h)
        for (std::int64_t w = 0; w < W; ++w) {
          const S mv = mask.data.at5(b, t, 0, h, w);
          for (std::int64_t c = 0; c < C; ++c)
            out.at5(b, t, c, h, w) = mv != S(0) ? S(0) : video.data.at5(b, t, c, h, w);
          out.at5(b, t, C, h, w) = mv;
        }
  return VideoTensor<S>(std::move(out), Space::pixel);
}

/// Uniform ratio draw from [lo, hi].
inline double sample_ratio(double lo, double hi, Rng& rng) {
  if (!(lo > 0.0 && lo <= hi && hi < 1.0))
    throw std::invalid_argument("sample_ratio: need 0 < lo <= hi < 1, got [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
  if (lo == hi) return lo;
  return rng.uniform(lo, hi);
}

}  // namespace in2out
