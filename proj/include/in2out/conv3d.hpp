#pragma once

// Strided 3D convolution over (B,T,C,H,W) video tensors, differentiable wrt
// input, weights and bias. The forward pass lowers each input window to a
// column matrix (im2col) and runs one dense GEMM per call; the backward pass
// reuses the same lowering: grad_w = grad_out * col^T, grad_x = w^T * grad_out
// scattered back through col2im. Column buffers are rebuilt in the backward
// pass instead of cached, trading FLOPs for a flat memory profile.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "in2out/autodiff.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

struct Conv3dSpec {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t kt = 1, kh = 1, kw = 1;  // kernel extent (time, height, width)
  std::int64_t st = 1, sh = 1, sw = 1;  // stride
  std::int64_t pt = 0, ph = 0, pw = 0;  // zero padding per side

  void validate() const {
    if (in_channels < 1 || out_channels < 1)
      throw std::invalid_argument("Conv3dSpec: channels must be >= 1");
    if (kt < 1 || kh < 1 || kw < 1) throw std::invalid_argument("Conv3dSpec: kernel must be >= 1");
    if (st < 1 || sh < 1 || sw < 1) throw std::invalid_argument("Conv3dSpec: stride must be >= 1");
    if (pt < 0 || ph < 0 || pw < 0) throw std::invalid_argument("Conv3dSpec: padding must be >= 0");
  }

  std::int64_t kernel_volume() const { return in_channels * kt * kh * kw; }
  Shape weight_shape() const { return {out_channels, in_channels, kt, kh, kw}; }

  /// Output shape for a (B,T,C,H,W) input; throws if the kernel does not fit.
  Shape out_shape(const Shape& in) const {
    if (in.size() != 5) throw std::invalid_argument("Conv3dSpec: input must have 5 axes");
    if (in[2] != in_channels)
      throw std::invalid_argument("Conv3dSpec: expected " + std::to_string(in_channels) +
                                  " input channels, got " + std::to_string(in[2]));
    const std::int64_t to = (in[1] + 2 * pt - kt) / st + 1;
    const std::int64_t ho = (in[3] + 2 * ph - kh) / sh + 1;
    const std::int64_t wo = (in[4] + 2 * pw - kw) / sw + 1;
    if (in[1] + 2 * pt < kt || in[3] + 2 * ph < kh || in[4] + 2 * pw < kw)
      throw std::invalid_argument("Conv3dSpec: kernel does not fit input " + shape_str(in));
    return {in[0], to, out_channels, ho, wo};
  }
};

namespace detail {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower input windows to a (kernel_volume x n_windows) column matrix.
/// Windows are ordered (b, t_out, h_out, w_out); rows are (c_in, dt, dh, dw).
template <class S>
std::vector<S> im2col(const Tensor<S>& x, const Conv3dSpec& sp, const Shape& out) {
  const std::int64_t B = x.dim(0), T = x.dim(1), H = x.dim(3), W = x.dim(4);
  const std::int64_t To = out[1], Ho = out[3], Wo = out[4];
  const std::int64_t K = sp.kernel_volume();
  const std::int64_t N = B * To * Ho * Wo;
  std::vector<S> col(static_cast<std::size_t>(K * N), S(0));
  std::int64_t k = 0;
  for (std::int64_t ci = 0; ci < sp.in_channels; ++ci)
    for (std::int64_t dt = 0; dt < sp.kt; ++dt)
      for (std::int64_t dh = 0; dh < sp.kh; ++dh)
        for (std::int64_t dw = 0; dw < sp.kw; ++dw, ++k) {
          S* row = col.data() + k * N;
          std::int64_t n = 0;
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t to = 0; to < To; ++to) {
              const std::int64_t t = to * sp.st + dt - sp.pt;
              if (t < 0 || t >= T) {
                n += Ho * Wo;
                continue;
              }
              for (std::int64_t ho = 0; ho < Ho; ++ho) {
                const std::int64_t h = ho * sp.sh + dh - sp.ph;
                if (h < 0 || h >= H) {
                  n += Wo;
                  continue;
                }
                const S* src = x.data() + x.index5(b, t, ci, h, 0);
                for (std::int64_t wo = 0; wo < Wo; ++wo, ++n) {
                  const std::int64_t w = wo * sp.sw + dw - sp.pw;
                  if (w >= 0 && w < W) row[n] = src[w];
                }
              }
            }
        }
  return col;
}

/// Scatter-add a column-matrix gradient back onto the input gradient.
template <class S>
void col2im_add(const std::vector<S>& col, const Conv3dSpec& sp, const Shape& out, Tensor<S>& gx) {
  const std::int64_t B = gx.dim(0), T = gx.dim(1), H = gx.dim(3), W = gx.dim(4);
  const std::int64_t To = out[1], Ho = out[3], Wo = out[4];
  const std::int64_t N = B * To * Ho * Wo;
  std::int64_t k = 0;
  for (std::int64_t ci = 0; ci < sp.in_channels; ++ci)
    for (std::int64_t dt = 0; dt < sp.kt; ++dt)
      for (std::int64_t dh = 0; dh < sp.kh; ++dh)
        for (std::int64_t dw = 0; dw < sp.kw; ++dw, ++k) {
          const S* row = col.data() + k * N;
          std::int64_t n = 0;
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t to = 0; to < To; ++to) {
              const std::int64_t t = to * sp.st + dt - sp.pt;
              if (t < 0 || t >= T) {
                n += Ho * Wo;
                continue;
              }
              for (std::int64_t ho = 0; ho < Ho; ++ho) {
                const std::int64_t h = ho * sp.sh + dh - sp.ph;
                if (h < 0 || h >= H) {
                  n += Wo;
                  continue;
                }
                S* dst = gx.data() + gx.index5(b, t, ci, h, 0);
                for (std::int64_t wo = 0; wo < Wo; ++wo, ++n) {
                  const std::int64_t w = wo * sp.sw + dw - sp.pw;
                  if (w >= 0 && w < W) dst[w] += row[n];
                }
              }
            }
        }
}

/// (Cout x N) result matrix -> (B,To,Cout,Ho,Wo) tensor, adding bias if given.
template <class S>
Tensor<S> gather_conv_out(const std::vector<S>& out_mat, const S* bias, const Shape& out) {
  const std::int64_t B = out[0], To = out[1], Co = out[2], Ho = out[3], Wo = out[4];
  const std::int64_t N = B * To * Ho * Wo;
  Tensor<S> y(out);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t to = 0; to < To; ++to)
      for (std::int64_t c = 0; c < Co; ++c) {
        const S add = bias ? bias[c] : S(0);
        const S* src = out_mat.data() + c * N + (b * To + to) * Ho * Wo;
        S* dst = y.data() + y.index5(b, to, c, 0, 0);
        for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] = src[i] + add;
      }
  return y;
}

/// Inverse of gather_conv_out for gradients: tensor -> (Cout x N) matrix.
template <class S>
std::vector<S> scatter_conv_grad(const Tensor<S>& gy) {
  const std::int64_t B = gy.dim(0), To = gy.dim(1), Co = gy.dim(2), Ho = gy.dim(3), Wo = gy.dim(4);
  const std::int64_t N = B * To * Ho * Wo;
  std::vector<S> m(static_cast<std::size_t>(Co * N));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t to = 0; to < To; ++to)
      for (std::int64_t c = 0; c < Co; ++c) {
        const S* src = gy.data() + gy.index5(b, to, c, 0, 0);
        S* dst = m.data() + c * N + (b * To + to) * Ho * Wo;
        for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] = src[i];
      }
  return m;
}

}  // namespace detail

/// Differentiable conv3d. `bias` may be an invalid Var for a bias-free layer.
template <class S>
Var<S> conv3d(const Var<S>& x, const Var<S>& w, const Var<S>& bias, const Conv3dSpec& spec) {
  spec.validate();
  x.value().require_ndim(5, "conv3d input");
  if (w.value().shape() != spec.weight_shape())
    throw std::invalid_argument("conv3d: weight shape " + shape_str(w.value().shape()) +
                                " does not match spec " + shape_str(spec.weight_shape()));
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().shape() != Shape{spec.out_channels})
    throw std::invalid_argument("conv3d: bias shape " + shape_str(bias.value().shape()));

  const Shape out_sh = spec.out_shape(x.value().shape());
  const std::int64_t K = spec.kernel_volume();
  const std::int64_t N = out_sh[0] * out_sh[1] * out_sh[3] * out_sh[4];

  std::vector<S> col = detail::im2col(x.value(), spec, out_sh);
  std::vector<S> out_mat(static_cast<std::size_t>(spec.out_channels * N));
  {
    Eigen::Map<const detail::RowMat<S>> wm(w.value().data(), spec.out_channels, K);
    Eigen::Map<const detail::RowMat<S>> cm(col.data(), K, N);
    Eigen::Map<detail::RowMat<S>> om(out_mat.data(), spec.out_channels, N);
    om.noalias() = wm * cm;
  }
  Tensor<S> y = detail::gather_conv_out(out_mat, has_bias ? bias.value().data() : nullptr, out_sh);

  std::vector<Var<S>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  auto n = detail::make_node<S>(std::move(y), std::move(parents), "conv3d");
  n->backward_fn = [spec, out_sh, K, N, has_bias](VarNode<S>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    std::vector<S> gy_mat = detail::scatter_conv_grad(self.grad);
    Eigen::Map<const detail::RowMat<S>> gym(gy_mat.data(), spec.out_channels, N);
    if (pw.requires_grad) {
      pw.ensure_grad();
      std::vector<S> col = detail::im2col(px.value, spec, out_sh);
      Eigen::Map<const detail::RowMat<S>> cm(col.data(), K, N);
      Eigen::Map<detail::RowMat<S>> gwm(pw.grad.data(), spec.out_channels, K);
      gwm.noalias() += gym * cm.transpose();
    }
    if (px.requires_grad) {
      px.ensure_grad();
      std::vector<S> gcol(static_cast<std::size_t>(K * N));
      Eigen::Map<const detail::RowMat<S>> wm(pw.value.data(), spec.out_channels, K);
      Eigen::Map<detail::RowMat<S>> gcm(gcol.data(), K, N);
      gcm.noalias() = wm.transpose() * gym;
      detail::col2im_add(gcol, spec, out_sh, px.grad);
    }
    if (has_bias) {
      auto& pb = *self.parents[2];
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::int64_t c = 0; c < spec.out_channels; ++c) {
          S acc = S(0);
          const S* row = gy_mat.data() + c * N;
          for (std::int64_t i = 0; i < N; ++i) acc += row[i];
          pb.grad[c] += acc;
        }
      }
    }
  };
  return Var<S>(std::move(n));
}

}  // namespace in2out
