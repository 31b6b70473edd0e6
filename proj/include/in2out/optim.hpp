#pragma once

// Named parameter storage, Adam, and spectral weight normalization.
//
// Parameters live in a name-sorted map so every traversal (updates,
// serialization, gradient zeroing) happens in one fixed order — this is part
// of the bitwise-reproducibility story, not a style choice.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "in2out/autodiff.hpp"
#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

template <class S>
class ParamStore {
 public:
  Var<S>& add(const std::string& name, Tensor<S> init) {
    auto [it, fresh] = params_.emplace(name, Var<S>::leaf(std::move(init), true));
    if (!fresh) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    return it->second;
  }

  Var<S>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
  }
  const Var<S>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grads() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Var<S>> params_;
};

/// Gaussian fan-in init for conv weights (He et al. style).
template <class S>
Tensor<S> kaiming_init(const Shape& shape, Rng& rng) {
  std::int64_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor<S> t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.gaussian() * std_dev);
  return t;
}

struct AdamConfig {
  double lr = 4e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a ParamStore. Moment buffers are created
/// lazily per parameter; the step counter is shared across the store.
template <class S>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamStore<S>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
      Tensor<S>& g = p.grad();
      if (!g.all_finite())
        throw std::runtime_error("adam: non-finite gradient for parameter '" + name + "'");
      Tensor<S>& value = const_cast<Tensor<S>&>(p.value());
      auto mit = m_.find(name);
      if (mit == m_.end()) {
        mit = m_.emplace(name, Tensor<S>(value.shape())).first;
        v_.emplace(name, Tensor<S>(value.shape()));
      }
      Tensor<S>& m = mit->second;
      Tensor<S>& v = v_.at(name);
      for (std::int64_t i = 0; i < value.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        value[i] = static_cast<S>(static_cast<double>(value[i]) -
                                  cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // checkpoint access
  std::map<std::string, Tensor<S>>& moment1() { return m_; }
  std::map<std::string, Tensor<S>>& moment2() { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Tensor<S>> m_;
  std::map<std::string, Tensor<S>> v_;
  std::int64_t t_ = 0;
};

/// Persistent power-iteration vectors for one weight matrix.
template <class S>
struct SpectralState {
  Tensor<S> u;  // left singular vector estimate, length rows
  Tensor<S> v;  // right singular vector estimate, length cols

  static SpectralState init(std::int64_t rows, std::int64_t cols, Rng& rng) {
    SpectralState st{Tensor<S>({rows}), Tensor<S>({cols})};
    auto fill_unit = [&rng](Tensor<S>& t) {
      double norm2 = 0.0;
      for (std::int64_t i = 0; i < t.numel(); ++i) {
        t[i] = static_cast<S>(rng.gaussian());
        norm2 += static_cast<double>(t[i]) * static_cast<double>(t[i]);
      }
      const S inv = static_cast<S>(1.0 / std::sqrt(norm2 > 0 ? norm2 : 1.0));
      for (std::int64_t i = 0; i < t.numel(); ++i) t[i] *= inv;
    };
    fill_unit(st.u);
    fill_unit(st.v);
    return st;
  }
};

/// w / σ̂(w) where σ̂ is the power-iteration spectral-norm estimate of w
/// viewed as (dim0 × rest). When `update` is set, one power-iteration step
/// refreshes state.u/state.v first. u and v are treated as constants in the
/// backward pass (the usual spectral-norm convention), giving
///   grad_w = (g − <g, w̃> · u vᵀ) / σ̂.
/// A degenerate σ̂ < eps returns w unchanged.
template <class S>
Var<S> spectral_normalize(const Var<S>& w, SpectralState<S>& state, bool update,
                          double eps = 1e-12) {
  const Tensor<S>& wt = w.value();
  if (wt.ndim() < 2) throw std::invalid_argument("spectral_normalize: need >= 2 axes");
  const std::int64_t rows = wt.dim(0);
  const std::int64_t cols = wt.numel() / rows;
  if (state.u.numel() != rows || state.v.numel() != cols)
    throw std::invalid_argument("spectral_normalize: state size mismatch for shape " +
                                shape_str(wt.shape()));

  auto matvec = [&](const Tensor<S>& vec, Tensor<S>& out) {  // out = W v
    for (std::int64_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      const S* row = wt.data() + r * cols;
      for (std::int64_t c = 0; c < cols; ++c) acc += double(row[c]) * double(vec[c]);
      out[r] = static_cast<S>(acc);
    }
  };
  auto mat_t_vec = [&](const Tensor<S>& vec, Tensor<S>& out) {  // out = Wᵀ u
    for (std::int64_t c = 0; c < cols; ++c) out[c] = S(0);
    for (std::int64_t r = 0; r < rows; ++r) {
      const S* row = wt.data() + r * cols;
      const double ur = double(vec[r]);
      for (std::int64_t c = 0; c < cols; ++c) out[c] += static_cast<S>(ur * double(row[c]));
    }
  };
  auto normalize = [eps](Tensor<S>& t) {
    double norm2 = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i) norm2 += double(t[i]) * double(t[i]);
    const double norm = std::sqrt(norm2);
    if (norm < eps) return;
    const S inv = static_cast<S>(1.0 / norm);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] *= inv;
  };

  if (update) {
    Tensor<S> tmp_v({cols}), tmp_u({rows});
    mat_t_vec(state.u, tmp_v);
    normalize(tmp_v);
    state.v = tmp_v;
    matvec(state.v, tmp_u);
    normalize(tmp_u);
    state.u = tmp_u;
  }

  Tensor<S> wv({rows});
  matvec(state.v, wv);
  double sigma = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) sigma += double(state.u[r]) * double(wv[r]);
  if (!(sigma >= eps)) return w;

  Tensor<S> out(wt.shape());
  const S inv_sigma = static_cast<S>(1.0 / sigma);
  for (std::int64_t i = 0; i < wt.numel(); ++i) out[i] = wt[i] * inv_sigma;

  auto n = detail::make_node<S>(std::move(out), {w}, "spectral_normalize");
  // copy u,v so later power iterations don't disturb a pending backward
  n->backward_fn = [u = state.u, v = state.v, inv_sigma, rows, cols](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double dot = 0.0;  // <g, w̃>
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      dot += double(self.grad[i]) * double(self.value[i]);
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c) {
        const std::int64_t i = r * cols + c;
        p.grad[i] += static_cast<S>((double(self.grad[i]) - dot * double(u[r]) * double(v[c])) *
                                    double(inv_sigma));
      }
  };
  return Var<S>(std::move(n));
}

/// Power-iteration spectral-norm estimate of an arbitrary tensor (dim0 × rest).
template <class S>
double spectral_norm_estimate(const Tensor<S>& w, Rng& rng, int iterations = 50) {
  const std::int64_t rows = w.dim(0);
  const std::int64_t cols = w.numel() / rows;
  auto st = SpectralState<S>::init(rows, cols, rng);
  Var<S> wv = Var<S>::constant(w);
  for (int i = 0; i < iterations; ++i) spectral_normalize(wv, st, true);
  // one more matvec for the current sigma
  double sigma = 0.0;
  std::vector<double> tmp(static_cast<std::size_t>(rows), 0.0);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      tmp[static_cast<std::size_t>(r)] += double(w[r * cols + c]) * double(st.v[c]);
  for (std::int64_t r = 0; r < rows; ++r) sigma += double(st.u[r]) * tmp[static_cast<std::size_t>(r)];
  return sigma;
}

}  // namespace in2out
