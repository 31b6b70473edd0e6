#pragma once

// Reverse-mode automatic differentiation over Tensor<S>. A Var is a handle to
// a graph node holding a value, a gradient buffer and a backward closure.
// backward() on a scalar root zeroes the gradients of the touched subgraph,
// seeds the root with 1 and propagates in reverse topological order.
//
// Gradient contracts are verified against central finite differences in the
// test suite; every new op needs such a check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "in2out/tensor.hpp"

namespace in2out {

template <class S>
struct VarNode {
  Tensor<S> value;
  Tensor<S> grad;  // sized on demand during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<VarNode<S>>> parents;
  std::function<void(VarNode<S>&)> backward_fn;
  const char* op = "leaf";

  void ensure_grad() {
    if (!grad.same_shape(value)) grad = Tensor<S>(value.shape());
  }
  void zero_grad() { grad = Tensor<S>(value.shape()); }
};

template <class S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<VarNode<S>> n) : node_(std::move(n)) {}

  static Var leaf(Tensor<S> value, bool requires_grad) {
    auto n = std::make_shared<VarNode<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }
  static Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

  bool valid() const { return node_ != nullptr; }
  const Tensor<S>& value() const { return node_->value; }
  Tensor<S>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() const { node_->zero_grad(); }
  const std::shared_ptr<VarNode<S>>& node() const { return node_; }

  /// Same value, cut off from the graph.
  Var detach() const { return constant(node_->value); }

  /// Reverse pass from a scalar root.
  void backward() const {
    if (node_->value.numel() != 1)
      throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(node_->value.shape()));
    std::vector<VarNode<S>*> topo;
    std::unordered_set<VarNode<S>*> seen;
    std::vector<std::pair<VarNode<S>*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, i] = stack.back();
      if (i < n->parents.size()) {
        VarNode<S>* p = n->parents[i++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        topo.push_back(n);
        stack.pop_back();
      }
    }
    for (VarNode<S>* n : topo) n->zero_grad();
    node_->grad[0] = S(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      VarNode<S>* n = *it;
      if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
  }

 private:
  std::shared_ptr<VarNode<S>> node_;
};

namespace detail {

template <class S>
std::shared_ptr<VarNode<S>> make_node(Tensor<S> value, std::vector<Var<S>> parents, const char* op) {
  auto n = std::make_shared<VarNode<S>>();
  n->value = std::move(value);
  n->op = op;
  n->parents.reserve(parents.size());
  for (const auto& p : parents) {
    n->parents.push_back(p.node());
    n->requires_grad = n->requires_grad || p.requires_grad();
  }
  return n;
}

template <class S>
void accumulate(VarNode<S>& parent, std::int64_t i, S g) {
  parent.ensure_grad();
  parent.grad[i] += g;
}

}  // namespace detail

template <class S>
double scalar_value(const Var<S>& v) {
  if (v.value().numel() != 1) throw std::invalid_argument("scalar_value: tensor is not scalar");
  return static_cast<double>(v.value()[0]);
}

template <class S>
Var<S> scalar_var(S v) {
  return Var<S>::constant(Tensor<S>({1}, std::vector<S>{v}));
}

// ---- elementwise -----------------------------------------------------------

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.value().shape()) + " vs " +
                                shape_str(b.value().shape()));
  Tensor<S> out(a.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto n = detail::make_node<S>(std::move(out), {a, b}, "add");
  n->backward_fn = [](VarNode<S>& self) {
    for (int p = 0; p < 2; ++p) {
      auto& par = *self.parents[p];
      if (!par.requires_grad) continue;
      par.ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) par.grad[i] += self.grad[i];
    }
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("sub: shape mismatch " + shape_str(a.value().shape()) + " vs " +
                                shape_str(b.value().shape()));
  Tensor<S> out(a.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto n = detail::make_node<S>(std::move(out), {a, b}, "sub");
  n->backward_fn = [](VarNode<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) pb.grad[i] -= self.grad[i];
    }
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("mul: shape mismatch");
  Tensor<S> out(a.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto n = detail::make_node<S>(std::move(out), {a, b}, "mul");
  n->backward_fn = [](VarNode<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  };
  return Var<S>(std::move(n));
}

/// y = m*x + c, elementwise with scalar m, c.
template <class S>
Var<S> affine(const Var<S>& x, S m, S c) {
  Tensor<S> out(x.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = m * x.value()[i] + c;
  auto n = detail::make_node<S>(std::move(out), {x}, "affine");
  n->backward_fn = [m](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += m * self.grad[i];
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> scale(const Var<S>& x, S m) {
  return affine(x, m, S(0));
}

template <class S>
Var<S> relu(const Var<S>& x) {
  Tensor<S> out(x.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] > S(0) ? x.value()[i] : S(0);
  auto n = detail::make_node<S>(std::move(out), {x}, "relu");
  n->backward_fn = [](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    // subgradient at 0 is the negative-side slope, i.e. 0
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      if (p.value[i] > S(0)) p.grad[i] += self.grad[i];
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> leaky_relu(const Var<S>& x, S slope) {
  Tensor<S> out(x.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = x.value()[i] > S(0) ? x.value()[i] : slope * x.value()[i];
  auto n = detail::make_node<S>(std::move(out), {x}, "leaky_relu");
  n->backward_fn = [slope](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += (p.value[i] > S(0) ? S(1) : slope) * self.grad[i];
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> sigmoid(const Var<S>& x) {
  Tensor<S> out(x.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = S(1) / (S(1) + std::exp(-x.value()[i]));
  auto n = detail::make_node<S>(std::move(out), {x}, "sigmoid");
  n->backward_fn = [](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
      const S y = self.value[i];
      p.grad[i] += y * (S(1) - y) * self.grad[i];
    }
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> abs_op(const Var<S>& x) {
  Tensor<S> out(x.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(x.value()[i]);
  auto n = detail::make_node<S>(std::move(out), {x}, "abs");
  n->backward_fn = [](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
      if (p.value[i] > S(0))
        p.grad[i] += self.grad[i];
      else if (p.value[i] < S(0))
        p.grad[i] -= self.grad[i];
    }
  };
  return Var<S>(std::move(n));
}

// ---- reductions ------------------------------------------------------------

template <class S>
Var<S> sum_all(const Var<S>& x) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.value().numel(); ++i) acc += static_cast<double>(x.value()[i]);
  auto n = detail::make_node<S>(Tensor<S>({1}, std::vector<S>{static_cast<S>(acc)}), {x}, "sum_all");
  n->backward_fn = [](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const S g = self.grad[0];
    for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  };
  return Var<S>(std::move(n));
}

template <class S>
Var<S> mean_all(const Var<S>& x) {
  const std::int64_t n_el = x.value().numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n_el; ++i) acc += static_cast<double>(x.value()[i]);
  auto n = detail::make_node<S>(Tensor<S>({1}, std::vector<S>{static_cast<S>(acc / double(n_el))}),
                                {x}, "mean_all");
  n->backward_fn = [n_el](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const S g = self.grad[0] / static_cast<S>(n_el);
    for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  };
  return Var<S>(std::move(n));
}

/// Single element of a tensor as a scalar Var.
template <class S>
Var<S> element(const Var<S>& x, std::int64_t flat_index) {
  if (flat_index < 0 || flat_index >= x.value().numel())
    throw std::out_of_range("element: index out of range");
  auto n = detail::make_node<S>(Tensor<S>({1}, std::vector<S>{x.value()[flat_index]}), {x}, "element");
  n->backward_fn = [flat_index](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad[flat_index] += self.grad[0];
  };
  return Var<S>(std::move(n));
}

// ---- structural ops on (B,T,C,H,W) tensors ---------------------------------

/// Gather the given width columns (kept in the given order).
template <class S>
Var<S> select_cols(const Var<S>& x, std::vector<std::int64_t> cols) {
  x.value().require_ndim(5, "select_cols");
  const auto& v = x.value();
  const std::int64_t B = v.dim(0), T = v.dim(1), C = v.dim(2), H = v.dim(3), W = v.dim(4);
  for (auto c : cols)
    if (c < 0 || c >= W) throw std::out_of_range("select_cols: column out of range");
  const std::int64_t Wc = static_cast<std::int64_t>(cols.size());
  Tensor<S> out({B, T, C, H, Wc});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t h = 0; h < H; ++h)
          for (std::int64_t i = 0; i < Wc; ++i)
            out.at5(b, t, c, h, i) = v.at5(b, t, c, h, cols[static_cast<std::size_t>(i)]);
  auto n = detail::make_node<S>(std::move(out), {x}, "select_cols");
  n->backward_fn = [cols = std::move(cols), B, T, C, H](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::int64_t Wc = static_cast<std::int64_t>(cols.size());
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t i = 0; i < Wc; ++i)
              p.grad[p.value.index5(b, t, c, h, cols[static_cast<std::size_t>(i)])] +=
                  self.grad[self.value.index5(b, t, c, h, i)];
  };
  return Var<S>(std::move(n));
}

/// Frames [t0, t1) of a (B,T,C,H,W) tensor.
template <class S>
Var<S> slice_frames(const Var<S>& x, std::int64_t t0, std::int64_t t1) {
  x.value().require_ndim(5, "slice_frames");
  const auto& v = x.value();
  if (t0 < 0 || t1 > v.dim(1) || t0 >= t1) throw std::out_of_range("slice_frames: bad range");
  const std::int64_t B = v.dim(0), C = v.dim(2), H = v.dim(3), W = v.dim(4);
  Tensor<S> out({B, t1 - t0, C, H, W});
  const std::int64_t chw = C * H * W;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = t0; t < t1; ++t)
      std::copy_n(v.data() + v.index5(b, t, 0, 0, 0), chw, out.data() + out.index5(b, t - t0, 0, 0, 0));
  auto n = detail::make_node<S>(std::move(out), {x}, "slice_frames");
  n->backward_fn = [t0, t1, chw, B](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t t = t0; t < t1; ++t) {
        const S* src = self.grad.data() + self.value.index5(b, t - t0, 0, 0, 0);
        S* dst = p.grad.data() + p.value.index5(b, t, 0, 0, 0);
        for (std::int64_t i = 0; i < chw; ++i) dst[i] += src[i];
      }
  };
  return Var<S>(std::move(n));
}

/// Nearest-neighbour 2x spatial upsampling.
template <class S>
Var<S> upsample_nearest2x(const Var<S>& x) {
  x.value().require_ndim(5, "upsample_nearest2x");
  const auto& v = x.value();
  const std::int64_t B = v.dim(0), T = v.dim(1), C = v.dim(2), H = v.dim(3), W = v.dim(4);
  Tensor<S> out({B, T, C, 2 * H, 2 * W});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t h = 0; h < 2 * H; ++h)
          for (std::int64_t w = 0; w < 2 * W; ++w)
            out.at5(b, t, c, h, w) = v.at5(b, t, c, h / 2, w / 2);
  auto n = detail::make_node<S>(std::move(out), {x}, "upsample_nearest2x");
  n->backward_fn = [B, T, C, H, W](VarNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t h = 0; h < 2 * H; ++h)
            for (std::int64_t w = 0; w < 2 * W; ++w)
              p.grad[p.value.index5(b, t, c, h / 2, w / 2)] +=
                  self.grad[self.value.index5(b, t, c, h, w)];
  };
  return Var<S>(std::move(n));
}

/// mean(|a - b|); the L1 workhorse.
template <class S>
Var<S> l1_mean(const Var<S>& a, const Var<S>& b) {
  return mean_all(abs_op(sub(a, b)));
}

}  // namespace in2out
