#pragma once

// Training objectives. Discriminator side: hinge losses over logit/feature
// maps, with the fake-local term restricted to the outpainted bands. Generator
// side: band/center L1 reconstruction, adversarial push on the global logits,
// optional flow hook, weighted total.
//
// Every expectation reduces as the arithmetic mean over all tensor elements.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "in2out/autodiff.hpp"
#include "in2out/masking.hpp"

namespace in2out {

struct LossWeights {
  double lambda_rec = 1.0;
  double lambda_valid = 1.0;
  double lambda_adv = 0.04;
  double lambda_flow = 0.01;
  double alpha_local = 0.5;
  double alpha_global = 0.5;

  static LossWeights e2fgvi_profile() { return LossWeights{}; }
  static LossWeights propainter_profile() {
    LossWeights w;
    w.lambda_adv = 0.01;
    w.lambda_flow = 1.0;
    return w;
  }

  void validate() const {
    for (double v : {lambda_rec, lambda_valid, lambda_adv, lambda_flow, alpha_local, alpha_global})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("LossWeights: all weights must be finite and >= 0");
  }
};

/// Per-iteration scalar summary, serialized into the training log.
struct LossReport {
  double d_loss = 0.0;
  double out_loss_real_local = 0.0;
  double out_loss_real_global = 0.0;
  double out_loss_fake_local = 0.0;
  double out_loss_fake_global = 0.0;
  double adv = 0.0;
  double rec_hole = 0.0;
  double rec_valid = 0.0;
  double flow = 0.0;
  double total_g = 0.0;

  std::map<std::string, double> as_map() const {
    return {{"d_loss", d_loss},
            {"out_loss_real_local", out_loss_real_local},
            {"out_loss_real_global", out_loss_real_global},
            {"out_loss_fake_local", out_loss_fake_local},
            {"out_loss_fake_global", out_loss_fake_global},
            {"adv", adv},
            {"rec_hole", rec_hole},
            {"rec_valid", rec_valid},
            {"flow", flow},
            {"total_g", total_g}};
  }

  void require_finite() const {
    for (const auto& [k, v] : as_map())
      if (!std::isfinite(v)) throw std::runtime_error("LossReport: non-finite value for " + k);
  }
};

/// mean(ReLU(1 - t)) — zero when every logit is confidently real ( >= 1 ).
template <class S>
Var<S> hinge_real(const Var<S>& t) {
  return mean_all(relu(affine(t, S(-1), S(1))));
}

/// mean(ReLU(1 + t)) — zero when every logit is confidently fake ( <= -1 ).
template <class S>
Var<S> hinge_fake(const Var<S>& t) {
  return mean_all(relu(affine(t, S(1), S(1))));
}

/// Plain T-PatchGAN discriminator objective on final logits.
template <class S>
Var<S> disc_loss_global(const Var<S>& x_logits, const Var<S>& z_logits) {
  return add(hinge_real(x_logits), hinge_fake(z_logits));
}

/// Band columns of a differentiable (B,T,C,H,W) map, left block then right.
template <class S>
Var<S> out_extract_var(const Var<S>& x, double ratio) {
  x.value().require_ndim(5, "out_extract_var");
  const OutBands bands = OutBands::from(ratio, x.value().dim(4));
  return select_cols(x, bands.all());
}

template <class S>
struct OutpaintingLossTerms {
  Var<S> real_local;
  Var<S> real_global;
  Var<S> fake_local;  // hinge over band columns of z_local only
  Var<S> fake_global;
  Var<S> total;
};

/// The hierarchical discriminator objective:
///   alpha_local * [ hinge_real(x_local) + hinge_fake(Out(z_local)) ]
/// + alpha_global * [ hinge_real(x_global) + hinge_fake(z_global) ].
/// The real local term sees the full feature map; the fake local term sees
/// only the band columns, selected at feature-map resolution from `ratio`.
template <class S>
OutpaintingLossTerms<S> outpainting_loss(const Var<S>& x_local, const Var<S>& x_global,
                                         const Var<S>& z_local, const Var<S>& z_global,
                                         double ratio, double alpha_local, double alpha_global) {
  OutpaintingLossTerms<S> t;
  t.real_local = hinge_real(x_local);
  t.real_global = hinge_real(x_global);
  t.fake_local = hinge_fake(out_extract_var(z_local, ratio));
  t.fake_global = hinge_fake(z_global);
  t.total = add(scale(add(t.real_local, t.fake_local), static_cast<S>(alpha_local)),
                scale(add(t.real_global, t.fake_global), static_cast<S>(alpha_global)));
  return t;
}

/// Generator adversarial term: -mean(z_global), pushing logits up toward
/// "real". `literal_printed_form` drops the minus for the sign-flipped
/// variant (which instead pushes logits down); see the training config.
template <class S>
Var<S> adv_gen_loss(const Var<S>& z_global, bool literal_printed_form = false) {
  Var<S> m = mean_all(z_global);
  return literal_printed_form ? m : scale(m, S(-1));
}

template <class S>
struct RecLoss {
  Var<S> hole;   // L1 over band columns
  Var<S> valid;  // L1 over center columns
};

/// Mean absolute error split by the band/center partition the mask ratio
/// induces at the tensors' own pixel width. Shapes must match.
template <class S>
RecLoss<S> rec_loss(const Var<S>& yhat, const Var<S>& y, double ratio) {
  if (!yhat.value().same_shape(y.value()))
    throw std::invalid_argument("rec_loss: shape mismatch " + shape_str(yhat.value().shape()) +
                                " vs " + shape_str(y.value().shape()));
  yhat.value().require_ndim(5, "rec_loss");
  const std::int64_t width = yhat.value().dim(4);
  const auto band_cols = OutBands::from(ratio, width).all();
  const auto center_cols = center_columns(ratio, width);
  RecLoss<S> r;
  r.hole = l1_mean(select_cols(yhat, band_cols), select_cols(y, band_cols));
  r.valid = l1_mean(select_cols(yhat, center_cols), select_cols(y, center_cols));
  return r;
}

/// lambda_rec*hole + lambda_valid*valid + lambda_adv*adv + lambda_flow*flow.
template <class S>
Var<S> total_gen_loss(const Var<S>& rec_hole, const Var<S>& rec_valid, const Var<S>& adv,
                      const Var<S>& flow, const LossWeights& w) {
  Var<S> total = scale(rec_hole, static_cast<S>(w.lambda_rec));
  total = add(total, scale(rec_valid, static_cast<S>(w.lambda_valid)));
  total = add(total, scale(adv, static_cast<S>(w.lambda_adv)));
  total = add(total, scale(flow, static_cast<S>(w.lambda_flow)));
  return total;
}

}  // namespace in2out
