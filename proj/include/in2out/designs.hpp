#pragma once

// The discriminator-design ablation axis. Each design bundles discriminator
// construction with its two loss adapters (discriminator step, generator
// adversarial term) so the trainer is design-agnostic:
//
//   none               no discriminator at all, adversarial term zero
//   global_tpatch      full video in, hinge on final logits only
//   partial_only       band-extracted video in, hinge on final logits
//   global_and_partial both of the above as independent nets, losses averaged
//   local_only         full video in, hinge on FEM features (bands for fakes)
//   hierarchical       full pipeline: local + global terms, alpha-weighted

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "in2out/discriminator.hpp"
#include "in2out/losses.hpp"
#include "in2out/masking.hpp"
#include "in2out/optim.hpp"
#include "in2out/rng.hpp"

namespace in2out {

enum class DesignKind { none, global_tpatch, partial_only, global_and_partial, local_only, hierarchical };

inline const std::vector<DesignKind>& all_design_kinds() {
  static const std::vector<DesignKind> kinds{DesignKind::none,
                                            DesignKind::global_tpatch,
                                            DesignKind::partial_only,
                                            DesignKind::global_and_partial,
                                            DesignKind::local_only,
                                            DesignKind::hierarchical};
  return kinds;
}

inline std::string design_kind_name(DesignKind k) {
  switch (k) {
    case DesignKind::none: return "none";
    case DesignKind::global_tpatch: return "global_tpatch";
    case DesignKind::partial_only: return "partial_only";
    case DesignKind::global_and_partial: return "global_and_partial";
    case DesignKind::local_only: return "local_only";
    case DesignKind::hierarchical: return "hierarchical";
  }
  throw std::logic_error("design_kind_name: bad enum");
}

/// Human-facing row label for results tables.
inline std::string design_kind_label(DesignKind k) {
  switch (k) {
    case DesignKind::none: return "None";
    case DesignKind::global_tpatch: return "Global";
    case DesignKind::partial_only: return "Partial-only";
    case DesignKind::global_and_partial: return "Global & partial";
    case DesignKind::local_only: return "Local-only";
    case DesignKind::hierarchical: return "Hierarchical";
  }
  throw std::logic_error("design_kind_label: bad enum");
}

inline DesignKind parse_design_kind(const std::string& s) {
  for (DesignKind k : all_design_kinds())
    if (design_kind_name(k) == s) return k;
  throw std::invalid_argument("unknown discriminator design '" + s +
                              "' (expected one of: none, global_tpatch, partial_only, "
                              "global_and_partial, local_only, hierarchical)");
}

/// Scalar breakdown of one discriminator step (values, not graph nodes).
struct DesignLossBreakdown {
  double real_local = 0.0;
  double real_global = 0.0;
  double fake_local = 0.0;
  double fake_global = 0.0;
};

template <class S>
struct DiscStepLoss {
  Var<S> loss;  // invalid when the design has no discriminator
  DesignLossBreakdown parts;
};

template <class S>
class DesignBundle {
 public:
  DesignBundle(DesignKind kind, DiscConfig config, std::uint64_t seed)
      : kind_(kind), config_(std::move(config)) {
    config_.validate();
    if (kind_ == DesignKind::none) return;
    if (kind_ != DesignKind::partial_only) {
      Rng rng(derive_seed(seed, 0xd15c0));
      main_ = std::make_unique<Discriminator<S>>(config_, params_, "d.", rng);
    }
    if (kind_ == DesignKind::partial_only || kind_ == DesignKind::global_and_partial) {
      Rng rng(derive_seed(seed, 0xd15c1));
      partial_ = std::make_unique<Discriminator<S>>(config_, params_, "dp.", rng);
    }
  }

  DesignKind kind() const { return kind_; }
  bool has_discriminator() const { return kind_ != DesignKind::none; }
  ParamStore<S>& params() { return params_; }
  Discriminator<S>* main_disc() { return main_.get(); }
  Discriminator<S>* partial_disc() { return partial_.get(); }

  /// Discriminator objective on a real clip and an already-detached fake.
  /// `update_sn` refreshes each net's power-iteration state once (on the real
  /// forward); the fake forward reuses the refreshed estimate.
  DiscStepLoss<S> disc_loss(const Var<S>& real, const Var<S>& fake, double ratio,
                            double alpha_local, double alpha_global, bool update_sn) {
    DiscStepLoss<S> out;
    switch (kind_) {
      case DesignKind::none:
        return out;
      case DesignKind::global_tpatch: {
        Var<S> xg = main_->forward(real, update_sn).global;
        Var<S> zg = main_->forward(fake).global;
        Var<S> hr = hinge_real(xg), hf = hinge_fake(zg);
        out.loss = add(hr, hf);
        out.parts.real_global = scalar_value(hr);
        out.parts.fake_global = scalar_value(hf);
        return out;
      }
      case DesignKind::partial_only: {
        Var<S> xg = partial_->forward(out_extract_var(real, ratio), update_sn).global;
        Var<S> zg = partial_->forward(out_extract_var(fake, ratio)).global;
        Var<S> hr = hinge_real(xg), hf = hinge_fake(zg);
        out.loss = add(hr, hf);
        out.parts.real_global = scalar_value(hr);
        out.parts.fake_global = scalar_value(hf);
        return out;
      }
      case DesignKind::global_and_partial: {
        Var<S> xg = main_->forward(real, update_sn).global;
        Var<S> zg = main_->forward(fake).global;
        Var<S> xp = partial_->forward(out_extract_var(real, ratio), update_sn).global;
        Var<S> zp = partial_->forward(out_extract_var(fake, ratio)).global;
        Var<S> hr = scale(add(hinge_real(xg), hinge_real(xp)), S(0.5));
        Var<S> hf = scale(add(hinge_fake(zg), hinge_fake(zp)), S(0.5));
        out.loss = add(hr, hf);
        out.parts.real_global = scalar_value(hr);
        out.parts.fake_global = scalar_value(hf);
        return out;
      }
      case DesignKind::local_only: {
        Var<S> xl = main_->fem_forward(real, update_sn);
        Var<S> zl = main_->fem_forward(fake);
        Var<S> hr = hinge_real(xl);
        Var<S> hf = hinge_fake(out_extract_var(zl, ratio));
        out.loss = add(hr, hf);
        out.parts.real_local = scalar_value(hr);
        out.parts.fake_local = scalar_value(hf);
        return out;
      }
      case DesignKind::hierarchical: {
        DiscFeatures<S> x = main_->forward(real, update_sn);
        DiscFeatures<S> z = main_->forward(fake);
        auto terms = outpainting_loss(x.local, x.global, z.local, z.global, ratio, alpha_local,
                                      alpha_global);
        out.loss = terms.total;
        out.parts.real_local = scalar_value(terms.real_local);
        out.parts.real_global = scalar_value(terms.real_global);
        out.parts.fake_local = scalar_value(terms.fake_local);
        out.parts.fake_global = scalar_value(terms.fake_global);
        return out;
      }
    }
    throw std::logic_error("disc_loss: bad design enum");
  }

  /// Adversarial generator term through frozen discriminator parameters
  /// (gradient flows to the fake video only). Zero for the no-discriminator
  /// design. `literal_printed_form` flips the sign convention.
  Var<S> gen_adv_loss(const Var<S>& fake, double ratio, bool literal_printed_form) {
    switch (kind_) {
      case DesignKind::none:
        return scalar_var<S>(S(0));
      case DesignKind::global_tpatch:
        return adv_gen_loss(main_->forward(fake, false, true).global, literal_printed_form);
      case DesignKind::partial_only:
        return adv_gen_loss(partial_->forward(out_extract_var(fake, ratio), false, true).global,
                            literal_printed_form);
      case DesignKind::global_and_partial: {
        Var<S> a = adv_gen_loss(main_->forward(fake, false, true).global, literal_printed_form);
        Var<S> b = adv_gen_loss(
            partial_->forward(out_extract_var(fake, ratio), false, true).global,
            literal_printed_form);
        return scale(add(a, b), S(0.5));
      }
      case DesignKind::local_only:
        return adv_gen_loss(out_extract_var(main_->fem_forward(fake, false, true), ratio),
                            literal_printed_form);
      case DesignKind::hierarchical:
        return adv_gen_loss(main_->forward(fake, false, true).global, literal_printed_form);
    }
    throw std::logic_error("gen_adv_loss: bad design enum");
  }

  /// Spectral-norm power-iteration states of every member net, keyed by
  /// parameter name (for checkpointing).
  std::vector<std::pair<std::string, SpectralState<S>*>> spectral_states() {
    std::vector<std::pair<std::string, SpectralState<S>*>> out;
    for (Discriminator<S>* d : {main_.get(), partial_.get()})
      if (d)
        for (auto& [name, st] : d->spectral_states()) out.emplace_back(name, &st);
    return out;
  }

 private:
  DesignKind kind_;
  DiscConfig config_;
  ParamStore<S> params_;
  std::unique_ptr<Discriminator<S>> main_;
  std::unique_ptr<Discriminator<S>> partial_;
};

}  // namespace in2out
