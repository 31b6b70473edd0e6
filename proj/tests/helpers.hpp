#pragma once

// Shared test utilities: scratch directories, tensor filling, and the
// finite-difference gradient checker every autodiff op is held against.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "in2out/autodiff.hpp"
#include "in2out/discriminator.hpp"
#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"

namespace testutil {

/// Geometry-preserving copy of the default discriminator stack with most
/// channels removed, for tests where only kernel/stride layout matters.
inline in2out::DiscConfig thin_disc_config() {
  in2out::DiscConfig c = in2out::DiscConfig::defaults();
  auto set_ch = [](in2out::Conv3dSpec& sp, std::int64_t ci, std::int64_t co) {
    sp.in_channels = ci;
    sp.out_channels = co;
  };
  set_ch(c.fem_layers[0], 3, 8);
  set_ch(c.fem_layers[1], 8, 8);
  set_ch(c.fem_layers[2], 8, 8);
  set_ch(c.fcm_layers[0], 8, 8);
  set_ch(c.fcm_layers[1], 8, 8);
  set_ch(c.fcm_layers[2], 8, 1);
  return c;
}

namespace fs = std::filesystem;

/// Self-deleting scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

template <class S>
void fill_uniform(in2out::Tensor<S>& t, in2out::Rng& rng, double lo = 0.0, double hi = 1.0) {
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.uniform(lo, hi));
}

/// Max relative error between reverse-mode gradients and central finite
/// differences of a scalar-valued graph, over every element of every input.
/// `build` must construct the graph afresh from the given leaves each call.
inline double gradcheck(
    const std::function<in2out::Var<double>(std::vector<in2out::Var<double>>&)>& build,
    std::vector<in2out::Tensor<double>> inputs, double h = 1e-5) {
  using in2out::Tensor;
  using in2out::Var;

  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (auto& t : inputs) leaves.push_back(Var<double>::leaf(t, true));
  Var<double> y = build(leaves);
  y.backward();

  const auto eval = [&](const std::vector<Tensor<double>>& at) {
    std::vector<Var<double>> ls;
    ls.reserve(at.size());
    for (const auto& t : at) ls.push_back(Var<double>::leaf(t, false));
    return in2out::scalar_value(build(ls));
  };

  double worst = 0.0;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    for (std::int64_t i = 0; i < inputs[li].numel(); ++i) {
      std::vector<Tensor<double>> at = inputs;
      const double x0 = at[li][i];
      at[li][i] = x0 + h;
      const double fp = eval(at);
      at[li][i] = x0 - h;
      const double fm = eval(at);
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = leaves[li].grad()[i];
      const double denom = std::max({1.0, std::abs(fd), std::abs(ad)});
      worst = std::max(worst, std::abs(fd - ad) / denom);
    }
  }
  return worst;
}

}  // namespace testutil
