#pragma once

// Synthetic ground-truth video: flat-colored rectangles and circles sliding
// horizontally (constant integer velocity, wrap-around) over a static
// horizontal-gradient background with a little fixed noise. Designed so that
// band-region artifacts are obvious: shapes keep crossing the lateral bands,
// and every rendered pixel is reproducible bit-for-bit from the seed.
//
// The background and the shape set consume independent RNG streams, so a
// clip rendered with n_shapes=0 has the exact background of its shaped twin —
// handy for isolating shape pixels by subtraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "in2out/rng.hpp"
#include "in2out/tensor.hpp"
#include "in2out/tensorio.hpp"

namespace in2out {

struct SynthSpec {
  std::int64_t n_clips = 4;
  std::int64_t frames = 25;
  std::int64_t width = 96;
  std::int64_t height = 56;
  std::int64_t n_shapes = 3;
  std::int64_t velocity_range = 3;  // max |vx| in pixels/frame
  std::uint64_t seed = 1;

  void validate() const {
    if (width < 24) throw std::invalid_argument("SynthSpec: width must be >= 24");
    if (height < 8) throw std::invalid_argument("SynthSpec: height must be >= 8");
    if (n_clips < 1 || frames < 1) throw std::invalid_argument("SynthSpec: need clips and frames >= 1");
    if (n_shapes < 0 || velocity_range < 0)
      throw std::invalid_argument("SynthSpec: shapes and velocity must be >= 0");
  }
};

struct SynthShape {
  enum class Kind { rect, circle };
  Kind kind = Kind::rect;
  double cx = 0, cy = 0;        // center at frame 0, pixel units
  double half_w = 4, half_h = 3;  // rect half extents; circles use half_w as radius
  double vx = 0, vy = 0;        // pixels per frame
  std::array<double, 3> color{1, 0, 0};
};

namespace detail {

inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

/// Pixel-center coverage test for one shape copy centered at (cx, cy).
inline bool covers(const SynthShape& s, double cx, double cy, std::int64_t h, std::int64_t w) {
  const double px = static_cast<double>(w) + 0.5, py = static_cast<double>(h) + 0.5;
  if (s.kind == SynthShape::Kind::rect)
    return std::abs(px - cx) <= s.half_w && std::abs(py - cy) <= s.half_h;
  const double dx = px - cx, dy = py - cy;
  return dx * dx + dy * dy <= s.half_w * s.half_w;
}

}  // namespace detail

/// Horizontal two-color gradient plus fixed low-amplitude noise, (3,H,W)
/// flattened into a (1,1,3,H,W) video frame tensor reused for every frame.
inline Tensor<float> make_background(std::int64_t width, std::int64_t height, Rng& rng) {
  std::array<double, 3> cl, cr;
  for (int c = 0; c < 3; ++c) cl[static_cast<std::size_t>(c)] = rng.uniform(0.15, 0.85);
  for (int c = 0; c < 3; ++c) cr[static_cast<std::size_t>(c)] = rng.uniform(0.15, 0.85);
  constexpr double kNoise = 0.02;
  Tensor<float> bg({1, 1, 3, height, width});
  for (std::int64_t h = 0; h < height; ++h)
    for (std::int64_t w = 0; w < width; ++w) {
      const double u = width > 1 ? static_cast<double>(w) / static_cast<double>(width - 1) : 0.0;
      const double noise = rng.uniform(-kNoise, kNoise);
      for (std::int64_t c = 0; c < 3; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const double v = cl[ci] + (cr[ci] - cl[ci]) * u + noise;
        bg.at5(0, 0, c, h, w) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return bg;
}

inline std::vector<SynthShape> random_shapes(std::int64_t n, std::int64_t width,
                                             std::int64_t height, std::int64_t velocity_range,
                                             Rng& rng) {
  std::vector<SynthShape> shapes;
  const double hue0 = rng.uniform();
  const double max_half = std::max(2.0, static_cast<double>(std::min(width, height)) / 6.0);
  for (std::int64_t i = 0; i < n; ++i) {
    SynthShape s;
    s.kind = rng.below(2) == 0 ? SynthShape::Kind::rect : SynthShape::Kind::circle;
    s.half_w = rng.uniform(2.0, max_half);
    s.half_h = s.kind == SynthShape::Kind::rect ? rng.uniform(2.0, max_half) : s.half_w;
    s.cx = rng.uniform(0.0, static_cast<double>(width));
    const double margin = (s.kind == SynthShape::Kind::rect ? s.half_h : s.half_w) + 1.0;
    s.cy = rng.uniform(margin, std::max(margin + 1.0, static_cast<double>(height) - margin));
    if (velocity_range >= 1) {
      // integer speed >= 1, random direction: keeps motion band-crossing and
      // rendered translation pixel-exact
      const auto speed = static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(velocity_range)));
      s.vx = rng.below(2) == 0 ? speed : -speed;
    }
    s.vy = 0.0;
    // golden-ratio hue stepping keeps colors pairwise distinct
    s.color = detail::hsv_to_rgb(std::fmod(hue0 + 0.61803398875 * static_cast<double>(i), 1.0),
                                 0.8, 0.9);
    shapes.push_back(s);
  }
  return shapes;
}

/// Paint one frame: background copy, then shapes in order (later on top),
/// each drawn three times at x offsets {-W, 0, +W} for wrap-around.
inline void render_frame(Tensor<float>& frame, std::int64_t t, const Tensor<float>& background,
                         const std::vector<SynthShape>& shapes) {
  const std::int64_t H = frame.dim(3), W = frame.dim(4);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w)
        frame.at5(0, 0, c, h, w) = background.at5(0, 0, c, h, w);
  for (const auto& s : shapes) {
    const double cx = std::fmod(std::fmod(s.cx + s.vx * static_cast<double>(t),
                                          static_cast<double>(W)) + static_cast<double>(W),
                                static_cast<double>(W));
    const double cy = s.cy + s.vy * static_cast<double>(t);
    const double reach = std::max(s.half_w, s.half_h) + 1.0;
    for (std::int64_t h = std::max<std::int64_t>(0, static_cast<std::int64_t>(cy - reach));
         h < std::min(H, static_cast<std::int64_t>(cy + reach) + 1); ++h)
      for (std::int64_t w = 0; w < W; ++w)
        for (const double off : {-static_cast<double>(W), 0.0, static_cast<double>(W)})
          if (detail::covers(s, cx + off, cy, h, w)) {
            for (std::int64_t c = 0; c < 3; ++c)
              frame.at5(0, 0, c, h, w) = static_cast<float>(s.color[static_cast<std::size_t>(c)]);
            break;
          }
  }
}

/// Render a full clip from explicit background and shapes.
inline VideoTensor<float> render_clip(std::int64_t frames, const Tensor<float>& background,
                                      const std::vector<SynthShape>& shapes) {
  const std::int64_t H = background.dim(3), W = background.dim(4);
  VideoTensor<float> clip;
  clip.data = Tensor<float>({1, frames, 3, H, W});
  clip.space = Space::pixel;
  Tensor<float> frame({1, 1, 3, H, W});
  for (std::int64_t t = 0; t < frames; ++t) {
    render_frame(frame, t, background, shapes);
    std::copy_n(frame.data(), frame.numel(), clip.data.data() + clip.data.index5(0, t, 0, 0, 0));
  }
  return clip;
}

/// Deterministic per-clip rendering: background and shapes drawn from
/// independent streams of the clip sub-seed.
inline VideoTensor<float> render_clip_for_index(const SynthSpec& spec, std::int64_t clip_index) {
  const std::uint64_t clip_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(clip_index));
  Rng bg_rng(derive_seed(clip_seed, 1));
  Rng shape_rng(derive_seed(clip_seed, 2));
  const Tensor<float> bg = make_background(spec.width, spec.height, bg_rng);
  const auto shapes =
      random_shapes(spec.n_shapes, spec.width, spec.height, spec.velocity_range, shape_rng);
  return render_clip(spec.frames, bg, shapes);
}

inline std::string synth_clip_id(std::int64_t clip_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05lld", static_cast<long long>(clip_index));
  return buf;
}

/// Write the whole dataset as clip directories under out_root; returns the
/// clip paths in index order.
inline std::vector<std::filesystem::path> generate_dataset(const SynthSpec& spec,
                                                           const std::filesystem::path& out_root) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_root, ec);
  if (ec) throw std::runtime_error("cannot create dataset root " + out_root.string() + ": " + ec.message());
  std::vector<std::filesystem::path> dirs;
  for (std::int64_t i = 0; i < spec.n_clips; ++i) {
    const VideoTensor<float> clip = render_clip_for_index(spec, i);
    const std::filesystem::path dir = out_root / synth_clip_id(i);
    save_clip(dir, clip, synth_clip_id(i));
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace in2out
