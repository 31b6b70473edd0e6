#pragma once

// On-disk formats: clip directories (manifest.json + frames/00000.png ...)
// and .vten tensor fixtures (magic "VTEN1", u32-LE axis count and lengths,
// f32-LE row-major payload).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "in2out/detail/png.hpp"
#include "in2out/tensor.hpp"

namespace in2out {

namespace fs = std::filesystem;

struct ClipManifest {
  std::string clip_id;
  int width = 0;
  int height = 0;
  int frame_count = 0;
  double fps = 24.0;
};

inline fs::path manifest_path(const fs::path& clip_dir) { return clip_dir / "manifest.json"; }

inline fs::path frame_path(const fs::path& clip_dir, int index) {
  char name[16];
  std::snprintf(name, sizeof(name), "%05d.png", index);
  return clip_dir / "frames" / name;
}

inline void save_manifest(const fs::path& clip_dir, const ClipManifest& m) {
  nlohmann::json j{{"clip_id", m.clip_id},
                   {"width", m.width},
                   {"height", m.height},
                   {"frame_count", m.frame_count},
                   {"fps", m.fps}};
  std::ofstream f(manifest_path(clip_dir), std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + manifest_path(clip_dir).string());
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("write failed: " + manifest_path(clip_dir).string());
}

inline ClipManifest load_manifest(const fs::path& clip_dir) {
  const fs::path p = manifest_path(clip_dir);
  std::ifstream f(p);
  if (!f) throw std::runtime_error("missing manifest: " + p.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest " + p.string() + ": " + e.what());
  }
  ClipManifest m;
  m.clip_id = j.at("clip_id").get<std::string>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.frame_count = j.at("frame_count").get<int>();
  m.fps = j.at("fps").get<double>();
  return m;
}

/// Load a clip directory into a (1,T,3,H,W) pixel tensor with values in [0,1].
inline VideoTensor<float> load_clip(const fs::path& clip_dir) {
  const ClipManifest m = load_manifest(clip_dir);
  if (m.frame_count < 1) throw std::runtime_error("clip has no frames: " + clip_dir.string());

  Tensor<float> t({1, m.frame_count, 3, m.height, m.width});
  for (int fi = 0; fi < m.frame_count; ++fi) {
    const fs::path p = frame_path(clip_dir, fi);
    if (!fs::exists(p))
      throw std::runtime_error("frame count mismatch: missing " + p.string());
    const detail::Image img = detail::read_png(p);
    if (img.width != m.width || img.height != m.height)
      throw std::runtime_error("frame size mismatch in " + p.string() + ": got " +
                               std::to_string(img.width) + "x" + std::to_string(img.height) +
                               ", manifest says " + std::to_string(m.width) + "x" +
                               std::to_string(m.height));
    for (int h = 0; h < m.height; ++h)
      for (int w = 0; w < m.width; ++w)
        for (int c = 0; c < 3; ++c)
          t.at5(0, fi, c, h, w) = static_cast<float>(img.rgb[(h * m.width + w) * 3 + c]) / 255.0f;
  }
  if (fs::exists(frame_path(clip_dir, m.frame_count)))
    throw std::runtime_error("frame count mismatch: extra frames beyond manifest in " + clip_dir.string());
  return VideoTensor<float>(std::move(t), Space::pixel);
}

/// Quantize a (1,T,3,H,W) pixel tensor to 8-bit frames and write a clip directory.
inline void save_clip(const fs::path& clip_dir, const VideoTensor<float>& v,
                      const std::string& clip_id, double fps = 24.0) {
  if (v.space != Space::pixel) throw std::invalid_argument("save_clip: pixel-space tensor required");
  if (v.batches() != 1 || v.channels() != 3)
    throw std::invalid_argument("save_clip: expected shape (1,T,3,H,W), got " + shape_str(v.data.shape()));

  std::error_code ec;
  fs::create_directories(clip_dir / "frames", ec);
  if (ec) throw std::runtime_error("cannot create clip directory " + clip_dir.string() + ": " + ec.message());

  const int T = static_cast<int>(v.frames()), H = static_cast<int>(v.height()), W = static_cast<int>(v.width());
  detail::Image img;
  img.width = W;
  img.height = H;
  img.rgb.resize(static_cast<std::size_t>(W) * H * 3);
  for (int fi = 0; fi < T; ++fi) {
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        for (int c = 0; c < 3; ++c) {
          const float x = v.data.at5(0, fi, c, h, w);
          const int q = static_cast<int>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
          img.rgb[(h * W + w) * 3 + c] = static_cast<unsigned char>(q);
        }
    detail::write_png(frame_path(clip_dir, fi), img);
  }
  save_manifest(clip_dir, ClipManifest{clip_id, W, H, T, fps});
}

inline constexpr char kFixtureMagic[5] = {'V', 'T', 'E', 'N', '1'};

inline void save_fixture(const fs::path& path, const Tensor<float>& t) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write fixture " + path.string());
  f.write(kFixtureMagic, 5);
  const auto put_u32 = [&f](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_u32(static_cast<std::uint32_t>(t.dim(i)));
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(t.data()), t.numel() * 4);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline Tensor<float> load_fixture(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open fixture " + path.string());
  char magic[5];
  if (!f.read(magic, 5) || std::memcmp(magic, kFixtureMagic, 5) != 0)
    throw std::runtime_error("fixture magic mismatch: " + path.string());
  const auto get_u32 = [&f, &path]() {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
      throw std::runtime_error("truncated fixture header: " + path.string());
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  };
  const std::uint32_t ndim = get_u32();
  if (ndim == 0 || ndim > 16) throw std::runtime_error("fixture has implausible axis count: " + path.string());
  Shape shape(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<std::int64_t>(get_u32());
  Tensor<float> t(shape);
  if (!f.read(reinterpret_cast<char*>(t.data()), t.numel() * 4))
    throw std::runtime_error("truncated fixture payload: " + path.string());
  f.peek();
  if (!f.eof()) throw std::runtime_error("fixture has trailing bytes: " + path.string());
  return t;
}

/// Clip subdirectories of a dataset root, sorted by name.
inline std::vector<fs::path> list_clip_dirs(const fs::path& root) {
  if (!fs::exists(root)) throw std::runtime_error("dataset root does not exist: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(manifest_path(e.path()))) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace in2out
