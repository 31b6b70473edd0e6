#pragma once

// Minimal 8-bit RGB PNG reader/writer on top of zlib. Writes color type 2,
// filter 0 scanlines; reads any non-interlaced 8-bit RGB file (all five
// scanline filters), which covers files produced by common tooling.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace in2out::detail {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // 3 bytes per pixel, row-major
};

inline void png_fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("png: " + path.string() + ": " + why);
}

inline void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

inline std::uint32_t get_u32_be(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void append_chunk(std::vector<unsigned char>& out, const char type[4],
                         const unsigned char* payload, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload, payload + len);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + len)));
  put_u32_be(out, crc);
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.width <= 0 || img.height <= 0 ||
      img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    png_fail(path, "invalid image buffer");

  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<unsigned char> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.rgb.begin() + y * stride, img.rgb.begin() + (y + 1) * stride);
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    png_fail(path, "deflate failed");
  comp.resize(comp_len);

  std::vector<unsigned char> out;
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);

  unsigned char ihdr[13];
  ihdr[0] = static_cast<unsigned char>(img.width >> 24);
  ihdr[1] = static_cast<unsigned char>(img.width >> 16);
  ihdr[2] = static_cast<unsigned char>(img.width >> 8);
  ihdr[3] = static_cast<unsigned char>(img.width);
  ihdr[4] = static_cast<unsigned char>(img.height >> 24);
  ihdr[5] = static_cast<unsigned char>(img.height >> 16);
  ihdr[6] = static_cast<unsigned char>(img.height >> 8);
  ihdr[7] = static_cast<unsigned char>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", comp.data(), comp.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) png_fail(path, "cannot open for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) png_fail(path, "write failed");
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

inline Image read_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) png_fail(path, "cannot open");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0) png_fail(path, "bad signature");

  Image img;
  std::vector<unsigned char> idat;
  bool saw_ihdr = false;
  std::size_t pos = 8;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t len = get_u32_be(&buf[pos]);
    if (pos + 12 + len > buf.size()) png_fail(path, "truncated chunk");
    const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
    const unsigned char* payload = &buf[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) png_fail(path, "bad IHDR");
      img.width = static_cast<int>(get_u32_be(payload));
      img.height = static_cast<int>(get_u32_be(payload + 4));
      const int depth = payload[8], color = payload[9], interlace = payload[12];
      if (depth != 8 || color != 2) png_fail(path, "unsupported format (need 8-bit RGB)");
      if (interlace != 0) png_fail(path, "interlaced PNG unsupported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || img.width <= 0 || img.height <= 0) png_fail(path, "missing IHDR");
  if (idat.empty()) png_fail(path, "missing IDAT");

  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<unsigned char> raw((stride + 1) * img.height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    png_fail(path, "inflate failed");

  img.rgb.resize(stride * img.height);
  std::vector<unsigned char> prev(stride, 0);
  for (int y = 0; y < img.height; ++y) {
    const unsigned char filter = raw[y * (stride + 1)];
    const unsigned char* src = &raw[y * (stride + 1) + 1];
    unsigned char* dst = &img.rgb[y * stride];
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= 3 ? dst[x - 3] : 0;  // left
      const int b = prev[x];                  // up
      const int c = x >= 3 ? prev[x - 3] : 0; // up-left
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: png_fail(path, "unknown scanline filter");
      }
      dst[x] = static_cast<unsigned char>(v & 0xff);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

}  // namespace in2out::detail
