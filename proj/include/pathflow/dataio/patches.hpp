#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pathflow/dataio/image.hpp"
#include "pathflow/dataio/tissue.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/rng.hpp"
#include "pathflow/tensor.hpp"

namespace pathflow::dataio {

struct PatchSet {
  std::string slide_id;
  std::vector<Tensor4> patches;               // each (1, 3, p, p)
  std::vector<std::pair<int, int>> origins;   // (x, y) of the top-left corner
  bool with_replacement = false;
  int patch_size = 0;
};

// Uniform sampling of n patch origins whose patch center lies on tissue.
// Falls back to sampling with replacement when fewer than n valid positions
// exist. Deterministic for a fixed seed.
inline PatchSet extract_patches(const ImageRaster& img, const BoolRaster& mask,
                                const std::string& slide_id, int n, int p,
                                std::uint64_t seed) {
  if (n < 1) throw ConfigError("extract_patches: n must be >= 1");
  if (p < 1 || p > img.width || p > img.height)
    throw ConfigError("extract_patches: patch size " + std::to_string(p) +
                      " exceeds image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height));
  if (mask.width != img.width || mask.height != img.height)
    throw DataError("extract_patches: mask/image size mismatch for slide '" + slide_id + "'");

  // valid origins in raster order; patch [x, x+p) x [y, y+p), center at (x+p/2, y+p/2)
  std::vector<std::pair<int, int>> valid;
  for (int y = 0; y + p <= img.height; ++y)
    for (int x = 0; x + p <= img.width; ++x)
      if (mask.at(y + p / 2, x + p / 2)) valid.emplace_back(x, y);

  if (valid.empty())
    throw DataError("no tissue found in slide '" + slide_id + "'");

  PatchSet out;
  out.slide_id = slide_id;
  out.patch_size = p;
  Rng rng(seed);
  if (valid.size() >= static_cast<std::size_t>(n)) {
    // partial Fisher-Yates: draw n distinct origins
    for (int i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(valid.size() - i));
      std::swap(valid[i], valid[j]);
      out.origins.push_back(valid[i]);
    }
  } else {
    out.with_replacement = true;
    for (int i = 0; i < n; ++i)
      out.origins.push_back(valid[static_cast<std::size_t>(rng.below(valid.size()))]);
  }

  out.patches.reserve(out.origins.size());
  for (const auto& [ox, oy] : out.origins) {
    Tensor4 t(1, 3, p, p);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x) t.at(0, c, y, x) = img.at(c, oy + y, ox + x);
    out.patches.push_back(std::move(t));
  }
  return out;
}

// PatchSet cache file: little-endian, magic "PFPS", u32 version=1, u32 n,
// u32 p, n patches as fp32 CHW planes, n (u32 x, u32 y) origins, u8 flag.
inline void write_patchset(const PatchSet& ps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write patch cache: " + path);
  auto put_u32 = [&out](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("PFPS", 4);
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(ps.patches.size()));
  put_u32(static_cast<std::uint32_t>(ps.patch_size));
  for (const auto& t : ps.patches) {
    std::vector<float> f(t.v.begin(), t.v.end());
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
  for (const auto& [x, y] : ps.origins) {
    put_u32(static_cast<std::uint32_t>(x));
    put_u32(static_cast<std::uint32_t>(y));
  }
  const unsigned char flag = ps.with_replacement ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&flag), 1);
  if (!out) throw DataError("patch cache write failed: " + path);
}

inline PatchSet read_patchset(const std::string& path, const std::string& slide_id = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open patch cache: " + path);
  auto get_u32 = [&in, &path]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("truncated patch cache: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PFPS", 4) != 0)
    throw DataError("bad patch cache magic: " + path);
  if (get_u32() != 1) throw DataError("unsupported patch cache version: " + path);
  const std::uint32_t n = get_u32();
  const std::uint32_t p = get_u32();

  PatchSet ps;
  ps.slide_id = slide_id;
  ps.patch_size = static_cast<int>(p);
  std::vector<float> f(static_cast<std::size_t>(3) * p * p);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!in) throw DataError("truncated patch cache: " + path);
    Tensor4 t(1, 3, static_cast<int>(p), static_cast<int>(p));
    for (std::size_t k = 0; k < f.size(); ++k) t.v[k] = f[k];
    ps.patches.push_back(std::move(t));
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(get_u32());
    const int y = static_cast<int>(get_u32());
    ps.origins.emplace_back(x, y);
  }
  unsigned char flag = 0;
  in.read(reinterpret_cast<char*>(&flag), 1);
  if (!in) throw DataError("truncated patch cache: " + path);
  ps.with_replacement = flag != 0;
  return ps;
}

}  // namespace pathflow::dataio
