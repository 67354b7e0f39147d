#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "pathflow/errors.hpp"

namespace pathflow::dataio {

// 8-bit RGB raster scaled to [0,1], stored as three channel planes (CHW).
struct ImageRaster {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // 3 * height * width

  ImageRaster() = default;
  ImageRaster(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw DataError("ImageRaster: non-positive dimensions");
    values.assign(static_cast<std::size_t>(3) * w * h, 0.0);
  }

  double& at(int ch, int y, int x) {
    return values[(static_cast<std::size_t>(ch) * height + y) * width + x];
  }
  double at(int ch, int y, int x) const {
    return values[(static_cast<std::size_t>(ch) * height + y) * width + x];
  }
};

namespace detail {

inline ImageRaster from_rgb8(const std::vector<unsigned char>& rgb, int w, int h) {
  ImageRaster img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, y, x) = rgb[(static_cast<std::size_t>(y) * w + x) * 3 + ch] / 255.0;
  return img;
}

inline std::vector<unsigned char> to_rgb8(const ImageRaster& img) {
  std::vector<unsigned char> rgb(static_cast<std::size_t>(3) * img.width * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double v = img.at(ch, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  return rgb;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline ImageRaster decode_png(const std::string& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw DataError("cannot open image: " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
    throw DataError("not a PNG file: " + path);

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw DataError("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw DataError("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw DataError("corrupt or truncated PNG: " + path);

  png_init_io(ctx.png, ctx.fp);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  const int color_type = png_get_color_type(ctx.png, ctx.info);

  // normalize everything to 8-bit RGB
  if (bit_depth == 16) png_set_strip_16(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(ctx.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  if (png_get_rowbytes(ctx.png, ctx.info) != static_cast<std::size_t>(w) * 3)
    throw DataError("unsupported PNG layout: " + path);

  std::vector<unsigned char> rgb(static_cast<std::size_t>(3) * w * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);
  return from_rgb8(rgb, w, h);
}

inline void encode_png(const ImageRaster& img, const std::string& path) {
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw DataError("cannot write image: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw DataError("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw DataError("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw DataError("PNG write failed: " + path);

  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  auto rgb = to_rgb8(img);
  for (int y = 0; y < img.height; ++y)
    png_write_row(ctx.png, rgb.data() + static_cast<std::size_t>(y) * img.width * 3);
  png_write_end(ctx.png, nullptr);
}

inline ImageRaster decode_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError("not a binary PPM (P6): " + path);

  auto next_token = [&in, &path]() -> long {
    // skip whitespace and '#' comment lines
    for (;;) {
      int ch = in.peek();
      if (ch == '#') {
        std::string junk;
        std::getline(in, junk);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    long value = -1;
    in >> value;
    if (!in || value < 0) throw DataError("malformed PPM header: " + path);
    return value;
  };

  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (maxval != 255) throw DataError("unsupported PPM maxval (want 255): " + path);
  in.get();  // single whitespace after maxval

  std::vector<unsigned char> rgb(static_cast<std::size_t>(3) * w * h);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size()))
    throw DataError("truncated PPM: " + path);
  return from_rgb8(rgb, static_cast<int>(w), static_cast<int>(h));
}

inline void encode_ppm(const ImageRaster& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  auto rgb = to_rgb8(img);
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw DataError("PPM write failed: " + path);
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  for (auto& ch : tail) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return tail == suffix;
}

}  // namespace detail

inline ImageRaster decode_image(const std::string& path) {
  if (detail::has_suffix(path, ".png")) return detail::decode_png(path);
  if (detail::has_suffix(path, ".ppm")) return detail::decode_ppm(path);
  throw DataError("unsupported image format (want .png or .ppm): " + path);
}

inline void encode_image(const ImageRaster& img, const std::string& path) {
  if (detail::has_suffix(path, ".png")) return detail::encode_png(img, path);
  if (detail::has_suffix(path, ".ppm")) return detail::encode_ppm(img, path);
  throw DataError("unsupported image format (want .png or .ppm): " + path);
}

}  // namespace pathflow::dataio
