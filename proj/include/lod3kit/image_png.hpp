#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/raster.hpp"

namespace lod3kit {

struct ImageRgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 3 bytes per pixel, row major

  ImageRgb8() = default;
  ImageRgb8(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}
  Rgb get(int x, int y) const {
    size_t i = (static_cast<size_t>(y) * width + x) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    size_t i = (static_cast<size_t>(y) * width + x) * 3;
    data[i] = c.r;
    data[i + 1] = c.g;
    data[i + 2] = c.b;
  }
};

struct ImageGray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageGray8() = default;
  ImageGray8(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}
};

struct ImageGray16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;

  ImageGray16() = default;
  ImageGray16(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}
};

struct ImageIndexed8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // palette indices
  std::vector<Rgb> palette;
};

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  explicit PngFile(const std::filesystem::path& p, const char* mode) {
    fp = std::fopen(p.string().c_str(), mode);
    if (!fp) throw std::runtime_error("cannot open " + p.string());
  }
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng read init failed");
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng write init failed");
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

}  // namespace detail

/// Reads any PNG as 8-bit RGB (palette / gray / alpha variants are
/// expanded or stripped).
inline ImageRgb8 read_png_rgb8(const std::filesystem::path& path) {
  detail::PngFile file(path, "rb");
  detail::PngReader r;
  ImageRgb8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("failed to read PNG " + path.string());
  png_init_io(r.png, file.fp);
  png_read_info(r.png, r.info);
  png_byte color_type = png_get_color_type(r.png, r.info);
  png_byte bit_depth = png_get_bit_depth(r.png, r.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);
  img.width = static_cast<int>(png_get_image_width(r.png, r.info));
  img.height = static_cast<int>(png_get_image_height(r.png, r.info));
  if (png_get_channels(r.png, r.info) != 3)
    throw std::runtime_error("unexpected channel count in " + path.string());
  img.data.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.data.data() + static_cast<size_t>(y) * img.width * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

inline void write_png_rgb8(const std::filesystem::path& path, const ImageRgb8& img) {
  detail::PngFile file(path, "wb");
  detail::PngWriter w;
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("failed to write PNG " + path.string());
  png_init_io(w.png, file.fp);
  png_set_compression_level(w.png, 6);
  png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

/// 16-bit grayscale, the lossless carrier for probability channels.
inline ImageGray16 read_png_gray16(const std::filesystem::path& path) {
  detail::PngFile file(path, "rb");
  detail::PngReader r;
  ImageGray16 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("failed to read PNG " + path.string());
  png_init_io(r.png, file.fp);
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(r.png, r.info) != 16)
    throw std::runtime_error(path.string() + " is not 16-bit grayscale");
  if (detail::host_is_little_endian()) png_set_swap(r.png);
  png_read_update_info(r.png, r.info);
  img.width = static_cast<int>(png_get_image_width(r.png, r.info));
  img.height = static_cast<int>(png_get_image_height(r.png, r.info));
  img.data.assign(static_cast<size_t>(img.width) * img.height, 0);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

inline void write_png_gray16(const std::filesystem::path& path, const ImageGray16& img) {
  detail::PngFile file(path, "wb");
  detail::PngWriter w;
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(img.data.data() + static_cast<size_t>(y) * img.width));
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("failed to write PNG " + path.string());
  png_init_io(w.png, file.fp);
  png_set_compression_level(w.png, 6);
  png_set_IHDR(w.png, w.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if (detail::host_is_little_endian()) png_set_swap(w.png);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

inline ImageGray8 read_png_gray8(const std::filesystem::path& path) {
  ImageRgb8 rgb = read_png_rgb8(path);
  ImageGray8 img(rgb.width, rgb.height);
  for (size_t i = 0; i < img.data.size(); ++i) {
    // integer Rec.601 luma
    img.data[i] = static_cast<std::uint8_t>(
        (299 * rgb.data[3 * i] + 587 * rgb.data[3 * i + 1] + 114 * rgb.data[3 * i + 2]) / 1000);
  }
  return img;
}

inline void write_png_gray8(const std::filesystem::path& path, const ImageGray8& img) {
  detail::PngFile file(path, "wb");
  detail::PngWriter w;
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width);
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("failed to write PNG " + path.string());
  png_init_io(w.png, file.fp);
  png_set_compression_level(w.png, 6);
  png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

/// Indexed PNG with an explicit palette; pixel bytes are palette indices
/// and survive a round trip unchanged.
inline void write_png_indexed(const std::filesystem::path& path, const ImageIndexed8& img) {
  if (img.palette.empty() || img.palette.size() > 256)
    throw std::invalid_argument("indexed PNG needs a 1..256 entry palette");
  detail::PngFile file(path, "wb");
  detail::PngWriter w;
  std::vector<png_color> pal(img.palette.size());
  for (size_t i = 0; i < img.palette.size(); ++i)
    pal[i] = {img.palette[i].r, img.palette[i].g, img.palette[i].b};
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width);
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("failed to write PNG " + path.string());
  png_init_io(w.png, file.fp);
  png_set_compression_level(w.png, 6);
  png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_PLTE(w.png, w.info, pal.data(), static_cast<int>(pal.size()));
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

inline ImageIndexed8 read_png_indexed(const std::filesystem::path& path) {
  detail::PngFile file(path, "rb");
  detail::PngReader r;
  ImageIndexed8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("failed to read PNG " + path.string());
  png_init_io(r.png, file.fp);
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_PALETTE)
    throw std::runtime_error(path.string() + " is not palette-indexed");
  if (png_get_bit_depth(r.png, r.info) < 8) png_set_packing(r.png);
  png_read_update_info(r.png, r.info);
  img.width = static_cast<int>(png_get_image_width(r.png, r.info));
  img.height = static_cast<int>(png_get_image_height(r.png, r.info));
  png_colorp pal = nullptr;
  int pal_size = 0;
  png_get_PLTE(r.png, r.info, &pal, &pal_size);
  for (int i = 0; i < pal_size; ++i)
    img.palette.push_back({pal[i].red, pal[i].green, pal[i].blue});
  img.data.assign(static_cast<size_t>(img.width) * img.height, 0);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.data.data() + static_cast<size_t>(y) * img.width;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

// ---------------------------------------------------------------------------
// Codec between grids and images
// ---------------------------------------------------------------------------

inline ImageRgb8 cm_to_image(const CmGrid& cm) {
  ImageRgb8 img(cm.width, cm.height);
  for (int y = 0; y < cm.height; ++y)
    for (int x = 0; x < cm.width; ++x) img.set(x, y, cell_color(cm.at(x, y)));
  return img;
}

inline CmGrid cm_from_image(const ImageRgb8& img) {
  CmGrid cm(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) cm.at(x, y) = cell_from_color(img.get(x, y));
  return cm;
}

inline ImageIndexed8 classmap_to_image(const ClassMap& map) {
  ImageIndexed8 img;
  img.width = map.width;
  img.height = map.height;
  img.palette.assign(kClassPalette.begin(), kClassPalette.end());
  img.data.resize(map.size());
  for (size_t i = 0; i < map.size(); ++i) img.data[i] = static_cast<std::uint8_t>(map.cells[i]);
  return img;
}

inline ClassMap classmap_from_image(const ImageIndexed8& img) {
  ClassMap map(img.width, img.height);
  for (size_t i = 0; i < map.size(); ++i) {
    if (img.data[i] >= kNumClasses)
      throw std::runtime_error("palette index " + std::to_string(img.data[i]) +
                               " is not a semantic class");
    map.cells[i] = static_cast<SemClass>(img.data[i]);
  }
  return map;
}

}  // namespace lod3kit
