#include "ssnf/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace ssnf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

void write_png(const std::string& path, int width, int height, int color_type, int bytes_per_px,
               const uint8_t* pixels, const std::vector<std::array<uint8_t, 3>>* palette) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot open for writing", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) fail("libpng init failed", path);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("libpng write failed", path);
  }
  png_init_io(png, fp.get());
  // fixed settings keep the byte stream reproducible
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_color colors[256];
    const size_t n = std::min<size_t>(palette->size(), 256);
    for (size_t i = 0; i < n; ++i) {
      colors[i].red = (*palette)[i][0];
      colors[i].green = (*palette)[i][1];
      colors[i].blue = (*palette)[i][2];
    }
    png_set_PLTE(png, info, colors, int(n));
  }
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels + size_t(r) * size_t(width) * size_t(bytes_per_px)));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FilePtr fp;

  explicit PngReader(const std::string& path) : fp(std::fopen(path.c_str(), "rb")) {
    if (!fp) fail("cannot open for reading", path);
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png_create_info_struct(png);
    if (!png || !info) fail("libpng init failed", path);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

void write_png_rgb8(const std::string& path, const ImageRgb8& img) {
  if (int(img.data.size()) != img.width * img.height * 3)
    throw std::invalid_argument("write_png_rgb8: buffer size mismatch");
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.data.data(), nullptr);
}

ImageRgb8 read_png_rgb8(const std::string& path) {
  PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) fail("libpng read failed", path);
  png_init_io(r.png, r.fp.get());
  png_read_info(r.png, r.info);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  if (png_get_color_type(r.png, r.info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(r.png, r.info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  ImageRgb8 img = ImageRgb8::make(int(png_get_image_width(r.png, r.info)),
                                  int(png_get_image_height(r.png, r.info)));
  if (png_get_rowbytes(r.png, r.info) != size_t(img.width) * 3)
    fail("unexpected row size in RGB png", path);
  for (int y = 0; y < img.height; ++y)
    png_read_row(r.png, img.data.data() + size_t(y) * size_t(img.width) * 3, nullptr);
  return img;
}

void write_png_palette(const std::string& path, int width, int height,
                       const std::vector<uint8_t>& indices,
                       const std::vector<std::array<uint8_t, 3>>& palette) {
  if (int(indices.size()) != width * height)
    throw std::invalid_argument("write_png_palette: buffer size mismatch");
  write_png(path, width, height, PNG_COLOR_TYPE_PALETTE, 1, indices.data(), &palette);
}

IndexedImage read_png_palette(const std::string& path) {
  PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) fail("libpng read failed", path);
  png_init_io(r.png, r.fp.get());
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_PALETTE)
    fail("expected a palette png", path);
  if (png_get_bit_depth(r.png, r.info) < 8) png_set_packing(r.png);
  png_read_update_info(r.png, r.info);
  IndexedImage img;
  img.width = int(png_get_image_width(r.png, r.info));
  img.height = int(png_get_image_height(r.png, r.info));
  img.indices.resize(size_t(img.width) * size_t(img.height));
  for (int y = 0; y < img.height; ++y)
    png_read_row(r.png, img.indices.data() + size_t(y) * size_t(img.width), nullptr);
  return img;
}

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<uint8_t>& gray) {
  if (int(gray.size()) != width * height)
    throw std::invalid_argument("write_png_gray8: buffer size mismatch");
  write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 1, gray.data(), nullptr);
}

}  // namespace ssnf
