#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ssnf {

struct ImageRgb8 {
  int width = 0, height = 0;
  std::vector<uint8_t> data;  // 3 bytes per pixel, row-major

  static ImageRgb8 make(int w, int h) { return {w, h, std::vector<uint8_t>(size_t(w * h * 3), 0)}; }
  uint8_t* px(int r, int c) { return data.data() + size_t(r * width + c) * 3; }
  const uint8_t* px(int r, int c) const { return data.data() + size_t(r * width + c) * 3; }
};

inline uint8_t quantize8(double v) {
  if (v <= 0) return 0;
  if (v >= 1) return 255;
  return uint8_t(v * 255.0 + 0.5);
}

// 8-bit RGB PNG with fixed filter and compression settings, so identical
// pixels produce identical bytes.
void write_png_rgb8(const std::string& path, const ImageRgb8& img);
ImageRgb8 read_png_rgb8(const std::string& path);

// 8-bit palette PNG; pixel bytes are palette indices (here: class indices).
void write_png_palette(const std::string& path, int width, int height,
                       const std::vector<uint8_t>& indices,
                       const std::vector<std::array<uint8_t, 3>>& palette);
struct IndexedImage {
  int width = 0, height = 0;
  std::vector<uint8_t> indices;
};
IndexedImage read_png_palette(const std::string& path);

// single-channel grayscale
void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<uint8_t>& gray);

}  // namespace ssnf
