#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvf/errors.hpp"

namespace mvf {

/// 8-bit grayscale raster.
struct ImageU8 {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

/// Binary PGM (P5, maxval 255).
ImageU8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& img);

/// Bilinear resize to a square target edge.
ImageU8 resize_bilinear(const ImageU8& src, int target);

/// Pixels scaled to [0,1].
std::vector<float> to_unit_float(const ImageU8& img);

}  // namespace mvf
