#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgs {

// 8-bit image buffer, row-major with the channel fastest. channels is 1
// (grayscale) or 3 (RGB).
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

// Writes an 8-bit non-interlaced PNG (color type 0 or 2).
void write_png(const std::string& path, const PngImage& image);

// Reads 8-bit non-interlaced grayscale/RGB PNGs (everything write_png
// produces, plus any standard scanline filtering).
PngImage read_png(const std::string& path);

}  // namespace sgs
