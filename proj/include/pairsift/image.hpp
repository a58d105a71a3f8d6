#pragma once

#include "pairsift/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pairsift {

/// 8-bit raster, row-major, interleaved. channels is 1 (luminance) or 3 (RGB).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

/// Decodes PGM (P5), PPM (P6), PNG, or JPEG, sniffed by magic bytes.
/// PGM/PPM decoding is bit-exact and is the deterministic test path; PNG and
/// JPEG go through libpng/libjpeg and are excluded from bit-exact assertions.
ImageBuffer decode_image(const std::filesystem::path& path);

void write_pgm(const ImageBuffer& image, const std::filesystem::path& path);
void write_ppm(const ImageBuffer& image, const std::filesystem::path& path);

/// height x width matrix of integral luminance values in [0, 255]. 3-channel
/// images use 0.299 R + 0.587 G + 0.114 B rounded to the nearest integer
/// (half away from zero).
Matrix luminance_plane(const ImageBuffer& image);

}  // namespace pairsift
