#pragma once

#include <cstddef>
#include <vector>

namespace ddlcn {

/// Row-major grayscale image with intensities in [0, 1].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

/// Throws InvalidInput unless dimensions are >= 8, the pixel count matches,
/// and every intensity is finite and inside [0, 1].
void validate(const GrayImage& image);

/// Rotates by 180 degrees.
GrayImage rotate_180(const GrayImage& image);

}  // namespace ddlcn
