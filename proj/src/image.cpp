#include "ddlcn/image.hpp"

#include <cmath>
#include <string>

#include "ddlcn/errors.hpp"

namespace ddlcn {

void validate(const GrayImage& image) {
  if (image.width < 8 || image.height < 8) {
    throw InvalidInput("image must be at least 8x8, got " + std::to_string(image.width) + "x" +
                       std::to_string(image.height));
  }
  if (image.pixels.size() != image.width * image.height) {
    throw InvalidInput("pixel count does not match image dimensions");
  }
  for (double v : image.pixels) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidInput("pixel intensity outside [0, 1]");
    }
  }
}

GrayImage rotate_180(const GrayImage& image) {
  GrayImage out{image.width, image.height, std::vector<double>(image.pixels.rbegin(), image.pixels.rend())};
  return out;
}

}  // namespace ddlcn
