#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddlcn/image.hpp"

namespace ddlcn {

inline constexpr std::size_t kDescriptorCells = 4;
inline constexpr std::size_t kOrientationBins = 8;
inline constexpr std::size_t kDescriptorDim = kDescriptorCells * kDescriptorCells * kOrientationBins;
inline constexpr double kDescriptorClip = 0.2;

struct DescriptorParams {
  std::size_t patch_size = 12;
  std::size_t stride = 4;

  bool operator==(const DescriptorParams&) const = default;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

/// Dense grid of local descriptors for one image.
///
/// `values` holds `count()` descriptors of dimension `dim`, descriptor-major.
/// Each descriptor has unit l2 norm or is exactly zero; positions are patch
/// centers normalized by the image size.
struct DescriptorGrid {
  std::size_t dim = kDescriptorDim;
  std::size_t grid_width = 0;
  std::size_t grid_height = 0;
  std::vector<double> values;
  std::vector<Position> positions;

  std::size_t count() const { return positions.size(); }

  std::span<const double> descriptor(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

/// Dense SIFT-style descriptors: one per patch on a regular grid with the
/// given stride, 4x4 spatial cells x 8 orientation bins (m = 128).
///
/// Gradients are central differences with replicated borders; each pixel's
/// magnitude is split linearly between the two nearest orientation bins. The
/// histogram is l2-normalized, clipped at 0.2 and renormalized.
DescriptorGrid extract_dense_descriptors(const GrayImage& image, const DescriptorParams& params);

/// Number of patches along an axis of length `extent`.
inline std::size_t grid_extent(std::size_t extent, const DescriptorParams& params) {
  return (extent - params.patch_size) / params.stride + 1;
}

}  // namespace ddlcn
