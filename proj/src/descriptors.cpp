#include "ddlcn/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ddlcn/errors.hpp"
#include "ddlcn/simd/kernels.hpp"

namespace ddlcn {
namespace {

struct GradientField {
  std::vector<double> magnitude;
  std::vector<int> bin_lo;
  std::vector<double> weight_hi;  // share of magnitude going to bin_lo + 1
};

GradientField compute_gradients(const GrayImage& image) {
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  GradientField g;
  g.magnitude.resize(w * h);
  g.bin_lo.resize(w * h);
  g.weight_hi.resize(w * h);

  constexpr double kBinWidth = 2.0 * std::numbers::pi / static_cast<double>(kOrientationBins);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t ym = y == 0 ? 0 : y - 1;
    const std::size_t yp = y + 1 == h ? y : y + 1;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xm = x == 0 ? 0 : x - 1;
      const std::size_t xp = x + 1 == w ? x : x + 1;
      const double gx = 0.5 * (image.at(xp, y) - image.at(xm, y));
      const double gy = 0.5 * (image.at(x, yp) - image.at(x, ym));
      const std::size_t idx = y * w + x;
      const double mag = std::hypot(gx, gy);
      g.magnitude[idx] = mag;
      if (mag == 0.0) {
        g.bin_lo[idx] = 0;
        g.weight_hi[idx] = 0.0;
        continue;
      }
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      const double pos = theta / kBinWidth;
      double lo = std::floor(pos);
      double frac = pos - lo;
      if (frac >= 1.0) {
        lo += 1.0;
        frac = 0.0;
      }
      g.bin_lo[idx] = static_cast<int>(lo) % static_cast<int>(kOrientationBins);
      g.weight_hi[idx] = frac;
    }
  }
  return g;
}

void normalize_descriptor(std::span<double> d) {
  const double n2 = simd::dot(d, d);
  if (n2 == 0.0) return;
  simd::scale(d, 1.0 / std::sqrt(n2));
  simd::clip_max(d, kDescriptorClip);
  const double r2 = simd::dot(d, d);
  simd::scale(d, 1.0 / std::sqrt(r2));
}

}  // namespace

DescriptorGrid extract_dense_descriptors(const GrayImage& image, const DescriptorParams& params) {
  validate(image);
  if (params.stride < 1) throw InvalidInput("descriptor stride must be >= 1");
  if (params.patch_size < kDescriptorCells) {
    throw InvalidInput("patch size must be at least " + std::to_string(kDescriptorCells));
  }
  if (params.patch_size > std::min(image.width, image.height)) {
    throw InvalidInput("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                       " is smaller than patch size " + std::to_string(params.patch_size));
  }

  const GradientField grad = compute_gradients(image);
  const std::size_t nx = grid_extent(image.width, params);
  const std::size_t ny = grid_extent(image.height, params);
  const std::size_t patch = params.patch_size;

  DescriptorGrid grid;
  grid.grid_width = nx;
  grid.grid_height = ny;
  grid.values.assign(nx * ny * kDescriptorDim, 0.0);
  grid.positions.reserve(nx * ny);

  // Spatial cell of each in-patch offset; identical for every patch.
  std::vector<std::size_t> cell_of(patch);
  for (std::size_t u = 0; u < patch; ++u) cell_of[u] = u * kDescriptorCells / patch;

  for (std::size_t gy = 0; gy < ny; ++gy) {
    for (std::size_t gx = 0; gx < nx; ++gx) {
      const std::size_t x0 = gx * params.stride;
      const std::size_t y0 = gy * params.stride;
      const std::size_t index = gy * nx + gx;
      std::span<double> desc(grid.values.data() + index * kDescriptorDim, kDescriptorDim);

      for (std::size_t v = 0; v < patch; ++v) {
        const std::size_t row = (y0 + v) * image.width;
        const std::size_t cy = cell_of[v];
        for (std::size_t u = 0; u < patch; ++u) {
          const std::size_t p = row + x0 + u;
          const double mag = grad.magnitude[p];
          if (mag == 0.0) continue;
          const std::size_t base = (cy * kDescriptorCells + cell_of[u]) * kOrientationBins;
          const auto lo = static_cast<std::size_t>(grad.bin_lo[p]);
          const std::size_t hi = (lo + 1) % kOrientationBins;
          desc[base + lo] += mag * (1.0 - grad.weight_hi[p]);
          desc[base + hi] += mag * grad.weight_hi[p];
        }
      }
      normalize_descriptor(desc);

      grid.positions.push_back({(static_cast<double>(x0) + 0.5 * static_cast<double>(patch)) /
                                    static_cast<double>(image.width),
                                (static_cast<double>(y0) + 0.5 * static_cast<double>(patch)) /
                                    static_cast<double>(image.height)});
    }
  }
  return grid;
}

}  // namespace ddlcn
