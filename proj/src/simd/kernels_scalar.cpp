#include "ddlcn/simd/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string_view>

namespace ddlcn::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void max_scalar(double* acc, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], x[i]);
}

void min_scalar(double* acc, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::min(acc[i], x[i]);
}

void clip_max_scalar(double* x, double hi, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::min(x[i], hi);
}

constexpr KernelTable kScalar{
    "scalar",   dot_scalar, squared_distance_scalar, axpy_scalar, scale_scalar,
    max_scalar, min_scalar, clip_max_scalar,
};

const KernelTable& select_active() {
  if (const char* env = std::getenv("DDLCN_SIMD"); env && std::string_view(env) == "scalar") {
    return kScalar;
  }
  if (const KernelTable* vec = avx2_kernels()) return *vec;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable& active() {
  static const KernelTable& table = select_active();
  return table;
}

}  // namespace ddlcn::simd
