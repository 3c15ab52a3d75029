#pragma once

#include <cstddef>
#include <span>

namespace ddlcn::simd {

/// One implementation of every data-parallel inner loop the pipeline uses.
///
/// All routines take raw contiguous double ranges of length n. The scalar
/// table is the reference; vector tables must agree with it to rounding.
struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);  // y += alpha * x
  void (*scale)(double* x, double alpha, std::size_t n);
  void (*max_inplace)(double* acc, const double* x, std::size_t n);  // acc = max(acc, x)
  void (*min_inplace)(double* acc, const double* x, std::size_t n);  // acc = min(acc, x)
  void (*clip_max)(double* x, double hi, std::size_t n);              // x = min(x, hi)
};

const KernelTable& scalar_kernels();

/// AVX2+FMA table, or nullptr when not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

/// Table chosen once per process: AVX2 when available, unless the
/// environment variable DDLCN_SIMD=scalar forces the reference path.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void scale(std::span<double> x, double alpha) { active().scale(x.data(), alpha, x.size()); }

inline void max_inplace(std::span<double> acc, std::span<const double> x) {
  active().max_inplace(acc.data(), x.data(), x.size());
}

inline void min_inplace(std::span<double> acc, std::span<const double> x) {
  active().min_inplace(acc.data(), x.data(), x.size());
}

inline void clip_max(std::span<double> x, double hi) { active().clip_max(x.data(), hi, x.size()); }

}  // namespace ddlcn::simd
