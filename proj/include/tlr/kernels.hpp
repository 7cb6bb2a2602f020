#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace tlr::kernels {

/// Vector primitives behind the robustness math. Each operation has a scalar
/// reference implementation and may have an AVX2 variant; the active table is
/// chosen once at startup from CPU capabilities. Set TLR_KERNELS=scalar in the
/// environment to force the reference path.
struct Ops {
  double (*reduce_min)(const double* v, std::size_t n);
  double (*reduce_max)(const double* v, std::size_t n);
  double (*sum)(const double* v, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // out[i] = exp(scale * v[i] + shift), flushed to 0 below the normal range.
  void (*exp_affine)(const double* v, std::size_t n, double scale, double shift, double* out);
  const char* name;
};

/// Active op table (AVX2 when available, scalar otherwise).
const Ops& active();
/// Scalar reference table, always available; the ground truth for equivalence tests.
const Ops& scalar();
/// AVX2 table, or nullptr if unsupported by the build or the CPU.
const Ops* avx2();

inline double reduce_min(std::span<const double> v) { return active().reduce_min(v.data(), v.size()); }
inline double reduce_max(std::span<const double> v) { return active().reduce_max(v.data(), v.size()); }
inline double sum(std::span<const double> v) { return active().sum(v.data(), v.size()); }
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void exp_affine(std::span<const double> v, double scale, double shift, std::span<double> out) {
  active().exp_affine(v.data(), v.size(), scale, shift, out.data());
}

/// out[t] = min(v[t], v[t+1], ..., v[n-1]); plain backward scan (sequential).
void suffix_min(std::span<const double> v, std::span<double> out);
void suffix_max(std::span<const double> v, std::span<double> out);

} // namespace tlr::kernels
