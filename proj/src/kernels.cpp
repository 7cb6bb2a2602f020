#include "tlr/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace tlr::kernels {

namespace {

// exp underflows to subnormals below this; both paths flush to zero there so
// the vector variant (which cannot produce subnormals) matches the reference.
constexpr double kExpFlush = -708.396418532264;

double scalar_reduce_min(const double* v, std::size_t n) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = v[i] < m ? v[i] : m;
  return m;
}

double scalar_reduce_max(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = v[i] > m ? v[i] : m;
  return m;
}

double scalar_sum(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s;
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scalar_exp_affine(const double* v, std::size_t n, double scale, double shift, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double x = scale * v[i] + shift;
    out[i] = x < kExpFlush ? 0.0 : std::exp(x);
  }
}

constexpr Ops kScalarOps{
    scalar_reduce_min, scalar_reduce_max, scalar_sum, scalar_dot, scalar_exp_affine, "scalar"};

const Ops* select_ops() {
  if (const char* env = std::getenv("TLR_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &kScalarOps;
    if (std::strcmp(env, "avx2") == 0 && avx2()) return avx2();
  }
  if (const Ops* v = avx2()) return v;
  return &kScalarOps;
}

} // namespace

const Ops& scalar() { return kScalarOps; }

#if !defined(TLR_BUILD_AVX2)
const Ops* avx2() { return nullptr; }
#endif

const Ops& active() {
  static const Ops* ops = select_ops();
  return *ops;
}

void suffix_min(std::span<const double> v, std::span<double> out) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = v.size(); i-- > 0;) {
    m = v[i] < m ? v[i] : m;
    out[i] = m;
  }
}

void suffix_max(std::span<const double> v, std::span<double> out) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = v.size(); i-- > 0;) {
    m = v[i] > m ? v[i] : m;
    out[i] = m;
  }
}

} // namespace tlr::kernels
