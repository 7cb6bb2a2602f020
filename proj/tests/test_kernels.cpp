#include "tlr/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace tlr;

namespace {
std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}
} // namespace

TEST_CASE("scalar kernels: reference behavior") {
  std::vector<double> v{0.5, -0.2, 0.3};
  CHECK(kernels::scalar().reduce_min(v.data(), v.size()) == -0.2);
  CHECK(kernels::scalar().reduce_max(v.data(), v.size()) == 0.5);
  CHECK(kernels::scalar().sum(v.data(), v.size()) == doctest::Approx(0.6));
  CHECK(kernels::scalar().dot(v.data(), v.data(), v.size()) == doctest::Approx(0.38));

  std::vector<double> out(3);
  kernels::scalar().exp_affine(v.data(), v.size(), 2.0, -1.0, out.data());
  CHECK(out[0] == doctest::Approx(std::exp(0.0)));
  CHECK(out[1] == doctest::Approx(std::exp(-1.4)));
}

TEST_CASE("suffix scans") {
  std::vector<double> v{0.5, -0.2, 0.3, 0.1};
  std::vector<double> mn(4), mx(4);
  kernels::suffix_min(v, mn);
  kernels::suffix_max(v, mx);
  CHECK(mn == std::vector<double>{-0.2, -0.2, 0.1, 0.1});
  CHECK(mx == std::vector<double>{0.5, 0.3, 0.3, 0.1});
}

TEST_CASE("simd variants match the scalar reference") {
  const kernels::Ops* simd = kernels::avx2();
  if (!simd) {
    MESSAGE("AVX2 not available; dispatch falls back to scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    return;
  }
  std::mt19937_64 rng(7);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{4},
                        std::size_t{5}, std::size_t{17}, std::size_t{64}, std::size_t{201}}) {
    auto v = random_vec(rng, n, -3.0, 3.0);
    auto w = random_vec(rng, n, -3.0, 3.0);

    if (n > 0) {
      CHECK(simd->reduce_min(v.data(), n) == kernels::scalar().reduce_min(v.data(), n));
      CHECK(simd->reduce_max(v.data(), n) == kernels::scalar().reduce_max(v.data(), n));
    }
    double ss = kernels::scalar().sum(v.data(), n);
    CHECK(simd->sum(v.data(), n) == doctest::Approx(ss).epsilon(1e-13));
    double sd = kernels::scalar().dot(v.data(), w.data(), n);
    CHECK(simd->dot(v.data(), w.data(), n) == doctest::Approx(sd).epsilon(1e-13));
  }
}

TEST_CASE("simd exp matches libm over the working range") {
  const kernels::Ops* simd = kernels::avx2();
  if (!simd) return;
  std::mt19937_64 rng(11);
  // domain used by the soft operators: non-positive shifted exponents
  for (double scale : {-100.0, -10.0, -1.0, 1.0, 50.0}) {
    auto v = random_vec(rng, 1000, -1.0, 1.0);
    double shift = scale > 0 ? -scale : scale; // keep arguments <= 0
    std::vector<double> a(v.size()), b(v.size());
    kernels::scalar().exp_affine(v.data(), v.size(), scale, shift, a.data());
    simd->exp_affine(v.data(), v.size(), scale, shift, b.data());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (a[i] == 0.0) {
        CHECK(b[i] == 0.0);
      } else {
        CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("simd exp flushes exactly where the scalar reference flushes") {
  const kernels::Ops* simd = kernels::avx2();
  if (!simd) return;
  std::vector<double> v{-800.0, -710.0, -708.0, -700.0, 0.0, 10.0};
  std::vector<double> a(v.size()), b(v.size());
  kernels::scalar().exp_affine(v.data(), v.size(), 1.0, 0.0, a.data());
  simd->exp_affine(v.data(), v.size(), 1.0, 0.0, b.data());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (a[i] == 0.0)
      CHECK(b[i] == 0.0);
    else
      CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-13));
  }
}
