#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gazeadapt/kernels.hpp"

using namespace gazeadapt;

namespace {

std::vector<double> randn(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Shapes around the 4-lane width, including the default layer sizes.
const std::size_t kShapes[][2] = {{1, 1}, {3, 5}, {4, 4}, {7, 9}, {64, 32}, {64, 64}, {6, 64}, {13, 17}};

double tol(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return 1e-13 * (1.0 + s);
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(kernels::supported(kernels::Backend::kScalar));
  EXPECT_EQ(kernels::get(kernels::Backend::kScalar).backend, kernels::Backend::kScalar);
}

TEST(Kernels, ScalarMatchesNaiveLoops) {
  const auto& k = kernels::detail::scalar_kernels();
  std::mt19937_64 rng(3);
  for (const auto& s : kShapes) {
    const std::size_t rows = s[0], cols = s[1];
    const auto w = randn(rng, rows * cols), b = randn(rng, rows), x = randn(rng, cols),
               dy = randn(rng, rows);
    std::vector<double> y(rows), dx(cols), dw(rows * cols, 0.5);
    k.affine(w, b, x, y);
    k.affine_transpose(w, dy, dx);
    k.outer_accumulate(dy, x, dw);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
      EXPECT_NEAR(y[r], acc, 1e-13);
      for (std::size_t c = 0; c < cols; ++c) EXPECT_EQ(dw[r * cols + c], 0.5 + dy[r] * x[c]);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += w[r * cols + c] * dy[r];
      EXPECT_NEAR(dx[c], acc, 1e-13);
    }
  }
}

TEST(Kernels, Avx2MatchesScalar) {
  const auto* v = kernels::detail::avx2_kernels();
  if (!v || !kernels::supported(kernels::Backend::kAvx2)) GTEST_SKIP() << "no AVX2 on this host";
  const auto& s = kernels::detail::scalar_kernels();
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    for (const auto& sh : kShapes) {
      const std::size_t rows = sh[0], cols = sh[1];
      const auto w = randn(rng, rows * cols), b = randn(rng, rows), x = randn(rng, cols),
                 dy = randn(rng, rows);
      std::vector<double> y1(rows), y2(rows), dx1(cols), dx2(cols), dw1(rows * cols, 0.0),
          dw2(rows * cols, 0.0);
      s.affine(w, b, x, y1);
      v->affine(w, b, x, y2);
      for (std::size_t r = 0; r < rows; ++r)
        EXPECT_NEAR(y1[r], y2[r], tol(std::span(w).subspan(r * cols, cols), x) + 1e-13 * std::abs(b[r]));
      s.affine_transpose(w, dy, dx1);
      v->affine_transpose(w, dy, dx2);
      for (std::size_t c = 0; c < cols; ++c) EXPECT_NEAR(dx1[c], dx2[c], 1e-12 * (1.0 + rows));
      s.outer_accumulate(dy, x, dw1);
      v->outer_accumulate(dy, x, dw2);
      for (std::size_t i = 0; i < dw1.size(); ++i) EXPECT_NEAR(dw1[i], dw2[i], 1e-14 * (1 + std::abs(dw1[i])));
    }
  }
}

TEST(Kernels, ActiveBackendIsSupported) {
  const auto& a = kernels::active();
  EXPECT_TRUE(kernels::supported(a.backend));
  EXPECT_FALSE(kernels::name(a.backend).empty());
}
