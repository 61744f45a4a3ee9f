// Compiled with -mavx2 -mfma. Nothing here may run before the dispatcher has
// confirmed CPU support.

#include "gazeadapt/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace gazeadapt::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t rows = y.size(), cols = x.size();
  const double* xp = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 8 <= cols; c += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(xp + c), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c + 4), _mm256_loadu_pd(xp + c + 4), acc1);
    }
    for (; c + 4 <= cols; c += 4)
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(xp + c), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; c < cols; ++c) acc += row[c] * xp[c];
    y[r] = b[r] + acc;
  }
}

void affine_transpose(std::span<const double> w, std::span<const double> dy,
                      std::span<double> dx) {
  const std::size_t rows = dy.size(), cols = dx.size();
  double* out = dx.data();
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4)
      _mm256_storeu_pd(out + c, _mm256_fmadd_pd(_mm256_loadu_pd(row + c), g, _mm256_loadu_pd(out + c)));
    for (; c < cols; ++c) out[c] += row[c] * dy[r];
  }
}

void outer_accumulate(std::span<const double> dy, std::span<const double> x,
                      std::span<double> dw) {
  const std::size_t rows = dy.size(), cols = x.size();
  const double* xp = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = dw.data() + r * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4)
      _mm256_storeu_pd(row + c, _mm256_fmadd_pd(g, _mm256_loadu_pd(xp + c), _mm256_loadu_pd(row + c)));
    for (; c < cols; ++c) row[c] += dy[r] * xp[c];
  }
}

}  // namespace

const DenseKernels* detail::avx2_kernels() {
  static const DenseKernels k{Backend::kAvx2, &affine, &affine_transpose, &outer_accumulate};
  return &k;
}

}  // namespace gazeadapt::kernels

#else

namespace gazeadapt::kernels {
const DenseKernels* detail::avx2_kernels() { return nullptr; }
}  // namespace gazeadapt::kernels

#endif
