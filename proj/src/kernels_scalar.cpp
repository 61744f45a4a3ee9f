#include "gazeadapt/kernels.hpp"

namespace gazeadapt::kernels {
namespace {

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t rows = y.size(), cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = b[r] + acc;
  }
}

void affine_transpose(std::span<const double> w, std::span<const double> dy,
                      std::span<double> dx) {
  const std::size_t rows = dy.size(), cols = dx.size();
  for (std::size_t c = 0; c < cols; ++c) dx[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    const double g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

void outer_accumulate(std::span<const double> dy, std::span<const double> x,
                      std::span<double> dw) {
  const std::size_t rows = dy.size(), cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = dw.data() + r * cols;
    const double g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

}  // namespace

const DenseKernels& detail::scalar_kernels() {
  static const DenseKernels k{Backend::kScalar, &affine, &affine_transpose, &outer_accumulate};
  return k;
}

}  // namespace gazeadapt::kernels
