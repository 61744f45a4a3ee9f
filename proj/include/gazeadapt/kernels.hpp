#pragma once

// Dense-layer inner loops used by the estimator. A scalar reference
// implementation is always available; an AVX2/FMA variant is compiled into a
// separate translation unit and chosen at runtime when the CPU supports it.
// Setting GAZEADAPT_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace gazeadapt::kernels {

enum class Backend { kScalar, kAvx2 };

struct DenseKernels {
  Backend backend;
  // y[r] = b[r] + sum_c w[r * cols + c] * x[c]
  void (*affine)(std::span<const double> w, std::span<const double> b,
                 std::span<const double> x, std::span<double> y);
  // dx[c] = sum_r w[r * cols + c] * dy[r]
  void (*affine_transpose)(std::span<const double> w, std::span<const double> dy,
                           std::span<double> dx);
  // dw[r * cols + c] += dy[r] * x[c]
  void (*outer_accumulate)(std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw);
};

bool supported(Backend b);
const DenseKernels& get(Backend b);

/// Backend picked once per process (environment override, then CPU probe).
const DenseKernels& active();
std::string_view name(Backend b);

namespace detail {
const DenseKernels& scalar_kernels();
// Null when the build target has no AVX2 path.
const DenseKernels* avx2_kernels();
}  // namespace detail

}  // namespace gazeadapt::kernels
