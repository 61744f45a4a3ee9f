#include <cstdlib>
#include <string>

#include "gazeadapt/kernels.hpp"

namespace gazeadapt::kernels {

bool supported(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return detail::avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const DenseKernels& get(Backend b) {
  if (b == Backend::kAvx2 && supported(b)) return *detail::avx2_kernels();
  return detail::scalar_kernels();
}

const DenseKernels& active() {
  static const DenseKernels& chosen = [&]() -> const DenseKernels& {
    const char* env = std::getenv("GAZEADAPT_KERNELS");
    if (env != nullptr && std::string(env) == "scalar") return get(Backend::kScalar);
    return get(Backend::kAvx2);
  }();
  return chosen;
}

std::string_view name(Backend b) { return b == Backend::kAvx2 ? "avx2" : "scalar"; }

}  // namespace gazeadapt::kernels
