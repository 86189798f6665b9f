#include "kernels_impl.hpp"

#include <cstdlib>
#include <string_view>

namespace comove::kernels {
namespace {

const KernelTable kScalar{"scalar",
                          &scalar::sum,
                          &scalar::mean_var,
                          &scalar::gaussian_sum,
                          &scalar::tridiag_matvec,
                          &scalar::lagged_dot};

#ifdef COMOVE_HAVE_AVX2
const KernelTable kAvx2{"avx2",
                        &avx2::sum,
                        &avx2::mean_var,
                        &avx2::gaussian_sum,
                        &avx2::tridiag_matvec,
                        &avx2::lagged_dot};
#endif

const KernelTable& select() {
    if (const char* env = std::getenv("COMOVE_SIMD"); env && std::string_view{env} == "scalar")
        return kScalar;
    if (const KernelTable* t = avx2_table()) return *t;
    return kScalar;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#ifdef COMOVE_HAVE_AVX2
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_table() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace comove::kernels
