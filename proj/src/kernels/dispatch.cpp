#include "splice/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace splice::kernels {

#if defined(SPLICE_HAVE_AVX2)
const Ops* avx2_ops_impl();
#endif

const Ops* avx2_ops() {
#if defined(SPLICE_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops_impl();
#endif
    return nullptr;
}

const Ops& ops() {
    static const Ops* chosen = [] {
        if (const char* env = std::getenv("SPLICE_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
            if (std::strcmp(env, "avx2") == 0) {
                if (const Ops* v = avx2_ops()) return v;
                std::fprintf(stderr,
                             "splice: SPLICE_KERNELS=avx2 requested but AVX2+FMA "
                             "is unavailable; using scalar kernels\n");
                return &scalar_ops();
            }
            std::fprintf(stderr, "splice: unknown SPLICE_KERNELS value '%s'; "
                                 "using autodetection\n", env);
        }
        if (const Ops* v = avx2_ops()) return v;
        return &scalar_ops();
    }();
    return *chosen;
}

} // namespace splice::kernels
