#pragma once

#include <cstdint>

// Float32 compute kernels behind the training and feature pipelines.
//
// Every kernel has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant. The active set is picked once at startup
// from CPUID; SPLICE_KERNELS=scalar|avx2 overrides the choice. Scalar and
// SIMD variants are equivalence-tested against each other.
//
// All matrices are row-major with tight leading dimensions.

namespace splice::kernels {

struct Ops {
    const char* name;

    // c[m x n] (+)= a[m x k] * b[k x n]
    void (*gemm_nn)(int m, int n, int k, const float* a, const float* b,
                    float* c, bool accumulate);
    // c[m x n] (+)= a[m x k] * b[n x k]^T   (row-row dot products)
    void (*gemm_nt)(int m, int n, int k, const float* a, const float* b,
                    float* c, bool accumulate);
    // c[m x n] (+)= a[k x m]^T * b[k x n]
    void (*gemm_tn)(int m, int n, int k, const float* a, const float* b,
                    float* c, bool accumulate);

    // y += a .* b
    void (*fmadd)(const float* a, const float* b, float* y, int64_t n);
    // y = max(x, 0)
    void (*relu)(const float* x, float* y, int64_t n);
    // dx = x > 0 ? dy : 0
    void (*relu_bwd)(const float* x, const float* dy, float* dx, int64_t n);
    // y = a*x + b
    void (*affine)(const float* x, float* y, int64_t n, float a, float b);
    // y = a*u + b*v + c
    void (*lincomb2)(const float* u, const float* v, float* y, int64_t n,
                     float a, float b, float c);

    double (*sum)(const float* x, int64_t n);
    double (*sumsq_diff)(const float* x, int64_t n, float mu);

    // Bias-corrected Adam: m,v updated in place, p -= lr*(m/bias1)/(sqrt(v/bias2)+eps)
    void (*adam_update)(float* p, const float* g, float* m, float* v, int64_t n,
                        float lr, float beta1, float beta2, float eps,
                        float bias1, float bias2);
};

const Ops& scalar_ops();

// Null when the CPU (or the build) lacks AVX2+FMA.
const Ops* avx2_ops();

// Runtime-selected kernel set.
const Ops& ops();

} // namespace splice::kernels
