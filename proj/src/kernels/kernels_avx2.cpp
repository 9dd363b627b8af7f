// AVX2+FMA variants. Compiled with -mavx2 -mfma; only reached when the
// running CPU reports both features (see dispatch.cpp).

#include "splice/kernels.hpp"

#if defined(SPLICE_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace splice::kernels {
namespace {

inline float hsum256(__m256 x) {
    __m128 lo = _mm256_castps256_ps128(x);
    __m128 hi = _mm256_extractf128_ps(x, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_movehdup_ps(s));
    return _mm_cvtss_f32(s);
}

inline double hsum256d(__m256d x) {
    __m128d lo = _mm256_castpd256_pd128(x);
    __m128d hi = _mm256_extractf128_pd(x, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nn_v(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0f);
        const float* arow = a + static_cast<size_t>(i) * k;
        int p = 0;
        // Two broadcast rows per pass cuts the c row traffic in half.
        for (; p + 2 <= k; p += 2) {
            const __m256 ap0 = _mm256_set1_ps(arow[p]);
            const __m256 ap1 = _mm256_set1_ps(arow[p + 1]);
            const float* b0 = b + static_cast<size_t>(p) * n;
            const float* b1 = b0 + n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 acc = _mm256_loadu_ps(crow + j);
                acc = _mm256_fmadd_ps(ap0, _mm256_loadu_ps(b0 + j), acc);
                acc = _mm256_fmadd_ps(ap1, _mm256_loadu_ps(b1 + j), acc);
                _mm256_storeu_ps(crow + j, acc);
            }
            for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
        }
        for (; p < k; ++p) {
            const __m256 ap = _mm256_set1_ps(arow[p]);
            const float* brow = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 acc = _mm256_fmadd_ps(ap, _mm256_loadu_ps(brow + j),
                                             _mm256_loadu_ps(crow + j));
                _mm256_storeu_ps(crow + j, acc);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void gemm_nt_v(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            int p = 0;
            for (; p + 16 <= k; p += 16) {
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p),
                                       _mm256_loadu_ps(brow + p), acc0);
                acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p + 8),
                                       _mm256_loadu_ps(brow + p + 8), acc1);
            }
            for (; p + 8 <= k; p += 8)
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p),
                                       _mm256_loadu_ps(brow + p), acc0);
            float dot = hsum256(_mm256_add_ps(acc0, acc1));
            for (; p < k; ++p) dot += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + dot : dot;
        }
    }
}

void gemm_tn_v(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    if (!accumulate)
        std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const float* arow = a + static_cast<size_t>(p) * m;
        const float* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const __m256 ap = _mm256_set1_ps(arow[i]);
            float* crow = c + static_cast<size_t>(i) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 acc = _mm256_fmadd_ps(ap, _mm256_loadu_ps(brow + j),
                                             _mm256_loadu_ps(crow + j));
                _mm256_storeu_ps(crow + j, acc);
            }
            for (; j < n; ++j) crow[j] += arow[i] * brow[j];
        }
    }
}

void fmadd_v(const float* a, const float* b, float* y, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i),
                                     _mm256_loadu_ps(b + i),
                                     _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, acc);
    }
    for (; i < n; ++i) y[i] += a[i] * b[i];
}

void relu_v(const float* x, float* y, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_v(const float* x, const float* dy, float* dx, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void affine_v(const float* x, float* y, int64_t n, float a, float b) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

void lincomb2_v(const float* u, const float* v, float* y, int64_t n,
                float a, float b, float c) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    const __m256 vc = _mm256_set1_ps(c);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_fmadd_ps(va, _mm256_loadu_ps(u + i), vc);
        acc = _mm256_fmadd_ps(vb, _mm256_loadu_ps(v + i), acc);
        _mm256_storeu_ps(y + i, acc);
    }
    for (; i < n; ++i) y[i] = a * u[i] + b * v[i] + c;
}

double sum_v(const float* x, int64_t n) {
    __m256d acc = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
        acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
    }
    double s = hsum256d(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sumsq_diff_v(const float* x, int64_t n, float mu) {
    const __m256d vmu = _mm256_set1_pd(mu);
    __m256d acc = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(v)), vmu);
        __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)), vmu);
        acc = _mm256_fmadd_pd(d0, d0, acc);
        acc = _mm256_fmadd_pd(d1, d1, acc);
    }
    double s = hsum256d(acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - mu;
        s += d * d;
    }
    return s;
}

void adam_update_v(float* p, const float* g, float* m, float* v, int64_t n,
                   float lr, float beta1, float beta2, float eps,
                   float bias1, float bias2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb1c = _mm256_set1_ps(1.0f - beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 vb2c = _mm256_set1_ps(1.0f - beta2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vib1 = _mm256_set1_ps(1.0f / bias1);
    const __m256 vib2 = _mm256_set1_ps(1.0f / bias2);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_fmadd_ps(vb1c, gi, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
        __m256 vi = _mm256_fmadd_ps(vb2c, _mm256_mul_ps(gi, gi),
                                    _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_mul_ps(mi, vib1);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, vib2)), veps);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
    }
}

} // namespace

const Ops* avx2_ops_impl() {
    static const Ops ops = {
        "avx2",
        gemm_nn_v, gemm_nt_v, gemm_tn_v,
        fmadd_v, relu_v, relu_bwd_v, affine_v, lincomb2_v,
        sum_v, sumsq_diff_v, adam_update_v,
    };
    return &ops;
}

} // namespace splice::kernels

#endif // SPLICE_HAVE_AVX2
