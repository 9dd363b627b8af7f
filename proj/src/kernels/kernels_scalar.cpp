#include "splice/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace splice::kernels {
namespace {

void gemm_nn_s(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0f);
        const float* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float ap = arow[p];
            const float* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

void gemm_nt_s(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void gemm_tn_s(int m, int n, int k, const float* a, const float* b,
               float* c, bool accumulate) {
    if (!accumulate)
        std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const float* arow = a + static_cast<size_t>(p) * m;
        const float* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const float ap = arow[i];
            float* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

void fmadd_s(const float* a, const float* b, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void relu_s(const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_s(const float* x, const float* dy, float* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void affine_s(const float* x, float* y, int64_t n, float a, float b) {
    for (int64_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void lincomb2_s(const float* u, const float* v, float* y, int64_t n,
                float a, float b, float c) {
    for (int64_t i = 0; i < n; ++i) y[i] = a * u[i] + b * v[i] + c;
}

double sum_s(const float* x, int64_t n) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_diff_s(const float* x, int64_t n, float mu) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - mu;
        acc += d * d;
    }
    return acc;
}

void adam_update_s(float* p, const float* g, float* m, float* v, int64_t n,
                   float lr, float beta1, float beta2, float eps,
                   float bias1, float bias2) {
    for (int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        const float mhat = m[i] / bias1;
        const float vhat = v[i] / bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        gemm_nn_s, gemm_nt_s, gemm_tn_s,
        fmadd_s, relu_s, relu_bwd_s, affine_s, lincomb2_s,
        sum_s, sumsq_diff_s, adam_update_s,
    };
    return ops;
}

} // namespace splice::kernels
