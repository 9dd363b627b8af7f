#pragma once

#include "splice/errors.hpp"
#include "splice/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

// Minimal NCHW tensor library with manual backprop. Layers are templated on
// the element type: float is the production path and routes its inner loops
// through the runtime-dispatched kernels; double runs scalar reference code
// and exists so gradient checks can use 64-bit finite differences.

namespace splice::nn {

template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) { reshape(std::move(s)); }

    void reshape(std::vector<int> s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeMismatch("tensor dims must be positive");
            n *= d;
        }
        shape = std::move(s);
        data.assign(static_cast<size_t>(n), T(0));
    }

    // Reinterpret without touching data; element count must match.
    void view(std::vector<int> s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        if (n != numel()) throw ShapeMismatch("view changes element count");
        shape = std::move(s);
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

using Tensor = TensorT<float>;

// ---- element-type dispatched primitives ----------------------------------

namespace prim {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<int64_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int l = 0; l < k; ++l) {
            T av = a[static_cast<int64_t>(i) * k + l];
            const T* bl = b + static_cast<int64_t>(l) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = T(0);
            const T* ai = a + static_cast<int64_t>(i) * k;
            const T* bj = b + static_cast<int64_t>(j) * k;
            for (int l = 0; l < k; ++l) s += ai[l] * bj[l];
            T& out = c[static_cast<int64_t>(i) * n + j];
            out = acc ? out + s : s;
        }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<int64_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int l = 0; l < k; ++l) {
            T av = a[static_cast<int64_t>(l) * m + i];
            const T* bl = b + static_cast<int64_t>(l) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

template <typename T>
void fmadd(const T* a, const T* b, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void relu(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd(const T* x, const T* dy, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
double sum(const T* x, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
    return s;
}

template <typename T>
double sumsq_diff(const T* x, int64_t n, T mu) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(x[i]) - static_cast<double>(mu);
        s += d * d;
    }
    return s;
}

template <>
inline void gemm_nn<float>(int m, int n, int k, const float* a, const float* b,
                           float* c, bool acc) {
    kernels::ops().gemm_nn(m, n, k, a, b, c, acc);
}
template <>
inline void gemm_nt<float>(int m, int n, int k, const float* a, const float* b,
                           float* c, bool acc) {
    kernels::ops().gemm_nt(m, n, k, a, b, c, acc);
}
template <>
inline void gemm_tn<float>(int m, int n, int k, const float* a, const float* b,
                           float* c, bool acc) {
    kernels::ops().gemm_tn(m, n, k, a, b, c, acc);
}
template <>
inline void fmadd<float>(const float* a, const float* b, float* y, int64_t n) {
    kernels::ops().fmadd(a, b, y, n);
}
template <>
inline void relu<float>(const float* x, float* y, int64_t n) {
    kernels::ops().relu(x, y, n);
}
template <>
inline void relu_bwd<float>(const float* x, const float* dy, float* dx, int64_t n) {
    kernels::ops().relu_bwd(x, dy, dx, n);
}
template <>
inline double sum<float>(const float* x, int64_t n) {
    return kernels::ops().sum(x, n);
}
template <>
inline double sumsq_diff<float>(const float* x, int64_t n, float mu) {
    return kernels::ops().sumsq_diff(x, n, mu);
}

} // namespace prim

// ---- parameters and layer interface ---------------------------------------

template <typename T>
struct ParamT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    void init_shape(std::vector<int> s) {
        value.reshape(s);
        grad.reshape(std::move(s));
    }
};

template <typename T>
class LayerT {
public:
    virtual ~LayerT() = default;
    virtual TensorT<T> forward(const TensorT<T>& x, bool train) = 0;
    virtual TensorT<T> backward(const TensorT<T>& dy) = 0;
    virtual std::vector<ParamT<T>*> params() { return {}; }
    // Non-trainable state carried in checkpoints (BN running stats).
    virtual std::vector<std::pair<std::string, TensorT<T>*>> buffers() { return {}; }

    void zero_grad() {
        for (auto* p : params()) p->grad.zero();
    }
};

// Uniform draw in [0, 1) built directly on the mt19937 stream so results are
// identical across standard library implementations.
inline double canonical_uniform(std::mt19937& rng) {
    return rng() * (1.0 / 4294967296.0);
}

// He-uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void kaiming_uniform(TensorT<T>& t, int fan_in, std::mt19937& rng) {
    if (fan_in <= 0) throw ShapeMismatch("kaiming_uniform: fan_in must be positive");
    double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : t.data)
        v = static_cast<T>((2.0 * canonical_uniform(rng) - 1.0) * bound);
}

// ---- im2col ----------------------------------------------------------------

// x: one sample plane set (C, H, W) -> col (C*k*k, H*W), stride 1, zero pad.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int pad, T* col) {
    const int HW = H * W;
    for (int c = 0; c < C; ++c) {
        const T* plane = x + static_cast<int64_t>(c) * HW;
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i) {
                T* row = col + (static_cast<int64_t>(c) * k * k + j * k + i) * HW;
                for (int y = 0; y < H; ++y) {
                    int sy = y + j - pad;
                    T* dst = row + static_cast<int64_t>(y) * W;
                    if (sy < 0 || sy >= H) {
                        for (int xx = 0; xx < W; ++xx) dst[xx] = T(0);
                        continue;
                    }
                    const T* src = plane + static_cast<int64_t>(sy) * W;
                    for (int xx = 0; xx < W; ++xx) {
                        int sx = xx + i - pad;
                        dst[xx] = (sx < 0 || sx >= W) ? T(0) : src[sx];
                    }
                }
            }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int pad, T* x) {
    const int HW = H * W;
    for (int c = 0; c < C; ++c) {
        T* plane = x + static_cast<int64_t>(c) * HW;
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i) {
                const T* row = col + (static_cast<int64_t>(c) * k * k + j * k + i) * HW;
                for (int y = 0; y < H; ++y) {
                    int sy = y + j - pad;
                    if (sy < 0 || sy >= H) continue;
                    const T* src = row + static_cast<int64_t>(y) * W;
                    T* dst = plane + static_cast<int64_t>(sy) * W;
                    for (int xx = 0; xx < W; ++xx) {
                        int sx = xx + i - pad;
                        if (sx >= 0 && sx < W) dst[sx] += src[xx];
                    }
                }
            }
    }
}

// ---- layers ----------------------------------------------------------------

template <typename T>
class Conv2dT : public LayerT<T> {
public:
    Conv2dT(std::string name, int in_ch, int out_ch, int ksize, int pad,
            std::mt19937& rng)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(ksize), pad_(pad) {
        if (in_ch < 1 || out_ch < 1 || ksize < 1 || pad < 0)
            throw ConfigError("Conv2d: bad geometry");
        weight_.name = name_ + ".weight";
        weight_.init_shape({out_ch, in_ch, ksize, ksize});
        bias_.name = name_ + ".bias";
        bias_.init_shape({out_ch});
        kaiming_uniform(weight_.value, in_ch * ksize * ksize, rng);
    }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        check_input(x);
        x_ = x;
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int HW = H * W, ckk = in_ch_ * k_ * k_;
        TensorT<T> y({N, out_ch_, H, W});
        col_.assign(static_cast<size_t>(ckk) * HW, T(0));
        for (int n = 0; n < N; ++n) {
            im2col(x.ptr() + sample_offset(x, n), in_ch_, H, W, k_, pad_, col_.data());
            T* yn = y.ptr() + sample_offset(y, n);
            prim::gemm_nn(out_ch_, HW, ckk, weight_.value.ptr(), col_.data(), yn, false);
            for (int f = 0; f < out_ch_; ++f) {
                T b = bias_.value.data[static_cast<size_t>(f)];
                T* row = yn + static_cast<int64_t>(f) * HW;
                for (int i = 0; i < HW; ++i) row[i] += b;
            }
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        const int N = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
        const int HW = H * W, ckk = in_ch_ * k_ * k_;
        TensorT<T> dx(x_.shape);
        std::vector<T> dcol(static_cast<size_t>(ckk) * HW);
        for (int n = 0; n < N; ++n) {
            const T* dyn = dy.ptr() + sample_offset(dy, n);
            im2col(x_.ptr() + sample_offset(x_, n), in_ch_, H, W, k_, pad_, col_.data());
            prim::gemm_nt(out_ch_, ckk, HW, dyn, col_.data(), weight_.grad.ptr(), true);
            for (int f = 0; f < out_ch_; ++f)
                bias_.grad.data[static_cast<size_t>(f)] +=
                    static_cast<T>(prim::sum(dyn + static_cast<int64_t>(f) * HW, HW));
            prim::gemm_tn(ckk, HW, out_ch_, weight_.value.ptr(), dyn, dcol.data(), false);
            col2im_add(dcol.data(), in_ch_, H, W, k_, pad_,
                       dx.ptr() + sample_offset(dx, n));
        }
        return dx;
    }

    std::vector<ParamT<T>*> params() override { return {&weight_, &bias_}; }

private:
    void check_input(const TensorT<T>& x) const {
        if (x.ndim() != 4 || x.dim(1) != in_ch_)
            throw ShapeMismatch(name_ + ": expected (N," + std::to_string(in_ch_) +
                                ",H,W) input");
    }
    static int64_t sample_offset(const TensorT<T>& t, int n) {
        return static_cast<int64_t>(n) * t.dim(1) * t.dim(2) * t.dim(3);
    }

    std::string name_;
    int in_ch_, out_ch_, k_, pad_;
    ParamT<T> weight_, bias_;
    TensorT<T> x_;
    std::vector<T> col_;
};

// Involution: the kernel is generated per pixel from that pixel's feature
// vector (two-layer bottleneck, ReLU in between) and shared across channels.
template <typename T>
class Involution2dT : public LayerT<T> {
public:
    Involution2dT(std::string name, int channels, int reduction, int ksize,
                  std::mt19937& rng)
        : name_(std::move(name)), ch_(channels), red_(channels / reduction), k_(ksize),
          pad_((ksize - 1) / 2) {
        if (reduction < 1 || channels % reduction != 0)
            throw ConfigError("Involution2d: channels must divide by reduction");
        if (ksize % 2 == 0) throw ConfigError("Involution2d: kernel must be odd");
        w0_.name = name_ + ".reduce.weight";
        w0_.init_shape({red_, ch_});
        b0_.name = name_ + ".reduce.bias";
        b0_.init_shape({red_});
        w1_.name = name_ + ".span.weight";
        w1_.init_shape({k_ * k_, red_});
        b1_.name = name_ + ".span.bias";
        b1_.init_shape({k_ * k_});
        kaiming_uniform(w0_.value, ch_, rng);
        kaiming_uniform(w1_.value, red_, rng);
    }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        if (x.ndim() != 4 || x.dim(1) != ch_)
            throw ShapeMismatch(name_ + ": expected (N," + std::to_string(ch_) +
                                ",H,W) input");
        x_ = x;
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int HW = H * W, kk = k_ * k_;
        TensorT<T> y({N, ch_, H, W});
        a_.reshape({N, red_, H, W});
        kmat_.reshape({N, kk, H, W});
        std::vector<T> z(static_cast<size_t>(red_) * HW);
        std::vector<T> col(static_cast<size_t>(ch_) * kk * HW);
        for (int n = 0; n < N; ++n) {
            const T* xn = x.ptr() + off(x, n);
            T* an = a_.ptr() + off(a_, n);
            T* kn = kmat_.ptr() + off(kmat_, n);
            // kernel generation: A = W0 x + b0, K = W1 relu(A) + b1
            prim::gemm_nn(red_, HW, ch_, w0_.value.ptr(), xn, an, false);
            add_row_bias(an, b0_.value.ptr(), red_, HW);
            prim::relu(an, z.data(), static_cast<int64_t>(red_) * HW);
            prim::gemm_nn(kk, HW, red_, w1_.value.ptr(), z.data(), kn, false);
            add_row_bias(kn, b1_.value.ptr(), kk, HW);
            // aggregation: y[c] = sum_m K[m] .* shifted x[c]
            im2col(xn, ch_, H, W, k_, pad_, col.data());
            T* yn = y.ptr() + off(y, n);
            for (int c = 0; c < ch_; ++c)
                for (int m = 0; m < kk; ++m)
                    prim::fmadd(kn + static_cast<int64_t>(m) * HW,
                                col.data() + (static_cast<int64_t>(c) * kk + m) * HW,
                                yn + static_cast<int64_t>(c) * HW, HW);
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        const int N = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
        const int HW = H * W, kk = k_ * k_;
        TensorT<T> dx(x_.shape);
        std::vector<T> col(static_cast<size_t>(ch_) * kk * HW);
        std::vector<T> dcol(static_cast<size_t>(ch_) * kk * HW);
        std::vector<T> dkmat(static_cast<size_t>(kk) * HW);
        std::vector<T> z(static_cast<size_t>(red_) * HW);
        std::vector<T> dz(static_cast<size_t>(red_) * HW);
        std::vector<T> da(static_cast<size_t>(red_) * HW);
        for (int n = 0; n < N; ++n) {
            const T* xn = x_.ptr() + off(x_, n);
            const T* an = a_.ptr() + off(a_, n);
            const T* kn = kmat_.ptr() + off(kmat_, n);
            const T* dyn = dy.ptr() + off(dy, n);
            T* dxn = dx.ptr() + off(dx, n);

            im2col(xn, ch_, H, W, k_, pad_, col.data());
            std::fill(dkmat.begin(), dkmat.end(), T(0));
            std::fill(dcol.begin(), dcol.end(), T(0));
            for (int c = 0; c < ch_; ++c)
                for (int m = 0; m < kk; ++m) {
                    const T* dyc = dyn + static_cast<int64_t>(c) * HW;
                    // dK[m] += dy[c] .* col[c,m]; dcol[c,m] += dy[c] .* K[m]
                    prim::fmadd(dyc, col.data() + (static_cast<int64_t>(c) * kk + m) * HW,
                                dkmat.data() + static_cast<int64_t>(m) * HW, HW);
                    prim::fmadd(dyc, kn + static_cast<int64_t>(m) * HW,
                                dcol.data() + (static_cast<int64_t>(c) * kk + m) * HW, HW);
                }
            col2im_add(dcol.data(), ch_, H, W, k_, pad_, dxn);

            // back through the kernel-generation bottleneck
            prim::relu(an, z.data(), static_cast<int64_t>(red_) * HW);
            prim::gemm_nt(kk, red_, HW, dkmat.data(), z.data(), w1_.grad.ptr(), true);
            add_bias_grad(dkmat.data(), b1_.grad.ptr(), kk, HW);
            prim::gemm_tn(red_, HW, kk, w1_.value.ptr(), dkmat.data(), dz.data(), false);
            prim::relu_bwd(an, dz.data(), da.data(), static_cast<int64_t>(red_) * HW);
            prim::gemm_nt(red_, ch_, HW, da.data(), xn, w0_.grad.ptr(), true);
            add_bias_grad(da.data(), b0_.grad.ptr(), red_, HW);
            prim::gemm_tn(ch_, HW, red_, w0_.value.ptr(), da.data(), dcol.data(), false);
            // dcol's first ch_*HW entries now hold dXmat; fold into dx
            for (int64_t i = 0; i < static_cast<int64_t>(ch_) * HW; ++i)
                dxn[i] += dcol[static_cast<size_t>(i)];
        }
        return dx;
    }

    std::vector<ParamT<T>*> params() override { return {&w0_, &b0_, &w1_, &b1_}; }

private:
    static void add_row_bias(T* mat, const T* bias, int rows, int cols) {
        for (int r = 0; r < rows; ++r) {
            T b = bias[r];
            T* row = mat + static_cast<int64_t>(r) * cols;
            for (int i = 0; i < cols; ++i) row[i] += b;
        }
    }
    static void add_bias_grad(const T* mat, T* bias, int rows, int cols) {
        for (int r = 0; r < rows; ++r)
            bias[r] += static_cast<T>(prim::sum(mat + static_cast<int64_t>(r) * cols, cols));
    }
    static int64_t off(const TensorT<T>& t, int n) {
        return static_cast<int64_t>(n) * t.dim(1) * t.dim(2) * t.dim(3);
    }

    std::string name_;
    int ch_, red_, k_, pad_;
    ParamT<T> w0_, b0_, w1_, b1_;
    TensorT<T> x_, a_, kmat_;
};

// BatchNorm over (N,C,H,W) per channel, or (N,D) per feature.
template <typename T>
class BatchNormT : public LayerT<T> {
public:
    BatchNormT(std::string name, int channels)
        : name_(std::move(name)), ch_(channels) {
        gamma_.name = name_ + ".gamma";
        gamma_.init_shape({channels});
        beta_.name = name_ + ".beta";
        beta_.init_shape({channels});
        for (auto& g : gamma_.value.data) g = T(1);
        running_mean_.reshape({channels});
        running_var_.reshape({channels});
        for (auto& v : running_var_.data) v = T(1);
    }

    TensorT<T> forward(const TensorT<T>& x, bool train) override {
        auto [N, spatial] = split_dims(x);
        const int64_t per_ch = static_cast<int64_t>(N) * spatial;
        TensorT<T> y(x.shape);
        if (train && per_ch < 2)
            throw DegenerateBatch(name_ + ": batch statistics need at least 2 values");
        train_ = train;
        if (train) {
            x_ = x;
            mean_.assign(static_cast<size_t>(ch_), 0.0);
            inv_std_.assign(static_cast<size_t>(ch_), 0.0);
            for (int c = 0; c < ch_; ++c) {
                double s = 0.0;
                for_channel(x, c, [&](const T* p, int64_t len) { s += prim::sum(p, len); });
                double mu = s / static_cast<double>(per_ch);
                double sq = 0.0;
                for_channel(x, c, [&](const T* p, int64_t len) {
                    sq += prim::sumsq_diff(p, len, static_cast<T>(mu));
                });
                double var = sq / static_cast<double>(per_ch);
                mean_[static_cast<size_t>(c)] = mu;
                inv_std_[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + kEps);
                double unbiased = sq / static_cast<double>(per_ch - 1);
                auto& rm = running_mean_.data[static_cast<size_t>(c)];
                auto& rv = running_var_.data[static_cast<size_t>(c)];
                rm = static_cast<T>((1.0 - kMomentum) * rm + kMomentum * mu);
                rv = static_cast<T>((1.0 - kMomentum) * rv + kMomentum * unbiased);
            }
        }
        for (int c = 0; c < ch_; ++c) {
            double mu, istd;
            if (train) {
                mu = mean_[static_cast<size_t>(c)];
                istd = inv_std_[static_cast<size_t>(c)];
            } else {
                mu = running_mean_.data[static_cast<size_t>(c)];
                istd = 1.0 / std::sqrt(static_cast<double>(running_var_.data[static_cast<size_t>(c)]) + kEps);
            }
            T g = gamma_.value.data[static_cast<size_t>(c)];
            T b = beta_.value.data[static_cast<size_t>(c)];
            T scale = static_cast<T>(g * istd);
            T shift = static_cast<T>(b - g * istd * mu);
            copy_channel_affine(x, y, c, scale, shift);
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!train_) throw ShapeMismatch(name_ + ": backward requires a training-mode forward");
        auto [N, spatial] = split_dims(x_);
        const double n = static_cast<double>(N) * spatial;
        TensorT<T> dx(x_.shape);
        for (int c = 0; c < ch_; ++c) {
            double mu = mean_[static_cast<size_t>(c)];
            double istd = inv_std_[static_cast<size_t>(c)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            zip_channel(dy, x_, c, [&](const T* d, const T* xv, int64_t len) {
                for (int64_t i = 0; i < len; ++i) {
                    double xhat = (static_cast<double>(xv[i]) - mu) * istd;
                    sum_dy += d[i];
                    sum_dy_xhat += d[i] * xhat;
                }
            });
            double g = gamma_.value.data[static_cast<size_t>(c)];
            gamma_.grad.data[static_cast<size_t>(c)] += static_cast<T>(sum_dy_xhat);
            beta_.grad.data[static_cast<size_t>(c)] += static_cast<T>(sum_dy);
            double k1 = g * istd / n;
            zip_channel_out(dy, x_, dx, c, [&](const T* d, const T* xv, T* o, int64_t len) {
                for (int64_t i = 0; i < len; ++i) {
                    double xhat = (static_cast<double>(xv[i]) - mu) * istd;
                    o[i] = static_cast<T>(k1 * (n * d[i] - sum_dy - xhat * sum_dy_xhat));
                }
            });
        }
        return dx;
    }

    std::vector<ParamT<T>*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::pair<std::string, TensorT<T>*>> buffers() override {
        return {{name_ + ".running_mean", &running_mean_},
                {name_ + ".running_var", &running_var_}};
    }

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

private:
    std::pair<int, int64_t> split_dims(const TensorT<T>& x) const {
        if (x.ndim() == 4) {
            if (x.dim(1) != ch_) throw ShapeMismatch(name_ + ": channel count mismatch");
            return {x.dim(0), static_cast<int64_t>(x.dim(2)) * x.dim(3)};
        }
        if (x.ndim() == 2) {
            if (x.dim(1) != ch_) throw ShapeMismatch(name_ + ": feature count mismatch");
            return {x.dim(0), 1};
        }
        throw ShapeMismatch(name_ + ": expected 2D or 4D input");
    }

    template <typename F>
    void for_channel(const TensorT<T>& t, int c, F&& f) const {
        auto [N, spatial] = split_dims(t);
        for (int nn = 0; nn < N; ++nn)
            f(t.ptr() + (static_cast<int64_t>(nn) * ch_ + c) * spatial, spatial);
    }
    template <typename F>
    void zip_channel(const TensorT<T>& a, const TensorT<T>& b, int c, F&& f) const {
        auto [N, spatial] = split_dims(a);
        for (int nn = 0; nn < N; ++nn) {
            int64_t o = (static_cast<int64_t>(nn) * ch_ + c) * spatial;
            f(a.ptr() + o, b.ptr() + o, spatial);
        }
    }
    template <typename F>
    void zip_channel_out(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>& out,
                         int c, F&& f) const {
        auto [N, spatial] = split_dims(a);
        for (int nn = 0; nn < N; ++nn) {
            int64_t o = (static_cast<int64_t>(nn) * ch_ + c) * spatial;
            f(a.ptr() + o, b.ptr() + o, out.ptr() + o, spatial);
        }
    }
    void copy_channel_affine(const TensorT<T>& x, TensorT<T>& y, int c, T scale, T shift) {
        auto [N, spatial] = split_dims(x);
        for (int nn = 0; nn < N; ++nn) {
            int64_t o = (static_cast<int64_t>(nn) * ch_ + c) * spatial;
            const T* src = x.ptr() + o;
            T* dst = y.ptr() + o;
            for (int64_t i = 0; i < spatial; ++i) dst[i] = scale * src[i] + shift;
        }
    }

    std::string name_;
    int ch_;
    ParamT<T> gamma_, beta_;
    TensorT<T> running_mean_, running_var_;
    TensorT<T> x_;
    std::vector<double> mean_, inv_std_;
    bool train_ = false;
};

// 2x2 max pooling, stride 2. Ties resolve to the first element in row-major
// window order.
template <typename T>
class MaxPool2T : public LayerT<T> {
public:
    explicit MaxPool2T(std::string name) : name_(std::move(name)) {}

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        if (x.ndim() != 4) throw ShapeMismatch(name_ + ": expected 4D input");
        if (x.dim(2) % 2 || x.dim(3) % 2)
            throw ShapeMismatch(name_ + ": spatial dims must be even");
        in_shape_ = x.shape;
        const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        const int OH = H / 2, OW = W / 2;
        TensorT<T> y({N, C, OH, OW});
        argmax_.assign(static_cast<size_t>(y.numel()), 0);
        int64_t oi = 0;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T* plane = x.ptr() + (static_cast<int64_t>(n) * C + c) * H * W;
                for (int y0 = 0; y0 < OH; ++y0)
                    for (int x0 = 0; x0 < OW; ++x0, ++oi) {
                        int64_t base = static_cast<int64_t>(2 * y0) * W + 2 * x0;
                        int64_t best = base;
                        T bv = plane[base];
                        const int64_t cand[3] = {base + 1, base + W, base + W + 1};
                        for (int64_t idx : cand)
                            if (plane[idx] > bv) {
                                bv = plane[idx];
                                best = idx;
                            }
                        y.data[static_cast<size_t>(oi)] = bv;
                        argmax_[static_cast<size_t>(oi)] =
                            (static_cast<int64_t>(n) * C + c) * H * W + best;
                    }
            }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        TensorT<T> dx(in_shape_);
        for (int64_t i = 0; i < dy.numel(); ++i)
            dx.data[static_cast<size_t>(argmax_[static_cast<size_t>(i)])] +=
                dy.data[static_cast<size_t>(i)];
        return dx;
    }

private:
    std::string name_;
    std::vector<int> in_shape_;
    std::vector<int64_t> argmax_;
};

template <typename T>
class LinearT : public LayerT<T> {
public:
    LinearT(std::string name, int in_dim, int out_dim, std::mt19937& rng)
        : name_(std::move(name)), in_(in_dim), out_(out_dim) {
        weight_.name = name_ + ".weight";
        weight_.init_shape({out_dim, in_dim});
        bias_.name = name_ + ".bias";
        bias_.init_shape({out_dim});
        kaiming_uniform(weight_.value, in_dim, rng);
    }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        if (x.ndim() != 2 || x.dim(1) != in_)
            throw ShapeMismatch(name_ + ": expected (N," + std::to_string(in_) + ") input");
        x_ = x;
        const int N = x.dim(0);
        TensorT<T> y({N, out_});
        prim::gemm_nt(N, out_, in_, x.ptr(), weight_.value.ptr(), y.ptr(), false);
        for (int n = 0; n < N; ++n) {
            T* row = y.ptr() + static_cast<int64_t>(n) * out_;
            for (int j = 0; j < out_; ++j) row[j] += bias_.value.data[static_cast<size_t>(j)];
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        const int N = x_.dim(0);
        prim::gemm_tn(out_, in_, N, dy.ptr(), x_.ptr(), weight_.grad.ptr(), true);
        for (int n = 0; n < N; ++n) {
            const T* row = dy.ptr() + static_cast<int64_t>(n) * out_;
            for (int j = 0; j < out_; ++j) bias_.grad.data[static_cast<size_t>(j)] += row[j];
        }
        TensorT<T> dx({N, in_});
        prim::gemm_nn(N, in_, out_, dy.ptr(), weight_.value.ptr(), dx.ptr(), false);
        return dx;
    }

    std::vector<ParamT<T>*> params() override { return {&weight_, &bias_}; }

private:
    std::string name_;
    int in_, out_;
    ParamT<T> weight_, bias_;
    TensorT<T> x_;
};

template <typename T>
class ReluT : public LayerT<T> {
public:
    explicit ReluT(std::string name) : name_(std::move(name)) {}

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        x_ = x;
        TensorT<T> y(x.shape);
        prim::relu(x.ptr(), y.ptr(), x.numel());
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        TensorT<T> dx(x_.shape);
        prim::relu_bwd(x_.ptr(), dy.ptr(), dx.ptr(), x_.numel());
        return dx;
    }

private:
    std::string name_;
    TensorT<T> x_;
};

// Softmax + cross entropy, batch-mean reduction, log-sum-exp stabilized.
template <typename T>
struct SoftmaxCeResult {
    double loss = 0.0;
    TensorT<T> dlogits;           // d(loss)/d(logits)
    std::vector<double> log_probs; // N*K row-major, for prediction paths
};

template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                         const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeMismatch("softmax_cross_entropy: expected 2D logits");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N)
        throw ShapeMismatch("softmax_cross_entropy: label count mismatch");
    SoftmaxCeResult<T> r;
    r.dlogits.reshape(logits.shape);
    r.log_probs.resize(static_cast<size_t>(N) * K);
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        int lab = labels[static_cast<size_t>(n)];
        if (lab < 0 || lab >= K) throw RangeError("softmax_cross_entropy: label out of range");
        const T* row = logits.ptr() + static_cast<int64_t>(n) * K;
        double mx = row[0];
        for (int j = 1; j < K; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double se = 0.0;
        for (int j = 0; j < K; ++j) se += std::exp(static_cast<double>(row[j]) - mx);
        double lse = mx + std::log(se);
        total += lse - static_cast<double>(row[lab]);
        T* drow = r.dlogits.ptr() + static_cast<int64_t>(n) * K;
        for (int j = 0; j < K; ++j) {
            double logp = static_cast<double>(row[j]) - lse;
            r.log_probs[static_cast<size_t>(n) * K + j] = logp;
            double p = std::exp(logp);
            drow[j] = static_cast<T>((p - (j == lab ? 1.0 : 0.0)) / N);
        }
    }
    r.loss = total / N;
    return r;
}

using Layer = LayerT<float>;
using Param = ParamT<float>;
using Conv2d = Conv2dT<float>;
using Involution2d = Involution2dT<float>;
using BatchNorm = BatchNormT<float>;
using MaxPool2 = MaxPool2T<float>;
using Linear = LinearT<float>;
using Relu = ReluT<float>;

// ---- optimizer and schedule ------------------------------------------------

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

class Adam {
public:
    explicit Adam(std::vector<Param*> params, AdamConfig cfg = {});

    void set_lr(float lr) { cfg_.lr = lr; }
    float lr() const { return cfg_.lr; }
    int64_t steps() const { return t_; }

    void zero_grad();
    void step();

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

// lr(epoch) = initial * factor^floor(epoch / step_size), epoch counted from 0.
struct StepLrSchedule {
    double initial = 1e-3;
    double factor = 0.5;
    int step_size = 2;

    double lr_at(int epoch) const;
};

extern template struct TensorT<float>;
extern template struct TensorT<double>;
extern template class Conv2dT<float>;
extern template class Conv2dT<double>;
extern template class Involution2dT<float>;
extern template class Involution2dT<double>;
extern template class BatchNormT<float>;
extern template class BatchNormT<double>;
extern template class MaxPool2T<float>;
extern template class MaxPool2T<double>;
extern template class LinearT<float>;
extern template class LinearT<double>;
extern template class ReluT<float>;
extern template class ReluT<double>;

} // namespace splice::nn
