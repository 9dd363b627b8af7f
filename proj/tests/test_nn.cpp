#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splice/nn.hpp"
#include "splice/rng.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

using namespace splice;
using nn::TensorT;

namespace {

using DTensor = TensorT<double>;

DTensor rand_tensor(std::vector<int> shape, rng::Stream& s, double lo = -1.0, double hi = 1.0) {
    DTensor t(std::move(shape));
    for (auto& v : t.data) v = s.uniform(lo, hi);
    return t;
}

double weighted_loss(const DTensor& y, const DTensor& w) {
    double loss = 0;
    for (size_t i = 0; i < y.data.size(); ++i) loss += y.data[i] * w.data[i];
    return loss;
}

// Central finite differences on every input entry and every parameter entry
// against the layer's analytic backward. The loss is a fixed random linear
// functional of the output so d(loss)/dy is constant.
void gradcheck(nn::LayerT<double>& layer, DTensor x, rng::Stream& s, double tol = 1e-3,
               double h = 1e-6) {
    auto y = layer.forward(x, true);
    DTensor w = rand_tensor(y.shape, s);
    layer.zero_grad();
    DTensor dx = layer.backward(w);
    REQUIRE(dx.shape == x.shape);

    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({1e-4, std::abs(a), std::abs(b)});
    };

    for (size_t i = 0; i < x.data.size(); ++i) {
        double keep = x.data[i];
        x.data[i] = keep + h;
        double up = weighted_loss(layer.forward(x, true), w);
        x.data[i] = keep - h;
        double dn = weighted_loss(layer.forward(x, true), w);
        x.data[i] = keep;
        CHECK(rel(dx.data[i], (up - dn) / (2 * h)) < tol);
    }

    // restore the saved forward state backward() consumed, then params
    layer.forward(x, true);
    for (auto* p : layer.params()) {
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double keep = p->value.data[i];
            p->value.data[i] = keep + h;
            double up = weighted_loss(layer.forward(x, true), w);
            p->value.data[i] = keep - h;
            double dn = weighted_loss(layer.forward(x, true), w);
            p->value.data[i] = keep;
            CHECK(rel(p->grad.data[i], (up - dn) / (2 * h)) < tol);
        }
    }
}

} // namespace

TEST_CASE("tensor reshape and view enforce geometry") {
    nn::Tensor t({2, 3});
    CHECK(t.numel() == 6);
    t.view({3, 2});
    CHECK(t.dim(0) == 3);
    CHECK_THROWS_AS(t.view({4, 2}), ShapeMismatch);
    CHECK_THROWS_AS(nn::Tensor({0, 3}), ShapeMismatch);
}

TEST_CASE("conv2d gradients pass finite differences") {
    rng::Stream s(1001);
    std::mt19937 init(7);
    for (int trial = 0; trial < 20; ++trial) {
        int in_ch = s.uniform_int(1, 3), out_ch = s.uniform_int(1, 3);
        int k = trial % 2 == 0 ? 3 : 1;
        int pad = k == 3 ? 1 : 0;
        int n = s.uniform_int(1, 2), hw = s.uniform_int(3, 5);
        nn::Conv2dT<double> conv("c", in_ch, out_ch, k, pad, init);
        gradcheck(conv, rand_tensor({n, in_ch, hw, hw}, s), s);
    }
}

TEST_CASE("involution2d gradients pass finite differences") {
    rng::Stream s(1002);
    std::mt19937 init(8);
    for (int trial = 0; trial < 20; ++trial) {
        int red = s.uniform_int(1, 2) * 2;
        int ch = red * s.uniform_int(1, 2);
        int n = s.uniform_int(1, 2), hw = s.uniform_int(3, 5);
        nn::Involution2dT<double> inv("i", ch, red, 3, init);
        gradcheck(inv, rand_tensor({n, ch, hw, hw}, s), s);
    }
}

TEST_CASE("batchnorm gradients pass finite differences in 2D and 1D") {
    rng::Stream s(1003);
    std::mt19937 init(9);
    for (int trial = 0; trial < 10; ++trial) {
        int ch = s.uniform_int(1, 4);
        nn::BatchNormT<double> bn2("b2", ch);
        gradcheck(bn2, rand_tensor({s.uniform_int(2, 3), ch, 4, 4}, s), s);

        int d = s.uniform_int(2, 6);
        nn::BatchNormT<double> bn1("b1", d);
        gradcheck(bn1, rand_tensor({s.uniform_int(3, 6), d}, s), s);
    }
}

TEST_CASE("maxpool2 gradients pass finite differences away from ties") {
    rng::Stream s(1004);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = rand_tensor({s.uniform_int(1, 2), s.uniform_int(1, 3), 4, 6}, s);
        // separate every entry so no 2x2 window ever ties within the
        // finite-difference step
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += static_cast<double>(i) * 1e-3;
        nn::MaxPool2T<double> pool("p");
        gradcheck(pool, std::move(x), s);
    }
}

TEST_CASE("linear gradients pass finite differences") {
    rng::Stream s(1005);
    std::mt19937 init(10);
    for (int trial = 0; trial < 20; ++trial) {
        int in = s.uniform_int(1, 8), out = s.uniform_int(1, 6);
        nn::LinearT<double> lin("l", in, out, init);
        gradcheck(lin, rand_tensor({s.uniform_int(1, 4), in}, s), s);
    }
}

TEST_CASE("relu gradients pass finite differences away from the kink") {
    rng::Stream s(1006);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = rand_tensor({s.uniform_int(1, 3), s.uniform_int(2, 10)}, s);
        for (auto& v : x.data)
            if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
        nn::ReluT<double> relu("r");
        gradcheck(relu, std::move(x), s);
    }
}

TEST_CASE("softmax cross entropy gradients pass finite differences") {
    rng::Stream s(1007);
    for (int trial = 0; trial < 20; ++trial) {
        int n = s.uniform_int(2, 6), k = s.uniform_int(2, 5);
        auto logits = rand_tensor({n, k}, s, -2.0, 2.0);
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& l : labels) l = s.uniform_int(0, k - 1);

        auto r = nn::softmax_cross_entropy(logits, labels);
        const double h = 1e-6;
        for (size_t i = 0; i < logits.data.size(); ++i) {
            double keep = logits.data[i];
            logits.data[i] = keep + h;
            double up = nn::softmax_cross_entropy(logits, labels).loss;
            logits.data[i] = keep - h;
            double dn = nn::softmax_cross_entropy(logits, labels).loss;
            logits.data[i] = keep;
            double num = (up - dn) / (2 * h);
            CHECK(std::abs(r.dlogits.data[i] - num) /
                      std::max({1e-4, std::abs(num), std::abs(r.dlogits.data[i])}) <
                  1e-3);
        }
    }
}

TEST_CASE("conv2d all-ones kernel computes the overlap counts") {
    std::mt19937 init(11);
    nn::Conv2dT<double> conv("c", 1, 1, 3, 1, init);
    auto params = conv.params();
    for (auto& v : params[0]->value.data) v = 1.0; // weight
    for (auto& v : params[1]->value.data) v = 0.0; // bias
    DTensor x({1, 1, 4, 4});
    for (auto& v : x.data) v = 1.0;
    auto y = conv.forward(x, false);
    auto at = [&](int r, int c) { return y.data[static_cast<size_t>(r * 4 + c)]; };
    CHECK(at(0, 0) == 4);
    CHECK(at(0, 1) == 6);
    CHECK(at(1, 1) == 9);
    CHECK(at(3, 3) == 4);
    CHECK(at(3, 1) == 6);
}

TEST_CASE("involution with a center-delta kernel is the identity") {
    std::mt19937 init(12);
    nn::Involution2dT<double> inv("i", 4, 2, 3, init);
    auto params = inv.params(); // w0, b0, w1, b1
    for (auto& v : params[0]->value.data) v = 0.0;
    for (auto& v : params[1]->value.data) v = 0.0;
    for (auto& v : params[2]->value.data) v = 0.0;
    for (auto& v : params[3]->value.data) v = 0.0;
    params[3]->value.data[4] = 1.0; // kernel = delta at the 3x3 center

    rng::Stream s(2020);
    auto x = rand_tensor({2, 4, 5, 5}, s);
    auto y = inv.forward(x, false);
    CHECK(y.data == x.data);

    params[3]->value.data[4] = 0.0; // all-zero kernel annihilates
    auto z = inv.forward(x, false);
    for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("involution kernels are shared across channels") {
    // Permuting input channels together with w0's columns permutes the
    // output channels the same way: the generated kernel is unchanged and
    // each channel is aggregated independently.
    std::mt19937 init(13);
    nn::Involution2dT<double> a("a", 3, 1, 3, init);
    std::mt19937 init2(13);
    nn::Involution2dT<double> b("b", 3, 1, 3, init2);

    const int perm[3] = {2, 0, 1};
    auto pa = a.params(), pb = b.params();
    // w0 has shape (red, ch); permute columns of b's copy
    auto& w0a = pa[0]->value;
    auto& w0b = pb[0]->value;
    int red = w0a.dim(0), ch = w0a.dim(1);
    for (int r = 0; r < red; ++r)
        for (int c = 0; c < ch; ++c)
            w0b.data[static_cast<size_t>(r * ch + c)] =
                w0a.data[static_cast<size_t>(r * ch + perm[c])];

    rng::Stream s(2021);
    auto x = rand_tensor({1, 3, 4, 4}, s);
    DTensor xp(x.shape);
    const int hw = 16;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw; ++i)
            xp.data[static_cast<size_t>(c * hw + i)] = x.data[static_cast<size_t>(perm[c] * hw + i)];

    auto ya = a.forward(x, false);
    auto yb = b.forward(xp, false);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw; ++i)
            CHECK(yb.data[static_cast<size_t>(c * hw + i)] ==
                  doctest::Approx(ya.data[static_cast<size_t>(perm[c] * hw + i)]).epsilon(1e-12));
}

TEST_CASE("batchnorm normalizes in train mode and tracks running stats") {
    nn::BatchNormT<double> bn("bn", 3);
    rng::Stream s(2022);
    auto x = rand_tensor({4, 3, 5, 5}, s, -2.0, 3.0);
    auto y = bn.forward(x, true);

    const int64_t per_ch = 4 * 5 * 5;
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 25; ++i)
                mean += y.data[static_cast<size_t>(((n * 3 + c) * 25) + i)];
        mean /= static_cast<double>(per_ch);
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 25; ++i) {
                double d = y.data[static_cast<size_t>(((n * 3 + c) * 25) + i)] - mean;
                var += d * d;
            }
        var /= static_cast<double>(per_ch);
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-4); // off by var/(var+eps)
    }

    // momentum 0.1 onto the zero/one initial running stats
    auto buffers = bn.buffers();
    REQUIRE(buffers.size() == 2);
    for (int c = 0; c < 3; ++c) {
        double bmean = 0, bsq = 0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 25; ++i)
                bmean += x.data[static_cast<size_t>(((n * 3 + c) * 25) + i)];
        bmean /= static_cast<double>(per_ch);
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 25; ++i) {
                double d = x.data[static_cast<size_t>(((n * 3 + c) * 25) + i)] - bmean;
                bsq += d * d;
            }
        double unbiased = bsq / static_cast<double>(per_ch - 1);
        CHECK(buffers[0].second->data[static_cast<size_t>(c)] ==
              doctest::Approx(0.1 * bmean).epsilon(1e-10));
        CHECK(buffers[1].second->data[static_cast<size_t>(c)] ==
              doctest::Approx(0.9 + 0.1 * unbiased).epsilon(1e-10));
    }

    // eval mode applies the running stats as a fixed affine map
    auto ye = bn.forward(x, false);
    double rm = buffers[0].second->data[0];
    double rv = buffers[1].second->data[0];
    double want = (x.data[0] - rm) / std::sqrt(rv + 1e-5);
    CHECK(ye.data[0] == doctest::Approx(want).epsilon(1e-10));

    nn::BatchNormT<double> tiny("t", 2);
    DTensor one({1, 2});
    CHECK_THROWS_AS(tiny.forward(one, true), DegenerateBatch);
}

TEST_CASE("maxpool picks window maxima and routes ties to the first entry") {
    nn::MaxPool2T<double> pool("p");
    DTensor x({1, 1, 2, 2});
    x.data = {1, 2, 3, 4};
    auto y = pool.forward(x, false);
    CHECK(y.data[0] == 4);

    DTensor flat({1, 1, 2, 2});
    flat.data = {7, 7, 7, 7};
    pool.forward(flat, false);
    DTensor dy({1, 1, 1, 1});
    dy.data = {1.0};
    auto dx = pool.backward(dy);
    CHECK(dx.data[0] == 1.0); // first index of the window wins the tie
    CHECK(dx.data[1] == 0.0);
    CHECK(dx.data[2] == 0.0);
    CHECK(dx.data[3] == 0.0);

    DTensor odd({1, 1, 3, 3});
    CHECK_THROWS_AS(pool.forward(odd, false), ShapeMismatch);
}

TEST_CASE("softmax cross entropy closed forms") {
    DTensor logits({2, 2});
    logits.data = {0, 0, 0, 0};
    auto r = nn::softmax_cross_entropy(logits, {0, 1});
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // log-prob rows exponentiate to a distribution; dlogits rows sum to 0
    for (int n = 0; n < 2; ++n) {
        double p = std::exp(r.log_probs[static_cast<size_t>(n) * 2]) +
                   std::exp(r.log_probs[static_cast<size_t>(n) * 2 + 1]);
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.dlogits.data[static_cast<size_t>(n) * 2] +
                  r.dlogits.data[static_cast<size_t>(n) * 2 + 1] ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, {0}), ShapeMismatch);
    CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, {0, 5}), RangeError);
}

TEST_CASE("adam takes a near-unit first step and converges on a quadratic") {
    nn::Param w;
    w.name = "w";
    w.init_shape({1});
    w.value.data[0] = 5.0f;

    nn::AdamConfig cfg;
    cfg.lr = 0.001f;
    nn::Adam opt({&w}, cfg);
    w.grad.data[0] = 2.0f * (w.value.data[0] - 3.0f); // d/dw (w-3)^2
    opt.step();
    // bias-corrected first step is lr * g/(|g|+eps) = lr within eps
    CHECK(std::abs(w.value.data[0] - (5.0f - 0.001f)) < 1e-6);
    CHECK(opt.steps() == 1);

    opt.zero_grad();
    CHECK(w.grad.data[0] == 0.0f);

    nn::AdamConfig cfg2;
    cfg2.lr = 0.01f;
    w.value.data[0] = 5.0f;
    nn::Adam opt2({&w}, cfg2);
    for (int i = 0; i < 2000; ++i) {
        w.grad.data[0] = 2.0f * (w.value.data[0] - 3.0f);
        opt2.step();
        opt2.zero_grad();
    }
    CHECK(std::abs(w.value.data[0] - 3.0f) < 0.05);
}

TEST_CASE("step schedule halves every two epochs from 0.001") {
    nn::StepLrSchedule sched;
    sched.initial = 0.001;
    sched.factor = 0.5;
    sched.step_size = 2;
    CHECK(sched.lr_at(0) == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(sched.lr_at(1) == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(sched.lr_at(2) == doctest::Approx(0.0005).epsilon(1e-15));
    CHECK(sched.lr_at(3) == doctest::Approx(0.0005).epsilon(1e-15));
    CHECK(sched.lr_at(4) == doctest::Approx(0.00025).epsilon(1e-15));
    CHECK(sched.lr_at(8) == doctest::Approx(0.0000625).epsilon(1e-15));
}

TEST_CASE("float layers agree with the double reference within float precision") {
    std::mt19937 init_f(77), init_d(77);
    nn::Conv2dT<float> cf("c", 3, 4, 3, 1, init_f);
    nn::Conv2dT<double> cd("c", 3, 4, 3, 1, init_d);
    // same mt19937 draws -> same parameters up to float rounding
    rng::Stream s(31);
    auto xd = rand_tensor({2, 3, 8, 8}, s);
    nn::Tensor xf(xd.shape);
    for (size_t i = 0; i < xd.data.size(); ++i) xf.data[i] = static_cast<float>(xd.data[i]);

    auto yf = cf.forward(xf, false);
    auto yd = cd.forward(xd, false);
    REQUIRE(yf.numel() == yd.numel());
    for (size_t i = 0; i < yd.data.size(); ++i)
        CHECK(std::abs(static_cast<double>(yf.data[i]) - yd.data[i]) < 1e-4);
}
