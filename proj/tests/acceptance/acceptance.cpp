// Release gate: one line per criterion, PASS/FAIL, exit 0 only when every
// criterion holds. Tolerances are pinned here, not in flags.

#include "splice/features.hpp"
#include "splice/gen.hpp"
#include "splice/harness.hpp"
#include "splice/jpeg.hpp"
#include "splice/model.hpp"
#include "splice/nn.hpp"
#include "splice/rng.hpp"

#include "../test_util.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace splice;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---- 1: codec round-trip ---------------------------------------------------

Outcome criterion_roundtrip() {
    auto t0 = Clock::now();
    int ok = 0, total = 0;
    for (uint64_t i = 0; i < 50; ++i) {
        auto img = gen::gen_image(128, 1, i);
        for (int qf : {30, 50, 75, 95}) {
            ++total;
            jpeg::CoefficientImage written;
            auto bytes = jpeg::encode(img, qf, jpeg::Subsampling::s420, &written);
            auto parsed = jpeg::parse_coefficients({bytes.data(), bytes.size()});
            bool same = parsed.planes.size() == written.planes.size();
            for (size_t c = 0; same && c < parsed.planes.size(); ++c)
                same = parsed.planes[c].coeffs == written.planes[c].coeffs;
            ok += same;
        }
    }
    double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/%d bit-exact in %.1fs (limit 60s)", ok, total, dt);
    return {ok == total && dt < 60.0, buf};
}

// ---- 2: reference interop --------------------------------------------------

Outcome criterion_interop() {
    auto t0 = Clock::now();
    auto idx = testutil::fixture_index();
    if (idx.size() < 20) return {false, "fixture corpus too small"};
    int files_ok = 0;
    double worst = 1.0;
    for (const auto& e : idx) {
        auto bytes = jpeg::read_file(testutil::fixture_path(e.name));
        auto px = jpeg::decode_pixels(jpeg::parse_coefficients({bytes.data(), bytes.size()}));
        auto want = testutil::read_bytes(
            testutil::fixture_path(e.name.substr(0, e.name.size() - 4) + ".raw"));
        if (want.size() != px.data.size()) continue;
        size_t close = 0;
        for (size_t i = 0; i < want.size(); ++i)
            close += std::abs(static_cast<int>(want[i]) - px.data[i]) <= 2;
        double frac = static_cast<double>(close) / static_cast<double>(want.size());
        worst = std::min(worst, frac);
        files_ok += frac >= 0.999;
    }
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%d/%zu files with >=99.9%% samples within +-2 (worst %.5f) in %.1fs",
                  files_ok, idx.size(), worst, dt);
    return {files_ok == static_cast<int>(idx.size()) && dt < 60.0, buf};
}

// ---- 3: histogram laws -----------------------------------------------------

Outcome criterion_histograms() {
    auto t0 = Clock::now();
    auto dir = testutil::scratch_dir("accept_hist");
    gen::DatasetOptions opt;
    opt.count = 100; // 100 originals + 100 spliced = 200 files
    opt.seed = 33;
    opt.image_size = 128;
    opt.out_dir = dir;
    auto rows = gen::gen_dataset(opt);

    int files = 0, sum_ok = 0, std_ok = 0;
    for (const auto& r : rows) {
        auto bytes = jpeg::read_file(dir + "/" + r.name);
        auto ci = jpeg::parse_coefficients({bytes.data(), bytes.size()});
        auto h = feat::ac_histograms(ci);
        ++files;

        bool sums = h.block_count == ci.planes[0].block_count();
        for (int row = 0; row < feat::kNumCoeffs && sums; ++row) {
            uint64_t s = 0;
            for (int b = 0; b < feat::kNumBins; ++b) s += h.at(row, b);
            sums = s == h.block_count;
        }
        sum_ok += sums;

        auto f = feat::standardize(h);
        double mean = 0;
        for (float v : f) mean += v;
        mean /= static_cast<double>(f.size());
        double var = 0;
        for (float v : f) var += (v - mean) * (v - mean);
        var /= static_cast<double>(f.size());
        std_ok += std::abs(mean) <= 1e-5 && std::abs(std::sqrt(var) - 1.0) <= 1e-5;
    }
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d files: %d row-sum exact, %d mean/std within 1e-5, %.1fs",
                  files, sum_ok, std_ok, dt);
    return {files == 200 && sum_ok == files && std_ok == files && dt < 60.0, buf};
}

// ---- 4: gradient verification ----------------------------------------------

using DTensor = nn::TensorT<double>;

DTensor rand_tensor(std::vector<int> shape, rng::Stream& s) {
    DTensor t(std::move(shape));
    for (auto& v : t.data) v = s.uniform(-1.0, 1.0);
    return t;
}

double weighted_loss(const DTensor& y, const DTensor& w) {
    double loss = 0;
    for (size_t i = 0; i < y.data.size(); ++i) loss += y.data[i] * w.data[i];
    return loss;
}

// max relative error between analytic and central-difference gradients over
// every input and parameter entry
double gradcheck_max_rel(nn::LayerT<double>& layer, DTensor x, rng::Stream& s) {
    const double h = 1e-6;
    auto y = layer.forward(x, true);
    DTensor w = rand_tensor(y.shape, s);
    layer.zero_grad();
    DTensor dx = layer.backward(w);

    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({1e-4, std::abs(a), std::abs(b)});
    };
    double worst = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        double keep = x.data[i];
        x.data[i] = keep + h;
        double up = weighted_loss(layer.forward(x, true), w);
        x.data[i] = keep - h;
        double dn = weighted_loss(layer.forward(x, true), w);
        x.data[i] = keep;
        worst = std::max(worst, rel(dx.data[i], (up - dn) / (2 * h)));
    }
    layer.forward(x, true);
    for (auto* p : layer.params())
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double keep = p->value.data[i];
            p->value.data[i] = keep + h;
            double up = weighted_loss(layer.forward(x, true), w);
            p->value.data[i] = keep - h;
            double dn = weighted_loss(layer.forward(x, true), w);
            p->value.data[i] = keep;
            worst = std::max(worst, rel(p->grad.data[i], (up - dn) / (2 * h)));
        }
    return worst;
}

Outcome criterion_gradients() {
    auto t0 = Clock::now();
    const double tol = 1e-3;
    double worst = 0;
    int trials = 0, failed = 0;
    rng::Stream s(8801);
    std::mt19937 init(88);

    auto record = [&](double r) {
        ++trials;
        failed += r >= tol;
        worst = std::max(worst, r);
    };

    for (int t = 0; t < 20; ++t) {
        int in_ch = s.uniform_int(1, 3), out_ch = s.uniform_int(1, 3);
        nn::Conv2dT<double> conv("c", in_ch, out_ch, t % 2 ? 1 : 3, t % 2 ? 0 : 1, init);
        record(gradcheck_max_rel(conv, rand_tensor({s.uniform_int(1, 2), in_ch, 4, 4}, s), s));
    }
    for (int t = 0; t < 20; ++t) {
        int red = 2 * s.uniform_int(1, 2), ch = red * s.uniform_int(1, 2);
        nn::Involution2dT<double> inv("i", ch, red, 3, init);
        record(gradcheck_max_rel(inv, rand_tensor({s.uniform_int(1, 2), ch, 4, 4}, s), s));
    }
    for (int t = 0; t < 20; ++t) {
        int ch = s.uniform_int(1, 4);
        nn::BatchNormT<double> bn2("b", ch);
        record(gradcheck_max_rel(bn2, rand_tensor({s.uniform_int(2, 3), ch, 3, 3}, s), s));
        int d = s.uniform_int(2, 6);
        nn::BatchNormT<double> bn1("b1", d);
        record(gradcheck_max_rel(bn1, rand_tensor({s.uniform_int(3, 5), d}, s), s));
    }
    for (int t = 0; t < 20; ++t) {
        nn::MaxPool2T<double> pool("p");
        auto x = rand_tensor({s.uniform_int(1, 2), s.uniform_int(1, 2), 4, 4}, s);
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += static_cast<double>(i) * 1e-3;
        record(gradcheck_max_rel(pool, std::move(x), s));
    }
    for (int t = 0; t < 20; ++t) {
        int in = s.uniform_int(1, 8), out = s.uniform_int(1, 6);
        nn::LinearT<double> lin("l", in, out, init);
        record(gradcheck_max_rel(lin, rand_tensor({s.uniform_int(1, 4), in}, s), s));
    }
    for (int t = 0; t < 20; ++t) {
        const double h = 1e-6;
        int n = s.uniform_int(2, 5), k = s.uniform_int(2, 5);
        auto logits = rand_tensor({n, k}, s);
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& l : labels) l = s.uniform_int(0, k - 1);
        auto r = nn::softmax_cross_entropy(logits, labels);
        double w = 0;
        for (size_t i = 0; i < logits.data.size(); ++i) {
            double keep = logits.data[i];
            logits.data[i] = keep + h;
            double up = nn::softmax_cross_entropy(logits, labels).loss;
            logits.data[i] = keep - h;
            double dn = nn::softmax_cross_entropy(logits, labels).loss;
            logits.data[i] = keep;
            double num = (up - dn) / (2 * h);
            w = std::max(w, std::abs(num - r.dlogits.data[i]) /
                                std::max({1e-4, std::abs(num), std::abs(r.dlogits.data[i])}));
        }
        record(w);
    }

    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d trials, %d over tol, max rel err %.2e, %.1fs (limit 120s)",
                  trials, failed, worst, dt);
    return {failed == 0 && trials >= 120 && dt < 120.0, buf};
}

// ---- 5: parameter-count oracles ----------------------------------------------

Outcome criterion_param_counts() {
    auto t0 = Clock::now();
    model::ModelConfig cnn;
    cnn.branch = model::Branch::Cnn;
    model::SpliceModel m_cnn(cnn);

    model::ModelConfig inn = cnn;
    inn.branch = model::Branch::Inn;
    model::SpliceModel m_inn(inn);

    model::ModelConfig tiny = cnn;
    tiny.adapter = model::Adapter::Tiny;
    model::SpliceModel m_tiny(tiny);

    model::ModelConfig emb = cnn;
    emb.adapter = model::Adapter::Embedding;
    emb.embedding_dim = 128;
    model::SpliceModel m_emb(emb);

    bool exact = m_cnn.compression_param_count() == 19424 &&
                 m_inn.compression_param_count() == 6896 &&
                 m_cnn.fusion_param_count() == 2370;
    bool lighter = m_inn.compression_param_count() < m_cnn.compression_param_count();
    bool bounded = true;
    for (auto* m : {&m_cnn, &m_inn, &m_tiny, &m_emb}) bounded = bounded && m->param_count() < 100000;

    double dt = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "cnn=%lld inn=%lld fusion=%lld tiny_spatial=%lld, all<100k=%s, %.3fs",
                  static_cast<long long>(m_cnn.compression_param_count()),
                  static_cast<long long>(m_inn.compression_param_count()),
                  static_cast<long long>(m_cnn.fusion_param_count()),
                  static_cast<long long>(m_tiny.spatial_param_count()),
                  bounded ? "yes" : "no", dt);
    return {exact && lighter && bounded && dt < 1.0, buf};
}

// ---- 6: metric fidelity -------------------------------------------------------

Outcome criterion_metrics() {
    auto t0 = Clock::now();
    bool f1_ok = std::abs(harness::f1_score(0.9578, 0.9185) - 0.9378) <= 1e-4;
    bool mcc_ok = harness::mcc(45, 45, 5, 5) == 0.8;

    rng::Stream s(606060);
    bool auc_ok = true;
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
        int n = s.uniform_int(4, 200);
        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<uint8_t> labels(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = s.uniform_int(0, 19) / 20.0; // ties likely
            labels[static_cast<size_t>(i)] = static_cast<uint8_t>(s.coin());
        }
        labels[0] = 0;
        labels[1] = 1;

        double wins = 0;
        int64_t pairs = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (labels[static_cast<size_t>(i)] != 1 || labels[static_cast<size_t>(j)] != 0)
                    continue;
                ++pairs;
                if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(j)]) wins += 1.0;
                else if (scores[static_cast<size_t>(i)] == scores[static_cast<size_t>(j)])
                    wins += 0.5;
            }
        double oracle = wins / static_cast<double>(pairs);
        double got = harness::auc(scores, labels);
        worst = std::max(worst, std::abs(got - oracle));
        auc_ok = auc_ok && std::abs(got - oracle) <= 1e-12;
    }

    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "f1 pin %s, mcc exact %s, auc max |err| %.2e over 50, %.1fs",
                  f1_ok ? "ok" : "BAD", mcc_ok ? "ok" : "BAD", worst, dt);
    return {f1_ok && mcc_ok && auc_ok && dt < 10.0, buf};
}

// ---- 7: desk-scale end-to-end ---------------------------------------------------

struct DeskRun {
    double none_acc = 0;
    double tiny_acc = 0;
};

DeskRun desk_run(const harness::Dataset& data, uint32_t seed) {
    harness::SplitSpec spec; // 0.10 test, 5 folds
    auto sp = harness::split(data.labels, spec, seed);
    std::vector<int> tr;
    for (size_t f = 1; f < sp.folds.size(); ++f)
        tr.insert(tr.end(), sp.folds[f].begin(), sp.folds[f].end());
    const std::vector<int>& va = sp.folds[0];

    harness::TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32; // Table-scale batch reduced to match 720 training samples
    cfg.initial_lr = 0.001;
    cfg.lr_decay_factor = 0.5;
    cfg.lr_step_epochs = 2;
    cfg.seed = seed;
    cfg.branch = model::Branch::Cnn;

    DeskRun out;
    cfg.adapter = model::Adapter::None;
    {
        auto res = harness::train(cfg, data, tr, va);
        out.none_acc = harness::evaluate(res.model, data, sp.test).acc;
    }
    cfg.adapter = model::Adapter::Tiny;
    cfg.augmentation = true;
    {
        auto res = harness::train(cfg, data, tr, va);
        out.tiny_acc = harness::evaluate(res.model, data, sp.test).acc;
    }
    return out;
}

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

Outcome criterion_desk_scale(const std::string& dataset_dir) {
    auto t0 = Clock::now();
    gen::DatasetOptions opt;
    opt.count = 400;
    opt.seed = 1234;
    opt.out_dir = dataset_dir;
    gen::gen_dataset(opt);
    auto data = harness::load_dataset(dataset_dir + "/manifest.csv", true);

    std::array<DeskRun, 3> runs;
    const uint32_t seeds[3] = {101, 202, 303};
    for (int i = 0; i < 3; ++i) runs[static_cast<size_t>(i)] = desk_run(data, seeds[i]);

    double none_med = median3(runs[0].none_acc, runs[1].none_acc, runs[2].none_acc);
    double tiny_med = median3(runs[0].tiny_acc, runs[1].tiny_acc, runs[2].tiny_acc);
    double dt = seconds_since(t0);

    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "none acc {%.3f,%.3f,%.3f} median %.3f (>=0.75), "
                  "tiny {%.3f,%.3f,%.3f} median %.3f (>=none-0.02), %.0fs (limit 1800s)",
                  runs[0].none_acc, runs[1].none_acc, runs[2].none_acc, none_med,
                  runs[0].tiny_acc, runs[1].tiny_acc, runs[2].tiny_acc, tiny_med, dt);
    return {none_med >= 0.75 && tiny_med >= none_med - 0.02 && dt < 1800.0, buf};
}

// ---- 8: double-compression artifact property --------------------------------------

Outcome criterion_artifact() {
    auto t0 = Clock::now();
    int differ = 0;
    rng::Stream qs(31415);
    for (uint64_t i = 0; i < 100; ++i) {
        auto src = gen::gen_image(128, 2026, i);
        int qf1 = qs.uniform_int(30, 95);
        int qf2 = qs.uniform_int(30, 95);
        auto single = jpeg::encode(src, qf1);
        auto dbl = jpeg::recompress({single.data(), single.size()}, qf2);

        auto profile = [](const std::vector<uint8_t>& b) {
            auto h = feat::ac_histograms(jpeg::parse_coefficients({b.data(), b.size()}));
            std::array<int, 16> nz{};
            for (int r = 0; r < 16; ++r)
                for (int c = 0; c < 128; ++c) nz[static_cast<size_t>(r)] += h.at(r, c) != 0;
            return nz;
        };
        differ += profile(single) != profile(dbl);
    }
    double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/100 pairs differ (need >=90) in %.1fs (limit 120s)",
                  differ, dt);
    return {differ >= 90 && dt < 120.0, buf};
}

// ---- 9: determinism -----------------------------------------------------------

Outcome criterion_determinism(const harness::Dataset* desk_data) {
    auto t0 = Clock::now();

    // gen: two runs, byte-identical trees
    auto d1 = testutil::scratch_dir("accept_det1");
    auto d2 = testutil::scratch_dir("accept_det2");
    gen::DatasetOptions opt;
    opt.count = 6;
    opt.seed = 55;
    opt.image_size = 128;
    opt.out_dir = d1;
    auto rows = gen::gen_dataset(opt);
    opt.out_dir = d2;
    gen::gen_dataset(opt);
    bool gen_ok =
        testutil::read_bytes(d1 + "/manifest.csv") == testutil::read_bytes(d2 + "/manifest.csv");
    for (const auto& r : rows) {
        gen_ok = gen_ok &&
                 testutil::read_bytes(d1 + "/" + r.name) == testutil::read_bytes(d2 + "/" + r.name);
        if (!r.mask_path.empty())
            gen_ok = gen_ok && testutil::read_bytes(d1 + "/" + r.mask_path) ==
                                   testutil::read_bytes(d2 + "/" + r.mask_path);
    }

    // train + eval: identical checkpoints and identical reports
    bool train_ok = true, eval_ok = true;
    if (desk_data) {
        harness::SplitSpec spec;
        auto sp = harness::split(desk_data->labels, spec, 7);
        std::vector<int> tr;
        for (size_t f = 1; f < sp.folds.size(); ++f)
            tr.insert(tr.end(), sp.folds[f].begin(), sp.folds[f].end());

        harness::TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 32;
        cfg.seed = 7;
        cfg.adapter = model::Adapter::None;

        auto a = harness::train(cfg, *desk_data, tr, sp.folds[0]);
        auto b = harness::train(cfg, *desk_data, tr, sp.folds[0]);
        auto pa = a.model.params(), pb = b.model.params();
        for (size_t i = 0; i < pa.size(); ++i)
            train_ok = train_ok && pa[i]->value.data == pb[i]->value.data;

        eval_ok = harness::to_json(harness::evaluate(a.model, *desk_data, sp.test)) ==
                  harness::to_json(harness::evaluate(b.model, *desk_data, sp.test));
    }

    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "gen %s, train %s, eval %s, %.1fs",
                  gen_ok ? "identical" : "DIFFERS", train_ok ? "identical" : "DIFFERS",
                  eval_ok ? "identical" : "DIFFERS", dt);
    return {gen_ok && train_ok && eval_ok, buf};
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, auto&& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s  %s\n", n, name, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };

    report(1, "codec round-trip", criterion_roundtrip);
    report(2, "reference interop", criterion_interop);
    report(3, "histogram laws", criterion_histograms);
    report(4, "gradient verification", criterion_gradients);
    report(5, "parameter counts", criterion_param_counts);
    report(6, "metric fidelity", criterion_metrics);

    auto desk_dir = testutil::scratch_dir("accept_desk");
    report(7, "desk-scale end-to-end", [&] { return criterion_desk_scale(desk_dir); });

    report(8, "double-compression artifact", criterion_artifact);

    report(9, "determinism", [&] {
        // reuse the criterion-7 dataset for the train/eval determinism legs
        auto desk_data = harness::load_dataset(desk_dir + "/manifest.csv", false);
        return criterion_determinism(&desk_data);
    });

    std::printf("%s\n", failures == 0 ? "ALL CRITERIA PASS" : "CRITERIA FAILED");
    return failures == 0 ? 0 : 1;
}
