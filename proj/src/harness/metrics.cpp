#include "splice/harness.hpp"

#include "splice/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace splice::harness {
namespace {

void check_counts(int64_t a, int64_t b, int64_t c, int64_t d) {
    if (a < 0 || b < 0 || c < 0 || d < 0)
        throw RangeError("metrics: confusion counts must be >= 0");
}

double guarded(double num, double den, bool* degenerate) {
    if (den == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return num / den;
}

} // namespace

double accuracy(int64_t tp, int64_t tn, int64_t fp, int64_t fn, bool* degenerate) {
    check_counts(tp, tn, fp, fn);
    return guarded(static_cast<double>(tp + tn), static_cast<double>(tp + tn + fp + fn),
                   degenerate);
}

double precision(int64_t tp, int64_t fp, bool* degenerate) {
    check_counts(tp, fp, 0, 0);
    return guarded(static_cast<double>(tp), static_cast<double>(tp + fp), degenerate);
}

double recall(int64_t tp, int64_t fn, bool* degenerate) {
    check_counts(tp, fn, 0, 0);
    return guarded(static_cast<double>(tp), static_cast<double>(tp + fn), degenerate);
}

double f1_score(double p, double r, bool* degenerate) {
    if (p < 0 || r < 0) throw RangeError("f1_score: rates must be >= 0");
    return guarded(2.0 * p * r, p + r, degenerate);
}

double mcc(int64_t tp, int64_t tn, int64_t fp, int64_t fn, bool* degenerate) {
    check_counts(tp, tn, fp, fn);
    // One sqrt over the double product: exact for modest counts (2000/2500
    // must come out as 0.8, not 0.8 minus an ulp).
    double den = std::sqrt(static_cast<double>(tp + fp) * static_cast<double>(tp + fn) *
                           static_cast<double>(tn + fp) * static_cast<double>(tn + fn));
    return guarded(static_cast<double>(tp) * static_cast<double>(tn) -
                       static_cast<double>(fp) * static_cast<double>(fn),
                   den, degenerate);
}

double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
           bool* degenerate) {
    if (scores.size() != labels.size())
        throw ShapeMismatch("auc: scores and labels differ in length");
    const size_t n = scores.size();
    int64_t n_pos = 0;
    for (uint8_t l : labels) {
        if (l > 1) throw RangeError("auc: labels must be 0 or 1");
        n_pos += l;
    }
    int64_t n_neg = static_cast<int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups, summed for the positive class.
    double rank_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_pos += midrank;
        i = j + 1;
    }
    return (rank_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::tuple<double, double, double>>
roc_points(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw ShapeMismatch("roc_points: scores and labels differ in length");
    const size_t n = scores.size();
    int64_t n_pos = 0;
    for (uint8_t l : labels) n_pos += l != 0;
    int64_t n_neg = static_cast<int64_t>(n) - n_pos;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<std::tuple<double, double, double>> pts;
    pts.emplace_back(std::numeric_limits<double>::infinity(), 0.0, 0.0);
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        double s = scores[order[i]];
        while (i < n && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        double fpr = n_neg ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0;
        double tpr = n_pos ? static_cast<double>(tp) / static_cast<double>(n_pos) : 0.0;
        pts.emplace_back(s, fpr, tpr);
    }
    return pts;
}

MetricsReport compute_metrics(const std::vector<double>& p_spliced,
                              const std::vector<uint8_t>& labels) {
    if (p_spliced.size() != labels.size())
        throw ShapeMismatch("compute_metrics: scores and labels differ in length");
    MetricsReport r;
    for (size_t i = 0; i < labels.size(); ++i) {
        bool hat = p_spliced[i] > 0.5;
        bool truth = labels[i] == 1;
        if (hat && truth)
            ++r.tp;
        else if (!hat && !truth)
            ++r.tn;
        else if (hat)
            ++r.fp;
        else
            ++r.fn;
    }
    r.acc = accuracy(r.tp, r.tn, r.fp, r.fn, &r.degenerate);
    r.precision = precision(r.tp, r.fp, &r.degenerate);
    r.recall = recall(r.tp, r.fn, &r.degenerate);
    r.f1 = f1_score(r.precision, r.recall, &r.degenerate);
    r.mcc = mcc(r.tp, r.tn, r.fp, r.fn, &r.degenerate);
    r.auc = auc(p_spliced, labels, &r.degenerate);
    r.roc = roc_points(p_spliced, labels);
    return r;
}

std::string to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["tp"] = r.tp;
    j["tn"] = r.tn;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["acc"] = r.acc;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["mcc"] = r.mcc;
    j["auc"] = r.auc;
    j["degenerate"] = r.degenerate;
    auto roc = nlohmann::json::array();
    for (const auto& [thr, fpr, tpr] : r.roc) {
        (void)thr;
        roc.push_back({fpr, tpr});
    }
    j["roc"] = std::move(roc);
    return j.dump(2);
}

void write_roc_csv(const std::string& path,
                   const std::vector<std::tuple<double, double, double>>& roc) {
    std::string out = "threshold,fpr,tpr\n";
    char buf[128];
    for (const auto& [thr, fpr, tpr] : roc) {
        if (std::isinf(thr))
            std::snprintf(buf, sizeof buf, "inf,%.9f,%.9f\n", fpr, tpr);
        else
            std::snprintf(buf, sizeof buf, "%.9f,%.9f,%.9f\n", thr, fpr, tpr);
        out += buf;
    }
    jpeg::write_file(path, {reinterpret_cast<const uint8_t*>(out.data()), out.size()});
}

} // namespace splice::harness
