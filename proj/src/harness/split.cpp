#include "splice/harness.hpp"

#include "splice/errors.hpp"
#include "splice/rng.hpp"

#include <algorithm>
#include <cmath>

namespace splice::harness {
namespace {

// Fisher-Yates on our own stream; std::shuffle's draw pattern is
// implementation-defined, which would break cross-build determinism.
void shuffle(std::vector<int>& v, rng::Stream& s) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[s.next() % i]);
}

} // namespace

Split split(const std::vector<uint8_t>& labels, const SplitSpec& spec, uint32_t seed) {
    if (spec.folds < 2) throw ConfigError("split: folds must be >= 2");
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw ConfigError("split: test_fraction must be in (0,1)");

    std::vector<int> by_class[2];
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) throw RangeError("split: labels must be 0 or 1");
        by_class[labels[i]].push_back(static_cast<int>(i));
    }

    Split out;
    out.folds.resize(static_cast<size_t>(spec.folds));
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        rng::Stream s(rng::mix(seed, 0x73706c6974ull + static_cast<uint64_t>(c)));
        shuffle(idx, s);

        int n = static_cast<int>(idx.size());
        int n_test = static_cast<int>(std::llround(spec.test_fraction * n));
        int n_pool = n - n_test;
        if (n_test < 2 || n_pool / spec.folds < 2)
            throw TooSmall("split: every split needs at least 2 samples per class");

        out.test.insert(out.test.end(), idx.begin(), idx.begin() + n_test);

        int base = n_pool / spec.folds, rem = n_pool % spec.folds;
        int at = n_test;
        for (int f = 0; f < spec.folds; ++f) {
            int take = base + (f < rem ? 1 : 0);
            auto& fold = out.folds[static_cast<size_t>(f)];
            fold.insert(fold.end(), idx.begin() + at, idx.begin() + at + take);
            at += take;
        }
    }

    std::sort(out.test.begin(), out.test.end());
    for (auto& f : out.folds) std::sort(f.begin(), f.end());
    return out;
}

} // namespace splice::harness
