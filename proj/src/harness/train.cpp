#include "splice/harness.hpp"

#include "splice/errors.hpp"
#include "splice/features.hpp"
#include "splice/imageops.hpp"
#include "splice/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

namespace splice::harness {
namespace {

namespace fs = std::filesystem;

// u8 HWC pixels -> float CHW rows in [0,1]
void fill_spatial(nn::Tensor& sp, int row, const jpeg::PixelImage& im) {
    float* dst = sp.ptr() +
                 static_cast<int64_t>(row) * 3 * model::kSpatialSize * model::kSpatialSize;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < model::kSpatialSize; ++y)
            for (int x = 0; x < model::kSpatialSize; ++x)
                *dst++ = static_cast<float>(im.at(x, y, c)) / 255.0f;
}

const std::vector<float>& embedding_for(const model::EmbeddingStore* emb,
                                        const std::string& path, int want_dim) {
    if (!emb) throw MissingEmbedding("train: Embedding adapter needs a sidecar store");
    auto it = emb->by_path.find(path);
    if (it == emb->by_path.end())
        throw MissingEmbedding("train: no embedding for \"" + path + "\"");
    if (static_cast<int>(it->second.size()) != want_dim)
        throw ShapeMismatch("train: embedding dim mismatch for \"" + path + "\"");
    return it->second;
}

// One forward batch: features, adapter input, labels. aug_seeds, when given,
// drives per-sample spatial augmentation (training only).
void assemble(const Dataset& data, const std::vector<int>& idx, size_t start, size_t bn,
              model::Adapter adapter, int emb_dim, const model::EmbeddingStore* emb,
              nn::Tensor& ft, nn::Tensor& sp, std::vector<int>& labels,
              const uint64_t* aug_seeds) {
    ft.reshape({static_cast<int>(bn), 1, feat::kNumCoeffs, feat::kNumBins});
    labels.resize(bn);
    if (adapter == model::Adapter::Tiny)
        sp.reshape({static_cast<int>(bn), 3, model::kSpatialSize, model::kSpatialSize});
    else if (adapter == model::Adapter::Embedding)
        sp.reshape({static_cast<int>(bn), emb_dim});

    for (size_t k = 0; k < bn; ++k) {
        int i = idx[start + k];
        const auto& f = data.features[static_cast<size_t>(i)];
        if (f.size() != static_cast<size_t>(feat::kFeatureSize))
            throw ShapeMismatch("train: malformed feature vector in dataset");
        std::copy(f.begin(), f.end(),
                  ft.ptr() + static_cast<int64_t>(k) * feat::kFeatureSize);
        labels[k] = data.labels[static_cast<size_t>(i)];

        if (adapter == model::Adapter::Tiny) {
            const auto& im = data.spatial[static_cast<size_t>(i)];
            if (aug_seeds)
                fill_spatial(sp, static_cast<int>(k), augment(im, aug_seeds[k]));
            else
                fill_spatial(sp, static_cast<int>(k), im);
        } else if (adapter == model::Adapter::Embedding) {
            const auto& v = embedding_for(emb, data.paths[static_cast<size_t>(i)], emb_dim);
            std::copy(v.begin(), v.end(), sp.ptr() + static_cast<int64_t>(k) * emb_dim);
        }
    }
}

struct EvalOut {
    double loss = 0;
    double acc = 0;
    std::vector<double> p_spliced;
};

EvalOut eval_pass(model::SpliceModel& m, const Dataset& data, const std::vector<int>& idx,
                  const model::EmbeddingStore* emb) {
    if (idx.empty()) throw TooSmall("evaluate: empty index set");
    const auto adapter = m.config().adapter;
    const int emb_dim = m.config().embedding_dim;
    const size_t kChunk = 256;

    EvalOut out;
    out.p_spliced.reserve(idx.size());
    double loss_sum = 0;
    int64_t correct = 0;
    nn::Tensor ft, sp;
    std::vector<int> labels;
    for (size_t start = 0; start < idx.size(); start += kChunk) {
        size_t bn = std::min(kChunk, idx.size() - start);
        assemble(data, idx, start, bn, adapter, emb_dim, emb, ft, sp, labels, nullptr);
        nn::Tensor logits = m.forward(sp, ft, false);
        auto ce = nn::softmax_cross_entropy(logits, labels);
        loss_sum += ce.loss * static_cast<double>(bn);
        for (size_t k = 0; k < bn; ++k) {
            double p = std::exp(ce.log_probs[2 * k + 1]);
            out.p_spliced.push_back(p);
            correct += (p > 0.5) == (labels[k] == 1);
        }
    }
    out.loss = loss_sum / static_cast<double>(idx.size());
    out.acc = static_cast<double>(correct) / static_cast<double>(idx.size());
    return out;
}

void shuffle(std::vector<int>& v, rng::Stream& s) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[s.next() % i]);
}

} // namespace

jpeg::PixelImage augment_with(const jpeg::PixelImage& image, bool hflip, bool vflip,
                              double rotation_deg) {
    jpeg::PixelImage out = image;
    if (hflip) out = img::flip_horizontal(out);
    if (vflip) out = img::flip_vertical(out);
    if (rotation_deg != 0.0) {
        // The rotated canvas expands; resample back to the input size so the
        // batch shape stays fixed.
        jpeg::PixelImage rot = img::rotate_bilinear(out, rotation_deg);
        out = img::resize_bilinear(rot, image.width, image.height);
    }
    return out;
}

jpeg::PixelImage augment(const jpeg::PixelImage& image, uint64_t seed) {
    rng::Stream s(seed);
    bool h = s.uniform() < 0.5;
    bool v = s.uniform() < 0.5;
    double rot = s.uniform(0.0, 180.0);
    return augment_with(image, h, v, rot);
}

Dataset load_dataset(const std::string& manifest_path, bool with_spatial) {
    auto rows = gen::load_manifest(manifest_path);
    if (rows.empty()) throw TooSmall("load_dataset: manifest has no rows");
    fs::path base = fs::path(manifest_path).parent_path();

    Dataset d;
    size_t n = rows.size();
    d.paths.resize(n);
    d.labels.resize(n);
    d.features.resize(n);
    if (with_spatial) d.spatial.resize(n);

    // Per-file work is independent; SPLICE_WORKERS (via the CLI) may raise
    // the thread count. Results land at fixed indices, so the dataset is
    // identical for any worker count.
    int workers = 1;
    if (const char* env = std::getenv("SPLICE_WORKERS")) {
        workers = std::max(1, std::atoi(env));
        workers = std::min<int>(workers, static_cast<int>(n));
    }

    auto work = [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const auto& r = rows[i];
            auto bytes = jpeg::read_file((base / r.name).string());
            d.paths[i] = r.name;
            d.labels[i] = r.label == "spliced" ? 1 : 0;
            d.features[i] = feat::extract_features({bytes.data(), bytes.size()});
            if (with_spatial) {
                auto px = img::to_rgb(jpeg::decode_pixels(jpeg::parse_coefficients(bytes)));
                d.spatial[i] =
                    img::resize_bilinear(px, model::kSpatialSize, model::kSpatialSize);
            }
        }
    };
    if (workers <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        size_t chunk = (n + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            size_t lo = static_cast<size_t>(w) * chunk;
            size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& t : pool) t.join();
    }
    return d;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data,
                  const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                  const model::EmbeddingStore* embeddings) {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (train_idx.size() < 2) throw TooSmall("train: need at least 2 training samples");
    if (val_idx.empty()) throw TooSmall("train: need a validation set");
    if (cfg.adapter == model::Adapter::Tiny && data.spatial.size() != data.paths.size())
        throw ConfigError("train: dataset was loaded without spatial pixels");

    model::ModelConfig mc;
    mc.branch = cfg.branch;
    mc.adapter = cfg.adapter;
    mc.embedding_dim = cfg.embedding_dim;
    mc.init_seed = cfg.seed;
    model::SpliceModel m(mc);

    nn::AdamConfig ac;
    ac.lr = static_cast<float>(cfg.initial_lr);
    nn::Adam opt(m.params(), ac);
    nn::StepLrSchedule sched{cfg.initial_lr, cfg.lr_decay_factor, cfg.lr_step_epochs};

    const size_t batch =
        std::min<size_t>(static_cast<size_t>(cfg.batch_size), train_idx.size());

    TrainResult res{std::move(m), {}, 0, -1.0};
    std::vector<std::vector<float>> best_params, best_buffers;
    auto snapshot = [&]() {
        best_params.clear();
        for (auto* p : res.model.params()) best_params.push_back(p->value.data);
        best_buffers.clear();
        for (auto& [name, t] : res.model.buffers()) best_buffers.push_back(t->data);
    };

    nn::Tensor ft, sp;
    std::vector<int> labels;
    const bool augmenting = cfg.augmentation && cfg.adapter == model::Adapter::Tiny;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(static_cast<float>(sched.lr_at(epoch)));

        std::vector<int> order = train_idx;
        rng::Stream es(rng::mix(cfg.seed, 0x3000000000000000ull + static_cast<uint64_t>(epoch)));
        shuffle(order, es);
        std::vector<uint64_t> aug_seeds;
        if (augmenting) {
            aug_seeds.resize(order.size());
            for (auto& s : aug_seeds) s = es.next();
        }

        double loss_sum = 0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += batch) {
            size_t bn = std::min(batch, order.size() - start);
            if (bn < 2) continue; // batch norm needs 2+ rows per batch
            assemble(data, order, start, bn, cfg.adapter, cfg.embedding_dim, embeddings,
                     ft, sp, labels, augmenting ? aug_seeds.data() + start : nullptr);
            nn::Tensor logits = res.model.forward(sp, ft, true);
            auto ce = nn::softmax_cross_entropy(logits, labels);
            if (!std::isfinite(ce.loss)) throw NonFinite("train: loss diverged");
            loss_sum += ce.loss * static_cast<double>(bn);
            seen += bn;
            res.model.zero_grad();
            res.model.backward(ce.dlogits);
            opt.step();
        }
        if (seen == 0) throw TooSmall("train: no trainable batch (need 2+ samples)");

        EvalOut val = eval_pass(res.model, data, val_idx, embeddings);
        if (!std::isfinite(val.loss)) throw NonFinite("train: validation loss diverged");

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(seen);
        st.val_loss = val.loss;
        st.val_acc = val.acc;
        st.lr = sched.lr_at(epoch);
        res.history.push_back(st);

        if (val.acc > res.best_val_acc) {
            res.best_val_acc = val.acc;
            res.best_epoch = epoch;
            snapshot();
        }
    }

    // Roll the weights back to the best-validation epoch.
    size_t k = 0;
    for (auto* p : res.model.params()) p->value.data = best_params[k++];
    k = 0;
    for (auto& [name, t] : res.model.buffers()) t->data = best_buffers[k++];

    res.model.meta().seed = cfg.seed;
    res.model.meta().epochs = static_cast<uint32_t>(cfg.epochs);
    res.model.meta().final_lr = static_cast<float>(sched.lr_at(cfg.epochs - 1));
    return res;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_loss,val_acc,lr\n";
    char buf[160];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%d,%.9f,%.9f,%.9f,%.9g\n", h.epoch, h.train_loss,
                      h.val_loss, h.val_acc, h.lr);
        out += buf;
    }
    jpeg::write_file(path, {reinterpret_cast<const uint8_t*>(out.data()), out.size()});
}

MetricsReport evaluate(model::SpliceModel& m, const Dataset& data,
                       const std::vector<int>& idx,
                       const model::EmbeddingStore* embeddings) {
    EvalOut out = eval_pass(m, data, idx, embeddings);
    std::vector<uint8_t> labels;
    labels.reserve(idx.size());
    for (int i : idx) labels.push_back(data.labels[static_cast<size_t>(i)]);
    return compute_metrics(out.p_spliced, labels);
}

} // namespace splice::harness
