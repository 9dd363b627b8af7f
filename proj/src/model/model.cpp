#include "splice/model.hpp"

#include "splice/errors.hpp"
#include "splice/features.hpp"
#include "splice/imageops.hpp"
#include "splice/jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace splice::model {
namespace {

constexpr std::array<int, 4> kChannelPlan{8, 16, 32, 32};

// One compression-branch stage. The CNN variant is a plain 3x3 convolution;
// the INN variant projects channels with a 1x1 convolution and then applies
// the involution, whose kernel is generated per location. Both are followed
// by batch norm, ReLU, and a 2x2 max pool.
void push_comp_block(std::vector<std::unique_ptr<nn::Layer>>& out, Branch branch,
                     const std::string& name, int in_ch, int out_ch,
                     std::mt19937& rng) {
    if (branch == Branch::Cnn) {
        out.push_back(std::make_unique<nn::Conv2d>(name + ".conv", in_ch, out_ch, 3, 1, rng));
    } else {
        out.push_back(std::make_unique<nn::Conv2d>(name + ".proj", in_ch, out_ch, 1, 0, rng));
        out.push_back(std::make_unique<nn::Involution2d>(name + ".inv", out_ch, 4, 3, rng));
    }
    out.push_back(std::make_unique<nn::BatchNorm>(name + ".bn", out_ch));
    out.push_back(std::make_unique<nn::Relu>(name + ".relu"));
    out.push_back(std::make_unique<nn::MaxPool2>(name + ".pool"));
}

void push_spatial_block(std::vector<std::unique_ptr<nn::Layer>>& out,
                        const std::string& name, int in_ch, int out_ch,
                        std::mt19937& rng) {
    out.push_back(std::make_unique<nn::Conv2d>(name + ".conv", in_ch, out_ch, 3, 1, rng));
    out.push_back(std::make_unique<nn::BatchNorm>(name + ".bn", out_ch));
    out.push_back(std::make_unique<nn::Relu>(name + ".relu"));
    out.push_back(std::make_unique<nn::MaxPool2>(name + ".pool"));
}

int64_t count_params(const std::vector<nn::Param*>& ps) {
    int64_t n = 0;
    for (const auto* p : ps) n += p->value.numel();
    return n;
}

} // namespace

SpliceModel::SpliceModel(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.adapter == Adapter::Embedding && cfg.embedding_dim < 1)
        throw ConfigError("SpliceModel: Embedding adapter needs embedding_dim >= 1");
    if (cfg.adapter != Adapter::Embedding && cfg.embedding_dim != 0)
        throw ConfigError("SpliceModel: embedding_dim is only valid with the Embedding adapter");

    std::mt19937 rng(cfg.init_seed);

    // Compression branch: 16x128 input halves four times to 1x8; 32 channels
    // flatten to 256.
    int in_ch = 1;
    for (size_t i = 0; i < kChannelPlan.size(); ++i) {
        push_comp_block(comp_, cfg.branch, "comp.block" + std::to_string(i + 1), in_ch,
                        kChannelPlan[i], rng);
        in_ch = kChannelPlan[i];
    }
    const int comp_flat = kChannelPlan.back() * (feat::kNumCoeffs / 16) * (feat::kNumBins / 16);
    comp_head_ = std::make_unique<nn::Linear>("comp.head", comp_flat, kBranchDim, rng);

    if (cfg.adapter == Adapter::Tiny) {
        // 64x64 halves three times to 8x8; 16 channels flatten to 1024.
        const std::array<int, 3> plan{8, 16, 16};
        int sc = 3;
        for (size_t i = 0; i < plan.size(); ++i) {
            push_spatial_block(spatial_, "spatial.block" + std::to_string(i + 1), sc,
                               plan[i], rng);
            sc = plan[i];
        }
        const int spatial_flat = plan.back() * (kSpatialSize / 8) * (kSpatialSize / 8);
        spatial_head_ = std::make_unique<nn::Linear>("spatial.head", spatial_flat,
                                                     kBranchDim, rng);
    } else if (cfg.adapter == Adapter::Embedding) {
        spatial_head_ = std::make_unique<nn::Linear>("spatial.head", cfg.embedding_dim,
                                                     kBranchDim, rng);
    }

    fusion_.push_back(std::make_unique<nn::Linear>("fusion.fc1", kFusedDim, 64, rng));
    fusion_.push_back(std::make_unique<nn::BatchNorm>("fusion.bn", 64));
    fusion_.push_back(std::make_unique<nn::Relu>("fusion.relu"));
    fusion_.push_back(std::make_unique<nn::Linear>("fusion.fc2", 64, kNumClasses, rng));
}

nn::Tensor SpliceModel::forward(const nn::Tensor& spatial, const nn::Tensor& features,
                                bool train) {
    if (features.ndim() != 4 || features.dim(1) != 1 ||
        features.dim(2) != feat::kNumCoeffs || features.dim(3) != feat::kNumBins)
        throw ShapeMismatch("SpliceModel: features must be (N,1,16,128)");
    batch_ = features.dim(0);

    nn::Tensor c = features;
    for (auto& l : comp_) c = l->forward(c, train);
    comp_pre_flatten_ = c.shape;
    c.view({batch_, static_cast<int>(c.numel() / batch_)});
    c = comp_head_->forward(c, train);

    nn::Tensor s({batch_, kBranchDim}); // stays zero for the None adapter
    if (cfg_.adapter == Adapter::Tiny) {
        if (spatial.ndim() != 4 || spatial.dim(0) != batch_ || spatial.dim(1) != 3 ||
            spatial.dim(2) != kSpatialSize || spatial.dim(3) != kSpatialSize)
            throw ShapeMismatch("SpliceModel: spatial input must be (N,3,64,64)");
        nn::Tensor t = spatial;
        for (auto& l : spatial_) t = l->forward(t, train);
        spatial_pre_flatten_ = t.shape;
        t.view({batch_, static_cast<int>(t.numel() / batch_)});
        s = spatial_head_->forward(t, train);
    } else if (cfg_.adapter == Adapter::Embedding) {
        if (spatial.ndim() != 2 || spatial.dim(0) != batch_ ||
            spatial.dim(1) != cfg_.embedding_dim)
            throw ShapeMismatch("SpliceModel: spatial input must be (N,embedding_dim)");
        s = spatial_head_->forward(spatial, train);
    }

    nn::Tensor fused({batch_, kFusedDim});
    for (int n = 0; n < batch_; ++n) {
        std::copy_n(s.ptr() + static_cast<int64_t>(n) * kBranchDim, kBranchDim,
                    fused.ptr() + static_cast<int64_t>(n) * kFusedDim);
        std::copy_n(c.ptr() + static_cast<int64_t>(n) * kBranchDim, kBranchDim,
                    fused.ptr() + static_cast<int64_t>(n) * kFusedDim + kBranchDim);
    }

    nn::Tensor y = std::move(fused);
    for (auto& l : fusion_) y = l->forward(y, train);
    return y;
}

void SpliceModel::backward(const nn::Tensor& dlogits) {
    if (batch_ == 0) throw ShapeMismatch("SpliceModel: backward before forward");
    if (dlogits.ndim() != 2 || dlogits.dim(0) != batch_ || dlogits.dim(1) != kNumClasses)
        throw ShapeMismatch("SpliceModel: dlogits must be (N,2)");

    nn::Tensor d = dlogits;
    for (auto it = fusion_.rbegin(); it != fusion_.rend(); ++it) d = (*it)->backward(d);

    nn::Tensor ds({batch_, kBranchDim});
    nn::Tensor dc({batch_, kBranchDim});
    for (int n = 0; n < batch_; ++n) {
        std::copy_n(d.ptr() + static_cast<int64_t>(n) * kFusedDim, kBranchDim,
                    ds.ptr() + static_cast<int64_t>(n) * kBranchDim);
        std::copy_n(d.ptr() + static_cast<int64_t>(n) * kFusedDim + kBranchDim, kBranchDim,
                    dc.ptr() + static_cast<int64_t>(n) * kBranchDim);
    }

    nn::Tensor g = comp_head_->backward(dc);
    g.view(comp_pre_flatten_);
    for (auto it = comp_.rbegin(); it != comp_.rend(); ++it) g = (*it)->backward(g);

    if (cfg_.adapter == Adapter::Tiny) {
        nn::Tensor t = spatial_head_->backward(ds);
        t.view(spatial_pre_flatten_);
        for (auto it = spatial_.rbegin(); it != spatial_.rend(); ++it)
            t = (*it)->backward(t);
    } else if (cfg_.adapter == Adapter::Embedding) {
        spatial_head_->backward(ds); // input gradient has no consumer
    }
}

std::vector<nn::Param*> SpliceModel::comp_params() {
    std::vector<nn::Param*> out;
    for (auto& l : comp_)
        for (auto* p : l->params()) out.push_back(p);
    for (auto* p : comp_head_->params()) out.push_back(p);
    return out;
}

std::vector<nn::Param*> SpliceModel::spatial_params() {
    std::vector<nn::Param*> out;
    for (auto& l : spatial_)
        for (auto* p : l->params()) out.push_back(p);
    if (spatial_head_)
        for (auto* p : spatial_head_->params()) out.push_back(p);
    return out;
}

std::vector<nn::Param*> SpliceModel::fusion_params() {
    std::vector<nn::Param*> out;
    for (auto& l : fusion_)
        for (auto* p : l->params()) out.push_back(p);
    return out;
}

std::vector<nn::Param*> SpliceModel::params() {
    auto out = comp_params();
    for (auto* p : spatial_params()) out.push_back(p);
    for (auto* p : fusion_params()) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, nn::Tensor*>> SpliceModel::buffers() {
    std::vector<std::pair<std::string, nn::Tensor*>> out;
    auto collect = [&out](std::vector<std::unique_ptr<nn::Layer>>& layers) {
        for (auto& l : layers)
            for (auto& b : l->buffers()) out.push_back(b);
    };
    collect(comp_);
    collect(spatial_);
    collect(fusion_);
    return out;
}

void SpliceModel::zero_grad() {
    for (auto* p : params()) p->grad.zero();
}

int64_t SpliceModel::param_count() { return count_params(params()); }
int64_t SpliceModel::compression_param_count() { return count_params(comp_params()); }
int64_t SpliceModel::spatial_param_count() { return count_params(spatial_params()); }
int64_t SpliceModel::fusion_param_count() { return count_params(fusion_params()); }

Prediction predict(SpliceModel& m, std::span<const uint8_t> jpeg_bytes,
                   const EmbeddingStore* embeddings, const std::string& source_path) {
    auto feats = feat::extract_features(jpeg_bytes);
    nn::Tensor ft({1, 1, feat::kNumCoeffs, feat::kNumBins});
    std::copy(feats.begin(), feats.end(), ft.ptr());

    nn::Tensor sp;
    if (m.config().adapter == Adapter::Tiny) {
        auto px = img::to_rgb(jpeg::decode_pixels(jpeg::parse_coefficients(jpeg_bytes)));
        auto small = img::resize_bilinear(px, kSpatialSize, kSpatialSize);
        sp.reshape({1, 3, kSpatialSize, kSpatialSize});
        float* dst = sp.ptr();
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < kSpatialSize; ++y)
                for (int x = 0; x < kSpatialSize; ++x)
                    *dst++ = static_cast<float>(small.at(x, y, c)) / 255.0f;
    } else if (m.config().adapter == Adapter::Embedding) {
        if (!embeddings)
            throw MissingEmbedding("predict: Embedding adapter needs a sidecar store");
        auto it = embeddings->by_path.find(source_path);
        if (it == embeddings->by_path.end())
            throw MissingEmbedding("predict: no embedding for \"" + source_path + "\"");
        if (static_cast<int>(it->second.size()) != m.config().embedding_dim)
            throw ShapeMismatch("predict: embedding dim mismatch for \"" + source_path +
                                "\"");
        sp.reshape({1, m.config().embedding_dim});
        std::copy(it->second.begin(), it->second.end(), sp.ptr());
    }

    nn::Tensor logits = m.forward(sp, ft, false);
    const double l0 = logits.data[0];
    const double l1 = logits.data[1];
    const double mx = std::max(l0, l1);
    const double e0 = std::exp(l0 - mx);
    const double e1 = std::exp(l1 - mx);
    Prediction out;
    out.p_spliced = e1 / (e0 + e1);
    out.label = out.p_spliced > 0.5 ? 1 : 0;
    return out;
}

} // namespace splice::model
