#pragma once

#include "splice/nn.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

// The dual-branch splice detector: a compression branch reading the 16x128
// standardized coefficient-histogram tensor, a pluggable spatial branch, and
// a fusion head emitting two logits. Class 1 means spliced.

namespace splice::model {

enum class Branch : uint8_t { Cnn = 0, Inn = 1 };
enum class Adapter : uint8_t { None = 0, Tiny = 1, Embedding = 2 };

struct ModelConfig {
    Branch branch = Branch::Cnn;
    Adapter adapter = Adapter::None;
    int embedding_dim = 0; // Embedding adapter only
    uint32_t init_seed = 0;
};

// Filled in by the trainer; persisted in checkpoints.
struct TrainMeta {
    uint32_t seed = 0;
    uint32_t epochs = 0;
    float final_lr = 0.0f;
};

constexpr int kBranchDim = 16;   // every branch reduces to 16 features
constexpr int kFusedDim = 2 * kBranchDim;
constexpr int kNumClasses = 2;
constexpr int kSpatialSize = 64; // TinySpatialNet takes 64x64 RGB

class SpliceModel {
public:
    explicit SpliceModel(const ModelConfig& cfg);

    // spatial: (N,3,64,64) for Tiny, (N,D) for Embedding, ignored for None
    // (the fusion head sees zeros in the spatial half). features must be
    // (N,1,16,128). Returns logits of shape (N,2).
    nn::Tensor forward(const nn::Tensor& spatial, const nn::Tensor& features, bool train);

    // Accumulates parameter gradients from d(loss)/d(logits). Requires a
    // preceding forward call on the same batch.
    void backward(const nn::Tensor& dlogits);

    std::vector<nn::Param*> params();
    std::vector<std::pair<std::string, nn::Tensor*>> buffers();
    void zero_grad();

    int64_t param_count();
    int64_t compression_param_count();
    int64_t spatial_param_count();
    int64_t fusion_param_count();

    const ModelConfig& config() const { return cfg_; }
    TrainMeta& meta() { return meta_; }
    const TrainMeta& meta() const { return meta_; }

private:
    ModelConfig cfg_;
    TrainMeta meta_;

    // Declared order fixes the checkpoint blob order: compression stack,
    // compression head, spatial stack/head, fusion stack.
    std::vector<std::unique_ptr<nn::Layer>> comp_;
    std::unique_ptr<nn::Linear> comp_head_;
    std::vector<std::unique_ptr<nn::Layer>> spatial_;
    std::unique_ptr<nn::Linear> spatial_head_;
    std::vector<std::unique_ptr<nn::Layer>> fusion_;

    std::vector<int> comp_pre_flatten_;
    std::vector<int> spatial_pre_flatten_;
    int batch_ = 0;

    std::vector<nn::Param*> comp_params();
    std::vector<nn::Param*> spatial_params();
    std::vector<nn::Param*> fusion_params();
};

struct Prediction {
    int label = 0; // 1 = spliced
    double p_spliced = 0.0;
};

// Sidecar of externally computed spatial embeddings, keyed by source path.
struct EmbeddingStore {
    uint32_t dim = 0;
    std::map<std::string, std::vector<float>> by_path;
};

EmbeddingStore load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const EmbeddingStore& store);

// Full inference on raw JPEG bytes: feature extraction, adapter
// preprocessing (pixel decode + 64x64 resize for Tiny, sidecar lookup for
// Embedding), eval-mode forward, softmax.
Prediction predict(SpliceModel& m, std::span<const uint8_t> jpeg_bytes,
                   const EmbeddingStore* embeddings = nullptr,
                   const std::string& source_path = {});

void save(SpliceModel& m, const std::string& path);
SpliceModel load(const std::string& path);

} // namespace splice::model
