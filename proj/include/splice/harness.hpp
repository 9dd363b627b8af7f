#pragma once

#include "splice/gen.hpp"
#include "splice/model.hpp"

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

// Training and evaluation harness: stratified splits with k folds,
// confusion-matrix metrics plus rank AUC, and the Adam/step-decay training
// loop with best-validation-epoch checkpointing.

namespace splice::harness {

struct SplitSpec {
    double test_fraction = 0.10;
    int folds = 5;
};

struct Split {
    std::vector<int> test;
    std::vector<std::vector<int>> folds; // disjoint partition of the 90% pool
};

// Stratified by label and deterministic in (labels, spec, seed).
Split split(const std::vector<uint8_t>& labels, const SplitSpec& spec, uint32_t seed);

// Zero-denominator cases return 0 and set *degenerate when provided.
double accuracy(int64_t tp, int64_t tn, int64_t fp, int64_t fn, bool* degenerate = nullptr);
double precision(int64_t tp, int64_t fp, bool* degenerate = nullptr);
double recall(int64_t tp, int64_t fn, bool* degenerate = nullptr);
double f1_score(double precision, double recall, bool* degenerate = nullptr);
double mcc(int64_t tp, int64_t tn, int64_t fp, int64_t fn, bool* degenerate = nullptr);

// Rank-based AUC with midranks for tied scores.
double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
           bool* degenerate = nullptr);

// (threshold, fpr, tpr) swept over every distinct score, highest first; the
// leading point is (+inf, 0, 0).
std::vector<std::tuple<double, double, double>>
roc_points(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

struct MetricsReport {
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    double acc = 0, precision = 0, recall = 0, f1 = 0, mcc = 0, auc = 0;
    bool degenerate = false;
    std::vector<std::tuple<double, double, double>> roc;
};

// Threshold 0.5 on p(spliced) for the confusion matrix; raw scores for
// AUC/ROC.
MetricsReport compute_metrics(const std::vector<double>& p_spliced,
                              const std::vector<uint8_t>& labels);

std::string to_json(const MetricsReport& r);
void write_roc_csv(const std::string& path,
                   const std::vector<std::tuple<double, double, double>>& roc);

// Manifest samples pulled into memory: compression features always; 64x64
// RGB pixels only when with_spatial is set (TinySpatialNet input).
struct Dataset {
    std::vector<std::string> paths; // as written in the manifest
    std::vector<uint8_t> labels;
    std::vector<std::vector<float>> features;
    std::vector<jpeg::PixelImage> spatial;
};

Dataset load_dataset(const std::string& manifest_path, bool with_spatial);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 256; // clamped to the training-set size
    double initial_lr = 0.001;
    double lr_decay_factor = 0.5;
    int lr_step_epochs = 2;
    uint32_t seed = 0;
    model::Branch branch = model::Branch::Cnn;
    model::Adapter adapter = model::Adapter::None;
    int embedding_dim = 0;
    bool augmentation = false; // spatial branch only
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double val_acc = 0;
    double lr = 0;
};

struct TrainResult {
    model::SpliceModel model; // parameters of the best-validation-accuracy epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_acc = 0;
};

TrainResult train(const TrainConfig& cfg, const Dataset& data,
                  const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                  const model::EmbeddingStore* embeddings = nullptr);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

MetricsReport evaluate(model::SpliceModel& m, const Dataset& data,
                       const std::vector<int>& idx,
                       const model::EmbeddingStore* embeddings = nullptr);

// Training augmentation for the spatial input: independent horizontal-flip,
// vertical-flip, and rotation draws. Never touches compression features.
jpeg::PixelImage augment_with(const jpeg::PixelImage& image, bool hflip, bool vflip,
                              double rotation_deg);
jpeg::PixelImage augment(const jpeg::PixelImage& image, uint64_t seed);

} // namespace splice::harness
