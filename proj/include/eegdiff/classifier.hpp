#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegdiff/efdm.hpp"
#include "eegdiff/nn.hpp"
#include "eegdiff/rng.hpp"

namespace eegdiff {

struct ConvStage {
    int filters = 0;
    std::pair<int, int> kernel{1, 1};
    std::pair<int, int> stride{1, 1};
    std::pair<int, int> padding{0, 0};
    std::pair<int, int> pool_kernel{1, 1};
    std::pair<int, int> pool_stride{1, 1};
};

/// Conv/pool stack with a deferred-input linear head; GELU after every conv
/// and every linear except the output layer.
struct ClassifierConfig {
    int in_planes = 3;
    int height = 128;
    int width = 128;
    int classes = 2;
    std::vector<ConvStage> stages;
    std::vector<int> head_dims;  // hidden widths before the K-way output
    double lr = 1e-4;
    int batch_size = 128;
    std::uint64_t seed = 0;

    /// Filter progression 16/64/128 with column-preserving kernels and the
    /// 5000/2500/1000 head.
    static ClassifierConfig reference(int classes = 2, int height = 128, int width = 128);
    /// Small stack that chains for 32x32 maps and trains in seconds.
    static ClassifierConfig desk(int classes = 2, int height = 32, int width = 32);

    /// Audits the conv/pool shape arithmetic; throws naming the failing layer.
    void validate() const;

    /// Spatial size after each stage; last entry is the flattened feature
    /// count entering the head.
    std::vector<std::array<int, 3>> shape_trace() const;
};

struct TrainRunRecord {
    std::vector<double> train_loss, train_accuracy, val_loss, val_accuracy;
    std::uint64_t seed = 0;
    std::uint64_t dataset_fingerprint = 0;
    int epochs = 0;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class_recall;
};

class Classifier {
public:
    explicit Classifier(const ClassifierConfig& config);

    TensorPtr forward(const TensorPtr& x);

    const ClassifierConfig& config() const noexcept { return config_; }
    NamedParams named_params() const;
    void load_params(const NamedParams& params);

    /// Label vocabulary, fixed at training time.
    std::vector<std::string> class_names;

private:
    ClassifierConfig config_;
    std::vector<Conv2dLayer> convs_;
    std::vector<LinearLayer> head_;
};

Classifier build_classifier(const ClassifierConfig& config);

/// Shuffled mini-batch cross-entropy training with Adam; per-epoch metrics
/// on both splits; the model keeps its final-epoch weights.
TrainRunRecord train_classifier(Classifier& model, const EfdmDataset& train, const EfdmDataset& val,
                                int epochs, std::uint64_t seed);

/// Argmax accuracy and macro per-class recall; no weight updates.
EvalResult evaluate(Classifier& model, const EfdmDataset& data);

/// Combined content hash of all items (order-sensitive).
std::uint64_t dataset_fingerprint(const EfdmDataset& data);

void save_classifier(const std::filesystem::path& path, const Classifier& model);
Classifier load_classifier(const std::filesystem::path& path);

/// metrics CSV: epoch,split,loss,accuracy
void write_metrics_csv(const std::filesystem::path& path, const TrainRunRecord& record);

}  // namespace eegdiff
