#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegdiff/classifier.hpp"
#include "eegdiff/efdm.hpp"

namespace eegdiff {

/// Student-t 95% interval: (mean, t_{0.975,n-1} * s / sqrt(n)). Needs n >= 2.
std::pair<double, double> confidence_interval(const std::vector<double>& values);

/// One group of per-class denoiser checkpoints taken at the same training epoch.
struct CheckpointSet {
    int epoch = 0;
    std::vector<std::filesystem::path> per_class;
};

struct SyntheticEval {
    int epoch = 0;
    double accuracy = 0.0;
};

/// Sample n per class from every checkpoint set, label by generating class,
/// and score the (real-data-trained) classifier on them.
std::vector<SyntheticEval> eval_on_synthetic(Classifier& classifier,
                                             const std::vector<CheckpointSet>& checkpoints,
                                             int n_samples_per_class, std::uint64_t seed,
                                             int threads = 1);

struct ExperimentPlan {
    int n_runs = 5;
    int epochs = 10;
    int train_per_class = 2000;
    int test_per_class = 500;
    int synth_per_class = 1200;
    std::uint64_t base_seed = 0;
    ClassifierConfig classifier;
    int threads = 1;

    void validate() const;
};

struct ArmResult {
    std::string name;
    std::vector<TrainRunRecord> runs;
    std::vector<double> mean_val_accuracy, ci_val_accuracy;
    std::vector<double> mean_val_loss, ci_val_loss;
    std::vector<double> mean_train_accuracy, ci_train_accuracy;
    std::vector<double> mean_train_loss, ci_train_loss;
    double max_average_accuracy = 0.0;
};

/// Reference accuracy rows carried into every emitted report.
struct ReferenceRow {
    std::string arm;
    double max_average_accuracy;
};
const std::vector<ReferenceRow>& reference_baselines();

struct ExperimentReport {
    std::vector<ArmResult> arms;
    ExperimentPlan plan;
};

/// Two-arm augmentation experiment: arm "original" trains on the real
/// training split, arm "augmented" on real + synthetic; both are evaluated
/// per epoch on the same held-out real split. Run i of either arm uses seed
/// base_seed + i. The real dataset is split per class into train/test by
/// plan counts; a fingerprint check rejects any train/test leakage.
ExperimentReport run_two_arm(const ExperimentPlan& plan, const EfdmDataset& real,
                             const EfdmDataset& synth);

/// Train one arm alone (the isolation contract: identical to its half of
/// run_two_arm for the same plan).
ArmResult run_arm(const ExperimentPlan& plan, const std::string& name, const EfdmDataset& train,
                  const EfdmDataset& test);

/// Writes curves.csv, summary.csv, reference.csv and the SVG figures.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace eegdiff
