#pragma once

#include <cstdint>
#include <vector>

#include "eegdiff/tensor.hpp"

namespace eegdiff {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter set. step() consumes the
/// accumulated gradients and zeroes them afterwards; a parameter without an
/// allocated gradient buffer is a StateError.
class Adam {
public:
    Adam(std::vector<TensorPtr> params, AdamConfig config);

    void step();

    /// Parameters added after construction (deferred-bound layers).
    void add_parameter(const TensorPtr& param);

    std::int64_t step_count() const noexcept { return step_count_; }
    const AdamConfig& config() const noexcept { return config_; }
    const std::vector<TensorPtr>& params() const noexcept { return params_; }

private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::int64_t step_count_ = 0;
    AdamConfig config_;
};

}  // namespace eegdiff
