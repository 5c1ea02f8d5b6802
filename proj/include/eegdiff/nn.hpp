#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eegdiff/ops.hpp"
#include "eegdiff/rng.hpp"
#include "eegdiff/tensor.hpp"

namespace eegdiff {

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

/// Conv2d with bias. Weights are fan-in scaled uniform, biases zero.
class Conv2dLayer {
public:
    Conv2dLayer(int in_channels, int out_channels, std::pair<int, int> kernel,
                std::pair<int, int> stride, std::pair<int, int> padding, Rng& rng,
                bool zero_init = false);

    TensorPtr forward(const TensorPtr& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;

    TensorPtr weight;
    TensorPtr bias;
    std::pair<int, int> stride;
    std::pair<int, int> padding;
};

/// Linear with optional deferred input binding: in_features == 0 delays
/// weight allocation until the first forward pass, which fixes the feature
/// count permanently; any later mismatch is an error.
class LinearLayer {
public:
    LinearLayer(int in_features, int out_features, Rng& rng);

    TensorPtr forward(const TensorPtr& x);
    bool bound() const noexcept { return static_cast<bool>(weight); }
    int in_features() const noexcept { return in_features_; }
    void collect(const std::string& prefix, NamedParams& out) const;

    TensorPtr weight;  // null until bound
    TensorPtr bias;

private:
    void bind(int in_features);

    int in_features_ = 0;
    int out_features_ = 0;
    Rng init_rng_;
};

class GroupNormLayer {
public:
    GroupNormLayer(int channels, int groups);

    TensorPtr forward(const TensorPtr& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;

    TensorPtr gamma;
    TensorPtr beta;
    int groups;
};

/// Fill with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng);

}  // namespace eegdiff
