#include "eegdiff/nn.hpp"

#include <cmath>

#include "eegdiff/error.hpp"

namespace eegdiff {

void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

Conv2dLayer::Conv2dLayer(int in_channels, int out_channels, std::pair<int, int> kernel,
                         std::pair<int, int> stride_, std::pair<int, int> padding_, Rng& rng,
                         bool zero_init)
    : stride(stride_), padding(padding_) {
    weight = Tensor::zeros({out_channels, in_channels, kernel.first, kernel.second}, true);
    bias = Tensor::zeros({out_channels}, true);
    if (!zero_init) {
        init_fan_in_uniform(*weight, in_channels * kernel.first * kernel.second, rng);
    }
}

TensorPtr Conv2dLayer::forward(const TensorPtr& x) const {
    return add_channel_bias(conv2d(x, weight, stride, padding), bias);
}

void Conv2dLayer::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

LinearLayer::LinearLayer(int in_features, int out_features, Rng& rng)
    : in_features_(in_features), out_features_(out_features), init_rng_(rng.fork(rng.next_u64())) {
    bias = Tensor::zeros({out_features}, true);
    if (in_features > 0) bind(in_features);
}

void LinearLayer::bind(int in_features) {
    in_features_ = in_features;
    weight = Tensor::zeros({out_features_, in_features}, true);
    init_fan_in_uniform(*weight, in_features, init_rng_);
}

TensorPtr LinearLayer::forward(const TensorPtr& x) {
    if (x->ndim() != 2) throw DimensionError("linear layer expects [N,F] input, got " + x->shape_string());
    if (!bound()) {
        bind(x->dim(1));
    } else if (x->dim(1) != in_features_) {
        throw DimensionError("linear layer bound to " + std::to_string(in_features_) +
                             " input features, got " + x->shape_string());
    }
    return linear(x, weight, bias);
}

void LinearLayer::collect(const std::string& prefix, NamedParams& out) const {
    if (!bound()) throw StateError("cannot collect parameters of an unbound linear layer " + prefix);
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

GroupNormLayer::GroupNormLayer(int channels, int groups_) : groups(groups_) {
    gamma = Tensor::full({channels}, 1.0, true);
    beta = Tensor::zeros({channels}, true);
}

TensorPtr GroupNormLayer::forward(const TensorPtr& x) const { return group_norm(x, gamma, beta, groups); }

void GroupNormLayer::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

}  // namespace eegdiff
