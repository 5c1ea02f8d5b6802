#include "eegdiff/adam.hpp"

#include <algorithm>
#include <cmath>

namespace eegdiff {

Adam::Adam(std::vector<TensorPtr> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    first_moment_.reserve(params_.size());
    second_moment_.reserve(params_.size());
    for (const auto& p : params_) {
        first_moment_.emplace_back(p->data().size(), 0.0);
        second_moment_.emplace_back(p->data().size(), 0.0);
    }
}

void Adam::add_parameter(const TensorPtr& param) {
    params_.push_back(param);
    first_moment_.emplace_back(param->data().size(), 0.0);
    second_moment_.emplace_back(param->data().size(), 0.0);
}

void Adam::step() {
    for (const auto& p : params_) {
        if (!p->has_grad()) {
            throw StateError("adam step with missing gradient for parameter " + p->shape_string());
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = *params_[pi];
        auto& m = first_moment_[pi];
        auto& v = second_moment_[pi];
        const double* g = p.grad().data();
        double* w = p.data().data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
        p.zero_grad();
    }
}

}  // namespace eegdiff
