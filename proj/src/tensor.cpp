#include "eegdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace eegdiff {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("non-positive extent in shape " + Tensor::shape_string(shape));
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
    const std::int64_t n = shape_numel(shape_);
    if (n != static_cast<std::int64_t>(data_.size())) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
    }
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const std::int64_t n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                                    requires_grad);
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    const std::int64_t n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape),
                                    std::vector<double>(static_cast<std::size_t>(n), value), requires_grad);
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return std::make_shared<Tensor>(std::vector<int>{1}, std::vector<double>{value}, requires_grad);
}

void Tensor::ensure_grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() {
    if (grad_.empty()) {
        grad_.assign(data_.size(), 0.0);
    } else {
        std::fill(grad_.begin(), grad_.end(), 0.0);
    }
}

void Tensor::accumulate_grad(const double* g, std::int64_t n) {
    if (n != numel()) {
        throw DimensionError("gradient length " + std::to_string(n) + " does not match tensor " +
                             shape_string());
    }
    ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) grad_[static_cast<std::size_t>(i)] += g[i];
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() requires a single-element tensor, got " + shape_string());
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    for (double v : grad_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::assert_finite(const std::string& what) const {
    if (!all_finite()) throw DivergenceError("non-finite values in " + what);
}

void Tensor::backward() {
    if (numel() != 1) throw StateError("backward() requires a scalar output, got " + shape_string());
    if (!requires_grad_) throw StateError("backward() called on a tensor that does not require gradients");

    // Topological order over the recorded DAG.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(this, 0);
    visited.insert(this);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents_.size()) {
            Tensor* parent = node->parents_[next].get();
            ++next;
            if (parent->requires_grad_ && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    ensure_grad();
    grad_[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn_ && node->has_grad()) node->backward_fn_(*node);
    }
}

std::string Tensor::shape_string(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ",";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

}  // namespace eegdiff
