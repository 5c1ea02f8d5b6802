#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eegdiff/error.hpp"

namespace eegdiff {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense n-dimensional array of 64-bit floats, row-major, with reverse-mode
/// automatic differentiation. Nodes form a DAG through `parents`; calling
/// backward() on a scalar output runs the tape in reverse topological order.
///
/// Gradient buffers are allocated lazily on first accumulation so that
/// forward-only workloads (evaluation, sampling) pay no memory for them.
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad);

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr full(std::vector<int> shape, double value, bool requires_grad = false);
    static TensorPtr from_data(std::vector<int> shape, std::vector<double> data,
                               bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);

    const std::vector<int>& shape() const noexcept { return shape_; }
    std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int ndim() const noexcept { return static_cast<int>(shape_.size()); }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool requires_grad() const noexcept { return requires_grad_; }

    /// Gradient buffer; empty until ensure_grad() or a backward pass touches it.
    std::vector<double>& grad() noexcept { return grad_; }
    const std::vector<double>& grad() const noexcept { return grad_; }
    bool has_grad() const noexcept { return !grad_.empty(); }

    /// Allocate (zero-filled) the gradient buffer if absent.
    void ensure_grad();
    void zero_grad();

    /// Elementwise add `g` (same length as data) into the gradient buffer.
    void accumulate_grad(const double* g, std::int64_t n);

    double item() const;

    /// Throws DivergenceError if any value (or gradient) is non-finite.
    void assert_finite(const std::string& what) const;
    bool all_finite() const noexcept;

    /// Seeds d(self)/d(self) = 1 (scalar outputs only) and propagates
    /// gradients through the recorded graph.
    void backward();

    /// Graph wiring; used by the op implementations.
    void set_parents(std::vector<TensorPtr> parents) { parents_ = std::move(parents); }
    void set_backward(std::function<void(Tensor&)> fn) { backward_fn_ = std::move(fn); }
    const std::vector<TensorPtr>& parents() const noexcept { return parents_; }

    static std::string shape_string(const std::vector<int>& shape);
    std::string shape_string() const { return shape_string(shape_); }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
    bool requires_grad_ = false;
    std::vector<TensorPtr> parents_;
    std::function<void(Tensor&)> backward_fn_;
};

/// While alive, newly created ops record no graph (forward-only).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

std::int64_t shape_numel(const std::vector<int>& shape);

}  // namespace eegdiff
