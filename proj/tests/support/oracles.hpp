#pragma once

// Independent reference implementations used as test oracles. Everything in
// here is deliberately the slow, obvious version: nested loops and direct
// formulas with no shared code paths into the library ops they check.

#include <cmath>
#include <functional>
#include <vector>

#include "eegdiff/rng.hpp"
#include "eegdiff/tensor.hpp"

namespace oracle {

/// Direct sliding-window cross-correlation, no im2col.
inline std::vector<double> conv2d_naive(const std::vector<double>& input, int N, int C, int H, int W,
                                        const std::vector<double>& kernel, int K, int kh, int kw,
                                        int sh, int sw, int ph, int pw) {
    const int Ho = (H + 2 * ph - kh) / sh + 1;
    const int Wo = (W + 2 * pw - kw) / sw + 1;
    std::vector<double> out(static_cast<std::size_t>(N) * K * Ho * Wo, 0.0);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    double acc = 0.0;
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                const int sy = y * sh - ph + i;
                                const int sx = x * sw - pw + j;
                                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                                acc += input[((static_cast<std::size_t>(n) * C + c) * H + sy) * W + sx] *
                                       kernel[((static_cast<std::size_t>(k) * C + c) * kh + i) * kw + j];
                            }
                    out[((static_cast<std::size_t>(n) * K + k) * Ho + y) * Wo + x] = acc;
                }
    return out;
}

inline std::vector<double> maxpool2d_naive(const std::vector<double>& input, int N, int C, int H,
                                           int W, int kh, int kw, int sh, int sw) {
    const int Ho = (H - kh) / sh + 1;
    const int Wo = (W - kw) / sw + 1;
    std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    double best = -1e300;
                    for (int i = 0; i < kh; ++i)
                        for (int j = 0; j < kw; ++j) {
                            const double v =
                                input[((static_cast<std::size_t>(n) * C + c) * H + y * sh + i) * W +
                                      x * sw + j];
                            if (v > best) best = v;
                        }
                    out[((static_cast<std::size_t>(n) * C + c) * Ho + y) * Wo + x] = best;
                }
    return out;
}

/// Softmax-then-NLL, computed the direct way.
inline double cross_entropy_naive(const std::vector<double>& logits, int N, int K,
                                  const std::vector<int>& labels) {
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        double denom = 0.0;
        for (int k = 0; k < K; ++k) denom += std::exp(logits[static_cast<std::size_t>(n) * K + k]);
        const double p = std::exp(logits[static_cast<std::size_t>(n) * K + labels[static_cast<std::size_t>(n)]]) / denom;
        total += -std::log(p);
    }
    return total / N;
}

inline double mse_naive(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

/// Central finite differences of `loss_fn` w.r.t. every element of `x`,
/// compared against the analytic gradient already stored in x.grad().
/// Returns the worst relative error (denominator floored at 1e-3).
inline double fd_worst_relative_error(const std::function<double()>& loss_fn, eegdiff::Tensor& x,
                                      double h = 1e-5) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const double saved = x.data()[static_cast<std::size_t>(i)];
        x.data()[static_cast<std::size_t>(i)] = saved + h;
        const double up = loss_fn();
        x.data()[static_cast<std::size_t>(i)] = saved - h;
        const double down = loss_fn();
        x.data()[static_cast<std::size_t>(i)] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double analytic = x.grad()[static_cast<std::size_t>(i)];
        const double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
        if (err > worst) worst = err;
    }
    return worst;
}

inline std::vector<double> random_vector(eegdiff::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> out(n);
    for (auto& v : out) v = rng.uniform(lo, hi);
    return out;
}

}  // namespace oracle
