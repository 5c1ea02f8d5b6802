#include "eegdiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gemm.hpp"

namespace eegdiff {

namespace {

bool wants_graph(std::initializer_list<const TensorPtr*> inputs) {
    if (!grad_enabled()) return false;
    for (const TensorPtr* t : inputs) {
        if (*t && (*t)->requires_grad()) return true;
    }
    return false;
}

void check_4d(const TensorPtr& t, const char* name) {
    if (t->ndim() != 4) {
        throw DimensionError(std::string(name) + " must be 4-D [N,C,H,W], got " + t->shape_string());
    }
}

/// Gather the padded sliding windows of one sample into a [C*kh*kw, Ho*Wo] matrix.
void im2col(const double* src, int C, int H, int W, int kh, int kw, int sh, int sw, int ph, int pw,
            int Ho, int Wo, double* col) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t out_cols = static_cast<std::int64_t>(Ho) * Wo;
    std::int64_t row = 0;
    for (int c = 0; c < C; ++c) {
        const double* chan = src + c * plane;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j, ++row) {
                double* dst = col + row * out_cols;
                for (int y = 0; y < Ho; ++y) {
                    const int sy = y * sh - ph + i;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst + static_cast<std::int64_t>(y) * Wo,
                                  dst + static_cast<std::int64_t>(y + 1) * Wo, 0.0);
                        continue;
                    }
                    const double* src_row = chan + static_cast<std::int64_t>(sy) * W;
                    double* out_row = dst + static_cast<std::int64_t>(y) * Wo;
                    for (int x = 0; x < Wo; ++x) {
                        const int sx = x * sw - pw + j;
                        out_row[x] = (sx >= 0 && sx < W) ? src_row[sx] : 0.0;
                    }
                }
            }
        }
    }
}

/// Scatter-add the column matrix back onto one sample (transpose of im2col).
void col2im_add(const double* col, int C, int H, int W, int kh, int kw, int sh, int sw, int ph,
                int pw, int Ho, int Wo, double* dst) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t out_cols = static_cast<std::int64_t>(Ho) * Wo;
    std::int64_t row = 0;
    for (int c = 0; c < C; ++c) {
        double* chan = dst + c * plane;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j, ++row) {
                const double* src = col + row * out_cols;
                for (int y = 0; y < Ho; ++y) {
                    const int sy = y * sh - ph + i;
                    if (sy < 0 || sy >= H) continue;
                    double* dst_row = chan + static_cast<std::int64_t>(sy) * W;
                    const double* src_row = src + static_cast<std::int64_t>(y) * Wo;
                    for (int x = 0; x < Wo; ++x) {
                        const int sx = x * sw - pw + j;
                        if (sx >= 0 && sx < W) dst_row[sx] += src_row[x];
                    }
                }
            }
        }
    }
}

}  // namespace

namespace detail {

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))); }

double gelu_grad_scalar(double x) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
    const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return phi_cdf + x * phi_pdf;
}

}  // namespace detail

TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, std::pair<int, int> stride,
                 std::pair<int, int> padding) {
    check_4d(input, "conv2d input");
    check_4d(kernel, "conv2d kernel");
    const int N = input->dim(0), C = input->dim(1), H = input->dim(2), W = input->dim(3);
    const int Kf = kernel->dim(0), Ck = kernel->dim(1), kh = kernel->dim(2), kw = kernel->dim(3);
    const auto [sh, sw] = stride;
    const auto [ph, pw] = padding;
    if (sh <= 0 || sw <= 0) throw ValidationError("conv2d stride must be positive");
    if (ph < 0 || pw < 0) throw ValidationError("conv2d padding must be non-negative");
    if (C != Ck) {
        throw DimensionError("conv2d channel mismatch: input " + input->shape_string() + " vs kernel " +
                             kernel->shape_string());
    }
    if (kh > H + 2 * ph || kw > W + 2 * pw) {
        throw DimensionError("conv2d kernel " + kernel->shape_string() + " larger than padded input " +
                             input->shape_string());
    }
    const int Ho = (H + 2 * ph - kh) / sh + 1;
    const int Wo = (W + 2 * pw - kw) / sw + 1;
    const std::int64_t ckk = static_cast<std::int64_t>(C) * kh * kw;
    const std::int64_t out_cols = static_cast<std::int64_t>(Ho) * Wo;
    const std::int64_t in_plane = static_cast<std::int64_t>(C) * H * W;
    const std::int64_t out_plane = static_cast<std::int64_t>(Kf) * out_cols;

    auto out = Tensor::zeros({N, Kf, Ho, Wo}, wants_graph({&input, &kernel}));
    std::vector<double> col(static_cast<std::size_t>(ckk * out_cols));
    for (int n = 0; n < N; ++n) {
        im2col(input->data().data() + n * in_plane, C, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo, col.data());
        detail::gemm_nn(Kf, ckk, out_cols, kernel->data().data(), col.data(),
                        out->data().data() + n * out_plane);
    }

    if (out->requires_grad()) {
        out->set_parents({input, kernel});
        auto params = std::make_tuple(N, C, H, W, Kf, kh, kw, sh, sw, ph, pw, Ho, Wo);
        TensorPtr in_ref = input, k_ref = kernel;
        out->set_backward([in_ref, k_ref, params](Tensor& self) {
            const auto [N, C, H, W, Kf, kh, kw, sh, sw, ph, pw, Ho, Wo] = params;
            const std::int64_t ckk = static_cast<std::int64_t>(C) * kh * kw;
            const std::int64_t out_cols = static_cast<std::int64_t>(Ho) * Wo;
            const std::int64_t in_plane = static_cast<std::int64_t>(C) * H * W;
            const std::int64_t out_plane = static_cast<std::int64_t>(Kf) * out_cols;
            std::vector<double> col(static_cast<std::size_t>(ckk * out_cols));
            if (k_ref->requires_grad()) {
                k_ref->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    im2col(in_ref->data().data() + n * in_plane, C, H, W, kh, kw, sh, sw, ph, pw, Ho,
                           Wo, col.data());
                    detail::gemm_nt(Kf, out_cols, ckk, self.grad().data() + n * out_plane, col.data(),
                                    k_ref->grad().data());
                }
            }
            if (in_ref->requires_grad()) {
                in_ref->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    std::fill(col.begin(), col.end(), 0.0);
                    detail::gemm_tn(ckk, Kf, out_cols, k_ref->data().data(),
                                    self.grad().data() + n * out_plane, col.data());
                    col2im_add(col.data(), C, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo,
                               in_ref->grad().data() + n * in_plane);
                }
            }
        });
    }
    return out;
}

TensorPtr maxpool2d(const TensorPtr& input, std::pair<int, int> kernel, std::pair<int, int> stride) {
    check_4d(input, "maxpool2d input");
    const int N = input->dim(0), C = input->dim(1), H = input->dim(2), W = input->dim(3);
    const auto [kh, kw] = kernel;
    const auto [sh, sw] = stride;
    if (kh <= 0 || kw <= 0 || sh <= 0 || sw <= 0) throw ValidationError("maxpool2d kernel/stride must be positive");
    if (kh > H || kw > W) {
        throw DimensionError("maxpool2d kernel (" + std::to_string(kh) + "," + std::to_string(kw) +
                             ") larger than input " + input->shape_string());
    }
    const int Ho = (H - kh) / sh + 1;
    const int Wo = (W - kw) / sw + 1;

    auto out = Tensor::zeros({N, C, Ho, Wo}, wants_graph({&input}));
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(out->numel()));
    const double* src = input->data().data();
    double* dst = out->data().data();
    std::int64_t o = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* plane = src + (static_cast<std::int64_t>(n) * C + c) * H * W;
            const std::int64_t plane_base = (static_cast<std::int64_t>(n) * C + c) * H * W;
            for (int y = 0; y < Ho; ++y) {
                for (int x = 0; x < Wo; ++x, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t best_idx = -1;
                    for (int i = 0; i < kh; ++i) {
                        const int sy = y * sh + i;
                        for (int j = 0; j < kw; ++j) {
                            const int sx = x * sw + j;
                            const double v = plane[static_cast<std::int64_t>(sy) * W + sx];
                            if (v > best) {  // strict: first occurrence wins ties
                                best = v;
                                best_idx = plane_base + static_cast<std::int64_t>(sy) * W + sx;
                            }
                        }
                    }
                    dst[o] = best;
                    argmax[static_cast<std::size_t>(o)] = best_idx;
                }
            }
        }
    }

    if (out->requires_grad()) {
        out->set_parents({input});
        TensorPtr in_ref = input;
        out->set_backward([in_ref, argmax = std::move(argmax)](Tensor& self) {
            in_ref->ensure_grad();
            double* g = in_ref->grad().data();
            const double* og = self.grad().data();
            for (std::int64_t i = 0; i < self.numel(); ++i) g[argmax[static_cast<std::size_t>(i)]] += og[i];
        });
    }
    return out;
}

TensorPtr linear(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias) {
    if (input->ndim() != 2 || weight->ndim() != 2 || bias->ndim() != 1) {
        throw DimensionError("linear expects input [N,F], weight [O,F], bias [O]; got " +
                             input->shape_string() + ", " + weight->shape_string() + ", " +
                             bias->shape_string());
    }
    const int N = input->dim(0), F = input->dim(1);
    const int O = weight->dim(0), Fw = weight->dim(1);
    if (F != Fw || bias->dim(0) != O) {
        throw DimensionError("linear shape mismatch: input " + input->shape_string() + " vs weight " +
                             weight->shape_string() + " vs bias " + bias->shape_string());
    }

    auto out = Tensor::zeros({N, O}, wants_graph({&input, &weight, &bias}));
    double* dst = out->data().data();
    for (int n = 0; n < N; ++n) {
        double* row = dst + static_cast<std::int64_t>(n) * O;
        for (int j = 0; j < O; ++j) row[j] = bias->data()[static_cast<std::size_t>(j)];
    }
    detail::gemm_nt(N, F, O, input->data().data(), weight->data().data(), dst);

    if (out->requires_grad()) {
        out->set_parents({input, weight, bias});
        TensorPtr in_ref = input, w_ref = weight, b_ref = bias;
        out->set_backward([in_ref, w_ref, b_ref, N, F, O](Tensor& self) {
            const double* og = self.grad().data();
            if (in_ref->requires_grad()) {
                in_ref->ensure_grad();
                detail::gemm_nn(N, O, F, og, w_ref->data().data(), in_ref->grad().data());
            }
            if (w_ref->requires_grad()) {
                w_ref->ensure_grad();
                detail::gemm_tn(O, N, F, og, in_ref->data().data(), w_ref->grad().data());
            }
            if (b_ref->requires_grad()) {
                b_ref->ensure_grad();
                double* bg = b_ref->grad().data();
                for (int n = 0; n < N; ++n) {
                    const double* row = og + static_cast<std::int64_t>(n) * O;
                    for (int j = 0; j < O; ++j) bg[j] += row[j];
                }
            }
        });
    }
    return out;
}

TensorPtr gelu(const TensorPtr& input) {
    auto out = Tensor::zeros(input->shape(), wants_graph({&input}));
    const double* src = input->data().data();
    double* dst = out->data().data();
    for (std::int64_t i = 0; i < input->numel(); ++i) dst[i] = detail::gelu_scalar(src[i]);

    if (out->requires_grad()) {
        out->set_parents({input});
        TensorPtr in_ref = input;
        out->set_backward([in_ref](Tensor& self) {
            in_ref->ensure_grad();
            const double* x = in_ref->data().data();
            const double* og = self.grad().data();
            double* g = in_ref->grad().data();
            for (std::int64_t i = 0; i < self.numel(); ++i) g[i] += og[i] * detail::gelu_grad_scalar(x[i]);
        });
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
    if (logits->ndim() != 2) {
        throw DimensionError("cross_entropy expects logits [N,K], got " + logits->shape_string());
    }
    const int N = logits->dim(0), K = logits->dim(1);
    if (static_cast<int>(labels.size()) != N) {
        throw DimensionError("cross_entropy label count " + std::to_string(labels.size()) +
                             " does not match batch " + std::to_string(N));
    }
    for (int y : labels) {
        if (y < 0 || y >= K) {
            throw ValidationError("cross_entropy label " + std::to_string(y) + " outside [0," +
                                  std::to_string(K) + ")");
        }
    }

    double loss = 0.0;
    const double* src = logits->data().data();
    for (int n = 0; n < N; ++n) {
        const double* row = src + static_cast<std::int64_t>(n) * K;
        const double m = *std::max_element(row, row + K);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(row[k] - m);
        loss += m + std::log(sum) - row[labels[static_cast<std::size_t>(n)]];
    }
    loss /= N;

    auto out = Tensor::from_data({1}, {loss}, wants_graph({&logits}));
    if (out->requires_grad()) {
        out->set_parents({logits});
        TensorPtr l_ref = logits;
        out->set_backward([l_ref, labels, N, K](Tensor& self) {
            l_ref->ensure_grad();
            const double g = self.grad()[0] / N;
            const double* src = l_ref->data().data();
            double* dst = l_ref->grad().data();
            for (int n = 0; n < N; ++n) {
                const double* row = src + static_cast<std::int64_t>(n) * K;
                double* grow = dst + static_cast<std::int64_t>(n) * K;
                const double m = *std::max_element(row, row + K);
                double sum = 0.0;
                for (int k = 0; k < K; ++k) sum += std::exp(row[k] - m);
                for (int k = 0; k < K; ++k) {
                    const double p = std::exp(row[k] - m) / sum;
                    grow[k] += g * (p - (k == labels[static_cast<std::size_t>(n)] ? 1.0 : 0.0));
                }
            }
        });
    }
    return out;
}

TensorPtr mse(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape() != target->shape()) {
        throw DimensionError("mse shape mismatch: " + pred->shape_string() + " vs " +
                             target->shape_string());
    }
    const std::int64_t n = pred->numel();
    double loss = 0.0;
    const double* p = pred->data().data();
    const double* t = target->data().data();
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        loss += d * d;
    }
    loss /= static_cast<double>(n);

    auto out = Tensor::from_data({1}, {loss}, wants_graph({&pred, &target}));
    if (out->requires_grad()) {
        out->set_parents({pred, target});
        TensorPtr p_ref = pred, t_ref = target;
        out->set_backward([p_ref, t_ref, n](Tensor& self) {
            const double g = 2.0 * self.grad()[0] / static_cast<double>(n);
            const double* p = p_ref->data().data();
            const double* t = t_ref->data().data();
            if (p_ref->requires_grad()) {
                p_ref->ensure_grad();
                double* d = p_ref->grad().data();
                for (std::int64_t i = 0; i < n; ++i) d[i] += g * (p[i] - t[i]);
            }
            if (t_ref->requires_grad()) {
                t_ref->ensure_grad();
                double* d = t_ref->grad().data();
                for (std::int64_t i = 0; i < n; ++i) d[i] -= g * (p[i] - t[i]);
            }
        });
    }
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape() != b->shape()) {
        throw DimensionError("add shape mismatch: " + a->shape_string() + " vs " + b->shape_string());
    }
    auto out = Tensor::zeros(a->shape(), wants_graph({&a, &b}));
    const double* pa = a->data().data();
    const double* pb = b->data().data();
    double* dst = out->data().data();
    for (std::int64_t i = 0; i < a->numel(); ++i) dst[i] = pa[i] + pb[i];

    if (out->requires_grad()) {
        out->set_parents({a, b});
        TensorPtr a_ref = a, b_ref = b;
        out->set_backward([a_ref, b_ref](Tensor& self) {
            if (a_ref->requires_grad()) a_ref->accumulate_grad(self.grad().data(), self.numel());
            if (b_ref->requires_grad()) b_ref->accumulate_grad(self.grad().data(), self.numel());
        });
    }
    return out;
}

TensorPtr add_channel_bias(const TensorPtr& input, const TensorPtr& bias) {
    check_4d(input, "add_channel_bias input");
    const int N = input->dim(0), C = input->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(input->dim(2)) * input->dim(3);
    if (bias->ndim() != 1 || bias->dim(0) != C) {
        throw DimensionError("add_channel_bias bias " + bias->shape_string() + " does not match input " +
                             input->shape_string());
    }
    auto out = Tensor::zeros(input->shape(), wants_graph({&input, &bias}));
    const double* src = input->data().data();
    double* dst = out->data().data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double bv = bias->data()[static_cast<std::size_t>(c)];
            const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[base + i] = src[base + i] + bv;
        }
    }
    if (out->requires_grad()) {
        out->set_parents({input, bias});
        TensorPtr in_ref = input, b_ref = bias;
        out->set_backward([in_ref, b_ref, N, C, hw](Tensor& self) {
            if (in_ref->requires_grad()) in_ref->accumulate_grad(self.grad().data(), self.numel());
            if (b_ref->requires_grad()) {
                b_ref->ensure_grad();
                const double* og = self.grad().data();
                for (int n = 0; n < N; ++n) {
                    for (int c = 0; c < C; ++c) {
                        const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * hw;
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < hw; ++i) acc += og[base + i];
                        b_ref->grad()[static_cast<std::size_t>(c)] += acc;
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr add_sample_channel(const TensorPtr& input, const TensorPtr& embedding) {
    check_4d(input, "add_sample_channel input");
    const int N = input->dim(0), C = input->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(input->dim(2)) * input->dim(3);
    if (embedding->ndim() != 2 || embedding->dim(0) != N || embedding->dim(1) != C) {
        throw DimensionError("add_sample_channel embedding " + embedding->shape_string() +
                             " does not match input " + input->shape_string());
    }
    auto out = Tensor::zeros(input->shape(), wants_graph({&input, &embedding}));
    const double* src = input->data().data();
    const double* emb = embedding->data().data();
    double* dst = out->data().data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double ev = emb[static_cast<std::int64_t>(n) * C + c];
            const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[base + i] = src[base + i] + ev;
        }
    }
    if (out->requires_grad()) {
        out->set_parents({input, embedding});
        TensorPtr in_ref = input, e_ref = embedding;
        out->set_backward([in_ref, e_ref, N, C, hw](Tensor& self) {
            if (in_ref->requires_grad()) in_ref->accumulate_grad(self.grad().data(), self.numel());
            if (e_ref->requires_grad()) {
                e_ref->ensure_grad();
                const double* og = self.grad().data();
                for (int n = 0; n < N; ++n) {
                    for (int c = 0; c < C; ++c) {
                        const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * hw;
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < hw; ++i) acc += og[base + i];
                        e_ref->grad()[static_cast<std::size_t>(static_cast<std::int64_t>(n) * C + c)] += acc;
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr scale(const TensorPtr& input, double factor) {
    auto out = Tensor::zeros(input->shape(), wants_graph({&input}));
    const double* src = input->data().data();
    double* dst = out->data().data();
    for (std::int64_t i = 0; i < input->numel(); ++i) dst[i] = src[i] * factor;

    if (out->requires_grad()) {
        out->set_parents({input});
        TensorPtr in_ref = input;
        out->set_backward([in_ref, factor](Tensor& self) {
            in_ref->ensure_grad();
            const double* og = self.grad().data();
            double* g = in_ref->grad().data();
            for (std::int64_t i = 0; i < self.numel(); ++i) g[i] += og[i] * factor;
        });
    }
    return out;
}

TensorPtr group_norm(const TensorPtr& input, const TensorPtr& gamma, const TensorPtr& beta, int groups,
                     double eps) {
    check_4d(input, "group_norm input");
    const int N = input->dim(0), C = input->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(input->dim(2)) * input->dim(3);
    if (groups <= 0 || C % groups != 0) {
        throw ValidationError("group_norm: channel count " + std::to_string(C) +
                              " not divisible by groups " + std::to_string(groups));
    }
    if (gamma->ndim() != 1 || gamma->dim(0) != C || beta->ndim() != 1 || beta->dim(0) != C) {
        throw DimensionError("group_norm affine parameters must be [C]; got gamma " +
                             gamma->shape_string() + ", beta " + beta->shape_string());
    }
    const int cpg = C / groups;
    const std::int64_t m = cpg * hw;

    auto out = Tensor::zeros(input->shape(), wants_graph({&input, &gamma, &beta}));
    std::vector<double> means(static_cast<std::size_t>(N) * groups);
    std::vector<double> inv_stds(static_cast<std::size_t>(N) * groups);
    const double* src = input->data().data();
    double* dst = out->data().data();
    for (int n = 0; n < N; ++n) {
        for (int g = 0; g < groups; ++g) {
            const std::int64_t base = (static_cast<std::int64_t>(n) * C + static_cast<std::int64_t>(g) * cpg) * hw;
            double mean = 0.0;
            for (std::int64_t i = 0; i < m; ++i) mean += src[base + i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::int64_t i = 0; i < m; ++i) {
                const double d = src[base + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const double inv = 1.0 / std::sqrt(var + eps);
            means[static_cast<std::size_t>(n) * groups + g] = mean;
            inv_stds[static_cast<std::size_t>(n) * groups + g] = inv;
            for (int cc = 0; cc < cpg; ++cc) {
                const int c = g * cpg + cc;
                const double ga = gamma->data()[static_cast<std::size_t>(c)];
                const double be = beta->data()[static_cast<std::size_t>(c)];
                const std::int64_t cbase = (static_cast<std::int64_t>(n) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    dst[cbase + i] = ga * (src[cbase + i] - mean) * inv + be;
                }
            }
        }
    }

    if (out->requires_grad()) {
        out->set_parents({input, gamma, beta});
        TensorPtr in_ref = input, g_ref = gamma, b_ref = beta;
        out->set_backward([in_ref, g_ref, b_ref, N, C, hw, groups, cpg, m, means = std::move(means),
                           inv_stds = std::move(inv_stds)](Tensor& self) {
            const double* og = self.grad().data();
            const double* src = in_ref->data().data();
            if (g_ref->requires_grad()) g_ref->ensure_grad();
            if (b_ref->requires_grad()) b_ref->ensure_grad();
            if (in_ref->requires_grad()) in_ref->ensure_grad();
            for (int n = 0; n < N; ++n) {
                for (int g = 0; g < groups; ++g) {
                    const double mean = means[static_cast<std::size_t>(n) * groups + g];
                    const double inv = inv_stds[static_cast<std::size_t>(n) * groups + g];
                    // Channel-affine grads and the two group-wide reductions.
                    double s1 = 0.0, s2 = 0.0;
                    for (int cc = 0; cc < cpg; ++cc) {
                        const int c = g * cpg + cc;
                        const double ga = g_ref->data()[static_cast<std::size_t>(c)];
                        const std::int64_t cbase = (static_cast<std::int64_t>(n) * C + c) * hw;
                        double dg = 0.0, db = 0.0;
                        for (std::int64_t i = 0; i < hw; ++i) {
                            const double xhat = (src[cbase + i] - mean) * inv;
                            const double dy = og[cbase + i];
                            dg += dy * xhat;
                            db += dy;
                            const double dxhat = dy * ga;
                            s1 += dxhat;
                            s2 += dxhat * xhat;
                        }
                        if (g_ref->requires_grad()) g_ref->grad()[static_cast<std::size_t>(c)] += dg;
                        if (b_ref->requires_grad()) b_ref->grad()[static_cast<std::size_t>(c)] += db;
                    }
                    if (in_ref->requires_grad()) {
                        const double inv_m = 1.0 / static_cast<double>(m);
                        for (int cc = 0; cc < cpg; ++cc) {
                            const int c = g * cpg + cc;
                            const double ga = g_ref->data()[static_cast<std::size_t>(c)];
                            const std::int64_t cbase = (static_cast<std::int64_t>(n) * C + c) * hw;
                            double* gin = in_ref->grad().data();
                            for (std::int64_t i = 0; i < hw; ++i) {
                                const double xhat = (src[cbase + i] - mean) * inv;
                                const double dxhat = og[cbase + i] * ga;
                                gin[cbase + i] += inv * (dxhat - s1 * inv_m - xhat * s2 * inv_m);
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr flatten(const TensorPtr& input) {
    if (input->ndim() < 2) {
        throw DimensionError("flatten expects at least 2 dims, got " + input->shape_string());
    }
    const int N = input->dim(0);
    const std::int64_t rest = input->numel() / N;
    auto out = Tensor::from_data({N, static_cast<int>(rest)}, input->data(), wants_graph({&input}));
    if (out->requires_grad()) {
        out->set_parents({input});
        TensorPtr in_ref = input;
        out->set_backward([in_ref](Tensor& self) {
            in_ref->accumulate_grad(self.grad().data(), self.numel());
        });
    }
    return out;
}

}  // namespace eegdiff
