#include "eegdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

#include "eegdiff/checkpoint.hpp"
#include "eegdiff/error.hpp"
#include "parallel.hpp"

namespace eegdiff {

NoiseSchedule linear_schedule(int T) {
    if (T < 2) throw ValidationError("noise schedule needs T >= 2, got " + std::to_string(T));
    NoiseSchedule sched;
    sched.T = T;
    sched.betas.resize(static_cast<std::size_t>(T));
    sched.alphas.resize(static_cast<std::size_t>(T));
    sched.alpha_bars.resize(static_cast<std::size_t>(T));
    const double rescale = 1000.0 / static_cast<double>(T);
    const double beta_lo = 1e-4 * rescale;
    const double beta_hi = 0.02 * rescale;
    double abar = 1.0;
    for (int t = 0; t < T; ++t) {
        double beta = beta_lo + (beta_hi - beta_lo) * static_cast<double>(t) / static_cast<double>(T - 1);
        beta = std::min(beta, 0.999);
        sched.betas[static_cast<std::size_t>(t)] = beta;
        sched.alphas[static_cast<std::size_t>(t)] = 1.0 - beta;
        abar *= 1.0 - beta;
        sched.alpha_bars[static_cast<std::size_t>(t)] = abar;
    }
    return sched;
}

namespace {
void check_t(int t, const NoiseSchedule& sched) {
    if (t < 0 || t >= sched.T) {
        throw ValidationError("timestep " + std::to_string(t) + " outside [0," + std::to_string(sched.T) + ")");
    }
}
}  // namespace

TensorPtr q_sample(const TensorPtr& x0, int t, const TensorPtr& eps, const NoiseSchedule& sched) {
    check_t(t, sched);
    if (x0->shape() != eps->shape()) {
        throw DimensionError("q_sample eps shape " + eps->shape_string() + " does not match x0 " +
                             x0->shape_string());
    }
    const double abar = sched.alpha_bars[static_cast<std::size_t>(t)];
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    auto out = Tensor::zeros(x0->shape());
    const double* px = x0->data().data();
    const double* pe = eps->data().data();
    double* dst = out->data().data();
    for (std::int64_t i = 0; i < out->numel(); ++i) dst[i] = a * px[i] + b * pe[i];
    return out;
}

TensorPtr q_sample_batch(const TensorPtr& x0, const std::vector<int>& ts, const TensorPtr& eps,
                         const NoiseSchedule& sched) {
    if (x0->shape() != eps->shape()) {
        throw DimensionError("q_sample eps shape " + eps->shape_string() + " does not match x0 " +
                             x0->shape_string());
    }
    const int N = x0->dim(0);
    if (static_cast<int>(ts.size()) != N) throw DimensionError("q_sample timestep count does not match batch");
    const std::int64_t per = x0->numel() / N;
    auto out = Tensor::zeros(x0->shape());
    const double* px = x0->data().data();
    const double* pe = eps->data().data();
    double* dst = out->data().data();
    for (int n = 0; n < N; ++n) {
        check_t(ts[static_cast<std::size_t>(n)], sched);
        const double abar = sched.alpha_bars[static_cast<std::size_t>(ts[static_cast<std::size_t>(n)])];
        const double a = std::sqrt(abar);
        const double b = std::sqrt(1.0 - abar);
        const std::int64_t base = n * per;
        for (std::int64_t i = 0; i < per; ++i) dst[base + i] = a * px[base + i] + b * pe[base + i];
    }
    return out;
}

void DenoiserConfig::validate() const {
    if (image_size < 4) throw ValidationError("denoiser image_size must be >= 4");
    if (channels < 1 || res_blocks < 1) throw ValidationError("denoiser channels/res_blocks must be >= 1");
    if (emb_dim < 2 || emb_dim % 2 != 0) throw ValidationError("denoiser emb_dim must be even and >= 2");
    if (groups < 1 || channels % groups != 0) {
        throw ValidationError("denoiser channels " + std::to_string(channels) +
                              " not divisible by group count " + std::to_string(groups));
    }
}

Denoiser::Denoiser(const DenoiserConfig& config)
    : config_((config.validate(), config)),
      conv_in_([&] {
          Rng rng(config.seed);
          // +2 coordinate planes: convolutions are translation-equivariant,
          // so absolute position (which carries the frequency axis) must be
          // fed in explicitly.
          return Conv2dLayer(config.in_channels + 2, config.channels, {3, 3}, {1, 1}, {1, 1}, rng);
      }()),
      time_mlp_([&] {
          Rng rng = Rng(config.seed).fork(1);
          return LinearLayer(config.emb_dim, config.channels, rng);
      }()),
      norm_out_(config.channels, config.groups),
      conv_out_([&] {
          Rng rng = Rng(config.seed).fork(2);
          return Conv2dLayer(config.channels, config.in_channels, {3, 3}, {1, 1}, {1, 1}, rng,
                             /*zero_init=*/true);
      }()) {
    for (int b = 0; b < config_.res_blocks; ++b) {
        Rng rng = Rng(config_.seed).fork(10 + static_cast<std::uint64_t>(b));
        blocks_.push_back(Block{
            GroupNormLayer(config_.channels, config_.groups),
            Conv2dLayer(config_.channels, config_.channels, {3, 3}, {1, 1}, {1, 1}, rng),
            LinearLayer(config_.channels, config_.channels, rng),
            GroupNormLayer(config_.channels, config_.groups),
            Conv2dLayer(config_.channels, config_.channels, {3, 3}, {1, 1}, {1, 1}, rng),
        });
    }
    std::clog << "[eegdiff] denoiser built: " << param_count() << " parameters\n";
}

TensorPtr Denoiser::with_coord_planes(const TensorPtr& x) const {
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    auto out = Tensor::zeros({N, C + 2, H, W});
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t in_per = static_cast<std::int64_t>(C) * plane;
    const std::int64_t out_per = static_cast<std::int64_t>(C + 2) * plane;
    for (int n = 0; n < N; ++n) {
        std::copy(x->data().begin() + n * in_per, x->data().begin() + (n + 1) * in_per,
                  out->data().begin() + n * out_per);
        double* rows = out->data().data() + n * out_per + in_per;
        double* cols = rows + plane;
        for (int r = 0; r < H; ++r) {
            const double rv = H > 1 ? 2.0 * r / (H - 1) - 1.0 : 0.0;
            for (int c = 0; c < W; ++c) {
                rows[static_cast<std::int64_t>(r) * W + c] = rv;
                cols[static_cast<std::int64_t>(r) * W + c] = W > 1 ? 2.0 * c / (W - 1) - 1.0 : 0.0;
            }
        }
    }
    return out;
}

TensorPtr Denoiser::timestep_embedding(const std::vector<int>& ts) const {
    const int N = static_cast<int>(ts.size());
    const int half = config_.emb_dim / 2;
    auto emb = Tensor::zeros({N, config_.emb_dim});
    double* dst = emb->data().data();
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                         static_cast<double>(half));
            const double angle = static_cast<double>(ts[static_cast<std::size_t>(n)]) * freq;
            dst[static_cast<std::int64_t>(n) * config_.emb_dim + i] = std::sin(angle);
            dst[static_cast<std::int64_t>(n) * config_.emb_dim + half + i] = std::cos(angle);
        }
    }
    return emb;
}

TensorPtr Denoiser::forward(const TensorPtr& x, const std::vector<int>& ts) {
    if (x->ndim() != 4 || x->dim(1) != config_.in_channels) {
        throw DimensionError("denoiser expects [N," + std::to_string(config_.in_channels) +
                             ",H,W] input, got " + x->shape_string());
    }
    if (static_cast<int>(ts.size()) != x->dim(0)) {
        throw DimensionError("denoiser timestep count does not match batch size");
    }
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;

    auto temb = gelu(time_mlp_.forward(timestep_embedding(ts)));
    auto h = conv_in_.forward(with_coord_planes(x));
    for (auto& block : blocks_) {
        auto a = gelu(block.norm1.forward(h));
        a = block.conv1.forward(a);
        a = add_sample_channel(a, block.time_proj.forward(temb));
        a = gelu(block.norm2.forward(a));
        a = block.conv2.forward(a);
        h = scale(add(h, a), inv_sqrt2);
    }
    return conv_out_.forward(gelu(norm_out_.forward(h)));
}

NamedParams Denoiser::named_params() const {
    NamedParams out;
    conv_in_.collect("conv_in", out);
    time_mlp_.collect("time_mlp", out);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b);
        blocks_[b].norm1.collect(prefix + ".norm1", out);
        blocks_[b].conv1.collect(prefix + ".conv1", out);
        blocks_[b].time_proj.collect(prefix + ".time_proj", out);
        blocks_[b].norm2.collect(prefix + ".norm2", out);
        blocks_[b].conv2.collect(prefix + ".conv2", out);
    }
    norm_out_.collect("norm_out", out);
    conv_out_.collect("conv_out", out);
    return out;
}

std::int64_t Denoiser::param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : named_params()) n += t->numel();
    return n;
}

void Denoiser::load_params(const NamedParams& params) {
    auto own = named_params();
    for (auto& [name, tensor] : own) {
        const auto it = std::find_if(params.begin(), params.end(),
                                     [&](const auto& p) { return p.first == name; });
        if (it == params.end()) throw IoError("checkpoint missing parameter '" + name + "'");
        if (it->second->shape() != tensor->shape()) {
            throw IoError("checkpoint parameter '" + name + "' has shape " + it->second->shape_string() +
                          ", expected " + tensor->shape_string());
        }
        tensor->data() = it->second->data();
    }
}

void DiffusionConfig::validate() const {
    if (image_size < 4 || (image_size & (image_size - 1)) != 0) {
        throw ValidationError("image_size must be a power of two >= 4, got " + std::to_string(image_size));
    }
    if (T < 2) throw ValidationError("T must be >= 2, got " + std::to_string(T));
    if (lr < 0 || batch_size < 1) throw ValidationError("lr must be >= 0 and batch_size >= 1");
}

double train_step(Denoiser& model, Adam& optimizer, const TensorPtr& batch, const NoiseSchedule& sched,
                  Rng& rng) {
    const int N = batch->dim(0);
    std::vector<int> ts(static_cast<std::size_t>(N));
    for (auto& t : ts) t = static_cast<int>(rng.uniform_int(sched.T));
    auto eps = Tensor::zeros(batch->shape());
    for (double& v : eps->data()) v = rng.gaussian();

    auto xt = q_sample_batch(batch, ts, eps, sched);
    auto pred = model.forward(xt, ts);
    auto loss = mse(pred, eps);
    const double value = loss->item();
    if (!std::isfinite(value)) {
        throw DivergenceError("diffusion training diverged, loss=" + std::to_string(value));
    }
    loss->backward();
    optimizer.step();
    return value;
}

TensorPtr p_sample_loop(Denoiser& model, int n, const NoiseSchedule& sched, const Rng& rng,
                        int threads) {
    if (n < 1) throw ValidationError("sample count must be >= 1");
    NoGradGuard no_grad;
    const int size = model.config().image_size;
    const int planes = model.config().in_channels;
    const std::int64_t per = static_cast<std::int64_t>(planes) * size * size;

    auto out = Tensor::zeros({n, planes, size, size});

    // Chunked so peak memory stays modest; per-image RNG streams keep the
    // result identical for any chunking or thread count.
    const int chunk = 16;
    std::vector<std::pair<int, int>> ranges;
    for (int lo = 0; lo < n; lo += chunk) ranges.emplace_back(lo, std::min(n, lo + chunk));

    parallel_for(static_cast<std::int64_t>(ranges.size()), threads, [&](std::int64_t r) {
        NoGradGuard worker_no_grad;  // grad mode is thread-local
        const auto [lo, hi] = ranges[static_cast<std::size_t>(r)];
        const int m = hi - lo;
        std::vector<Rng> streams;
        streams.reserve(static_cast<std::size_t>(m));
        for (int i = lo; i < hi; ++i) streams.push_back(rng.fork(static_cast<std::uint64_t>(i)));

        auto x = Tensor::zeros({m, planes, size, size});
        for (int i = 0; i < m; ++i) {
            double* base = x->data().data() + i * per;
            for (std::int64_t j = 0; j < per; ++j) base[j] = streams[static_cast<std::size_t>(i)].gaussian();
        }
        for (int t = sched.T - 1; t >= 0; --t) {
            const std::vector<int> ts(static_cast<std::size_t>(m), t);
            auto eps_hat = model.forward(x, ts);
            const double beta = sched.betas[static_cast<std::size_t>(t)];
            const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alphas[static_cast<std::size_t>(t)]);
            const double eps_coef = beta / std::sqrt(1.0 - sched.alpha_bars[static_cast<std::size_t>(t)]);
            const double sigma = std::sqrt(beta);
            double* px = x->data().data();
            const double* pe = eps_hat->data().data();
            for (int i = 0; i < m; ++i) {
                double* row = px + i * per;
                const double* erow = pe + i * per;
                Rng& stream = streams[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < per; ++j) {
                    double v = inv_sqrt_alpha * (row[j] - eps_coef * erow[j]);
                    if (t > 0) v += sigma * stream.gaussian();
                    row[j] = v;
                }
            }
            if (!x->all_finite()) {
                throw DivergenceError("sampling diverged at timestep " + std::to_string(t));
            }
        }
        double* dst = out->data().data() + static_cast<std::int64_t>(lo) * per;
        const double* src = x->data().data();
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(m) * per; ++j) {
            dst[j] = std::clamp(src[j], -1.0, 1.0);
        }
    });
    return out;
}

Efdm sample_to_efdm(const Tensor& x, const std::string& label) {
    if (x.ndim() != 3 || x.dim(0) != 3) {
        throw DimensionError("sample_to_efdm expects [3,H,W], got " + x.shape_string());
    }
    const int h = x.dim(1), w = x.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Efdm e;
    e.height = h;
    e.width = w;
    e.label = label;
    e.meta.synthetic = true;
    e.pixels.resize(static_cast<std::size_t>(plane));
    const double* src = x.data().data();
    for (std::int64_t i = 0; i < plane; ++i) {
        const double mean = (src[i] + src[plane + i] + src[2 * plane + i]) / 3.0;
        e.pixels[static_cast<std::size_t>(i)] = quantize_unit((mean + 1.0) / 2.0);
    }
    return e;
}

DiffusionTrainer::DiffusionTrainer(const DiffusionConfig& config, std::string label)
    : config_((config.validate(), config)),
      label_(std::move(label)),
      model_(DenoiserConfig{config.image_size, 3, config.channels, config.res_blocks, 64, 8, config.seed}),
      sched_(linear_schedule(config.T)),
      optimizer_([&] {
          std::vector<TensorPtr> params;
          for (auto& [name, t] : model_.named_params()) params.push_back(t);
          AdamConfig adam;
          adam.lr = config.lr;
          return Adam(std::move(params), adam);
      }()),
      rng_(Rng(config.seed).fork(0xd1f5u)) {}

double DiffusionTrainer::train_epoch(const std::vector<TensorPtr>& images) {
    if (images.empty()) throw ValidationError("diffusion training set is empty");
    std::vector<std::int64_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order.data(), static_cast<std::int64_t>(order.size()));

    const std::int64_t per = images.front()->numel();
    double total = 0.0;
    int steps = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config_.batch_size)) {
        const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config_.batch_size));
        const int m = static_cast<int>(hi - lo);
        auto batch = Tensor::zeros({m, 3, config_.image_size, config_.image_size});
        for (int i = 0; i < m; ++i) {
            const auto& img = images[static_cast<std::size_t>(order[lo + static_cast<std::size_t>(i)])];
            if (img->numel() != per || img->numel() != batch->numel() / m) {
                throw DimensionError("training image shape " + img->shape_string() +
                                     " does not match configured image size");
            }
            std::copy(img->data().begin(), img->data().end(), batch->data().begin() + i * per);
        }
        total += train_step(model_, optimizer_, batch, sched_, rng_);
        ++steps;
    }
    ++epochs_done_;
    return total / steps;
}

void DiffusionTrainer::save(const std::filesystem::path& path) const {
    save_denoiser(path, model_, sched_, label_, epochs_done_);
}

void save_denoiser(const std::filesystem::path& path, const Denoiser& model, const NoiseSchedule& sched,
                   const std::string& label, int epoch) {
    const auto& cfg = model.config();
    std::map<std::string, std::string> config{
        {"image_size", std::to_string(cfg.image_size)},
        {"in_channels", std::to_string(cfg.in_channels)},
        {"channels", std::to_string(cfg.channels)},
        {"res_blocks", std::to_string(cfg.res_blocks)},
        {"emb_dim", std::to_string(cfg.emb_dim)},
        {"groups", std::to_string(cfg.groups)},
        {"seed", std::to_string(cfg.seed)},
        {"T", std::to_string(sched.T)},
        {"label", label},
        {"epoch", std::to_string(epoch)},
    };
    save_checkpoint(path, CheckpointKind::Denoiser, config, model.named_params());
}

LoadedDenoiser load_denoiser(const std::filesystem::path& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != CheckpointKind::Denoiser) {
        throw IoError("checkpoint " + path.string() + " is not a denoiser checkpoint");
    }
    DenoiserConfig cfg;
    cfg.image_size = std::stoi(ckpt.require("image_size"));
    cfg.in_channels = std::stoi(ckpt.require("in_channels"));
    cfg.channels = std::stoi(ckpt.require("channels"));
    cfg.res_blocks = std::stoi(ckpt.require("res_blocks"));
    cfg.emb_dim = std::stoi(ckpt.require("emb_dim"));
    cfg.groups = std::stoi(ckpt.require("groups"));
    cfg.seed = std::stoull(ckpt.require("seed"));

    LoadedDenoiser loaded{Denoiser(cfg), linear_schedule(std::stoi(ckpt.require("T"))),
                          ckpt.require("label"), std::stoi(ckpt.require("epoch"))};
    loaded.model.load_params(ckpt.params);
    return loaded;
}

}  // namespace eegdiff
