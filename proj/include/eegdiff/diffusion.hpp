#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eegdiff/adam.hpp"
#include "eegdiff/efdm.hpp"
#include "eegdiff/nn.hpp"
#include "eegdiff/rng.hpp"

namespace eegdiff {

/// Forward-process variance tables for T steps.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;      // 1 - beta_t
    std::vector<double> alpha_bars;  // cumulative product of alpha
};

/// Linear beta schedule, rescaled so any T matches the T=1000 reference
/// range 1e-4..0.02; betas clamped to (0, 0.999].
NoiseSchedule linear_schedule(int T);

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, one t for the whole tensor.
TensorPtr q_sample(const TensorPtr& x0, int t, const TensorPtr& eps, const NoiseSchedule& sched);

/// Batched variant with a per-sample timestep.
TensorPtr q_sample_batch(const TensorPtr& x0, const std::vector<int>& ts, const TensorPtr& eps,
                         const NoiseSchedule& sched);

struct DenoiserConfig {
    int image_size = 32;
    int in_channels = 3;
    int channels = 32;
    int res_blocks = 2;
    int emb_dim = 64;   // sinusoidal timestep embedding width
    int groups = 8;     // group-norm group count
    std::uint64_t seed = 0;

    void validate() const;
};

/// Convolutional epsilon-prediction network: a stem conv (fed the input plus
/// two coordinate planes, since absolute position carries the frequency
/// axis) into `res_blocks` residual blocks (group norm, GELU, conv, timestep
/// injection) with 1/sqrt(2) skip scaling, and a zero-initialized output
/// conv so the initial prediction is exactly zero.
class Denoiser {
public:
    explicit Denoiser(const DenoiserConfig& config);

    /// x [N,in,H,W], one timestep per sample; output has the input shape.
    TensorPtr forward(const TensorPtr& x, const std::vector<int>& ts);

    NamedParams named_params() const;
    std::int64_t param_count() const;
    const DenoiserConfig& config() const noexcept { return config_; }

    /// Overwrite parameters by name (checkpoint restore).
    void load_params(const NamedParams& params);

private:
    struct Block {
        GroupNormLayer norm1;
        Conv2dLayer conv1;
        LinearLayer time_proj;
        GroupNormLayer norm2;
        Conv2dLayer conv2;
    };

    TensorPtr timestep_embedding(const std::vector<int>& ts) const;
    TensorPtr with_coord_planes(const TensorPtr& x) const;

    DenoiserConfig config_;
    Conv2dLayer conv_in_;
    LinearLayer time_mlp_;
    std::vector<Block> blocks_;
    GroupNormLayer norm_out_;
    Conv2dLayer conv_out_;
};

struct DiffusionConfig {
    int image_size = 32;
    int T = 200;
    double lr = 1e-4;
    int batch_size = 16;
    int channels = 32;
    int res_blocks = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One optimization step: per-sample uniform t, Gaussian eps, epsilon-MSE
/// loss, backprop, Adam. Returns the loss; non-finite loss raises
/// DivergenceError carrying the value.
double train_step(Denoiser& model, Adam& optimizer, const TensorPtr& batch,
                  const NoiseSchedule& sched, Rng& rng);

/// Ancestral sampler: x_T ~ N(0,1); mu_t = (x_t - beta_t/sqrt(1-abar_t) *
/// eps_hat) / sqrt(alpha_t), sigma_t^2 = beta_t, no noise at t=0; final
/// output clamped to [-1,1]. Each image draws from its own forked RNG
/// stream, so results are independent of chunking or thread count.
TensorPtr p_sample_loop(Denoiser& model, int n, const NoiseSchedule& sched, const Rng& rng,
                        int threads = 1);

/// Quantize one sampled [3,H,W] tensor in [-1,1] back to an 8-bit map
/// (plane average), marked synthetic.
Efdm sample_to_efdm(const Tensor& x, const std::string& label = "");

/// Owns model, schedule, optimizer and data order for one training run.
class DiffusionTrainer {
public:
    DiffusionTrainer(const DiffusionConfig& config, std::string label);

    /// One pass over the images (one epoch); returns the mean step loss.
    double train_epoch(const std::vector<TensorPtr>& images);

    Denoiser& model() noexcept { return model_; }
    const NoiseSchedule& schedule() const noexcept { return sched_; }
    const DiffusionConfig& config() const noexcept { return config_; }
    const std::string& label() const noexcept { return label_; }
    int epochs_done() const noexcept { return epochs_done_; }

    void save(const std::filesystem::path& path) const;

private:
    DiffusionConfig config_;
    std::string label_;
    Denoiser model_;
    NoiseSchedule sched_;
    Adam optimizer_;
    Rng rng_;
    int epochs_done_ = 0;
};

struct LoadedDenoiser {
    Denoiser model;
    NoiseSchedule sched;
    std::string label;
    int epoch = 0;
};

LoadedDenoiser load_denoiser(const std::filesystem::path& path);
void save_denoiser(const std::filesystem::path& path, const Denoiser& model,
                   const NoiseSchedule& sched, const std::string& label, int epoch);

}  // namespace eegdiff
