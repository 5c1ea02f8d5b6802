#include "eegdiff/datagen.hpp"

#include <cmath>
#include <numbers>

#include "eegdiff/error.hpp"

namespace eegdiff {

void SynthSpec::validate() const {
    if (n_channels < 1) throw ValidationError("n_channels must be >= 1");
    if (sample_rate_hz <= 0 || duration_s <= 0) throw ValidationError("sample rate and duration must be positive");
    if (classes.empty()) throw ValidationError("at least one class required");
    if (noise_sigma < 0) throw ValidationError("noise_sigma must be >= 0");
    if (sinusoids < 1) throw ValidationError("sinusoids must be >= 1");
    const double nyquist = sample_rate_hz / 2.0;
    for (const auto& cls : classes) {
        if (cls.amplitude <= 0) throw ValidationError("class '" + cls.label + "' amplitude must be > 0");
        if (cls.band_center_hz + cls.band_width_hz / 2.0 >= nyquist) {
            throw ValidationError("class '" + cls.label + "' band exceeds the Nyquist frequency");
        }
        if (cls.band_center_hz - cls.band_width_hz / 2.0 < 0) {
            throw ValidationError("class '" + cls.label + "' band extends below 0 Hz");
        }
    }
}

SynthSpec SynthSpec::desk_default(std::uint64_t seed) {
    SynthSpec spec;
    spec.classes = {
        {"alpha", 10.0, 4.0, 1.0},   // 8-12 Hz
        {"beta", 30.0, 10.0, 1.0},   // 25-35 Hz
    };
    spec.seed = seed;
    return spec;
}

namespace {

/// 1/f-amplitude noise synthesized in the frequency domain.
std::vector<double> pink_noise(Rng& rng, std::int64_t samples) {
    std::size_t n = 1;
    while (n < static_cast<std::size_t>(samples)) n <<= 1;
    std::vector<std::complex<double>> freq(n, {0.0, 0.0});
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double amp = 1.0 / std::sqrt(static_cast<double>(k));
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        freq[k] = std::polar(amp, phase);
        if (k < n / 2) freq[n - k] = std::conj(freq[k]);
    }
    // Inverse FFT via conjugation trick.
    for (auto& z : freq) z = std::conj(z);
    fft_pow2(freq);
    std::vector<double> out(static_cast<std::size_t>(samples));
    double rms = 0.0;
    for (std::int64_t t = 0; t < samples; ++t) {
        out[static_cast<std::size_t>(t)] = std::conj(freq[static_cast<std::size_t>(t)]).real() /
                                           static_cast<double>(n);
        rms += out[static_cast<std::size_t>(t)] * out[static_cast<std::size_t>(t)];
    }
    rms = std::sqrt(rms / static_cast<double>(samples));
    if (rms > 0) {
        for (auto& v : out) v /= rms;
    }
    return out;
}

}  // namespace

Recording generate(const SynthSpec& spec, int class_index, std::uint64_t instance) {
    spec.validate();
    if (class_index < 0 || class_index >= static_cast<int>(spec.classes.size())) {
        throw ValidationError("class index " + std::to_string(class_index) + " outside [0," +
                              std::to_string(spec.classes.size()) + ")");
    }
    const SynthClass& cls = spec.classes[static_cast<std::size_t>(class_index)];
    const std::int64_t samples = static_cast<std::int64_t>(std::llround(spec.duration_s * spec.sample_rate_hz));

    Rng rng = Rng(spec.seed).fork(mix64(static_cast<std::uint64_t>(class_index) * 0x51ed270b0733cc9dULL) ^
                                  mix64(instance));

    Recording rec;
    rec.channels = spec.n_channels;
    rec.samples = samples;
    rec.sample_rate_hz = spec.sample_rate_hz;
    rec.label = cls.label;
    rec.data.assign(static_cast<std::size_t>(spec.n_channels) * static_cast<std::size_t>(samples), 0.0);

    const double tone_amp = cls.amplitude / static_cast<double>(spec.sinusoids);
    const double lo = cls.band_center_hz - cls.band_width_hz / 2.0;
    const double hi = cls.band_center_hz + cls.band_width_hz / 2.0;
    for (int s = 0; s < spec.sinusoids; ++s) {
        const double freq = (lo == hi) ? lo : rng.uniform(lo, hi);
        const double omega = 2.0 * std::numbers::pi * freq / spec.sample_rate_hz;
        for (int ch = 0; ch < spec.n_channels; ++ch) {
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (std::int64_t t = 0; t < samples; ++t) {
                rec.at(ch, t) += tone_amp * std::sin(omega * static_cast<double>(t) + phase);
            }
        }
    }
    if (spec.noise_sigma > 0) {
        for (int ch = 0; ch < spec.n_channels; ++ch) {
            for (std::int64_t t = 0; t < samples; ++t) {
                rec.at(ch, t) += spec.noise_sigma * rng.gaussian();
            }
        }
        if (spec.one_over_f) {
            for (int ch = 0; ch < spec.n_channels; ++ch) {
                const auto tilt = pink_noise(rng, samples);
                for (std::int64_t t = 0; t < samples; ++t) {
                    rec.at(ch, t) += spec.noise_sigma * tilt[static_cast<std::size_t>(t)];
                }
            }
        }
    }
    return rec;
}

}  // namespace eegdiff
