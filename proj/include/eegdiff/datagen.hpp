#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eegdiff/rng.hpp"
#include "eegdiff/signal.hpp"

namespace eegdiff {

struct SynthClass {
    std::string label;
    double band_center_hz = 10.0;
    double band_width_hz = 4.0;
    double amplitude = 1.0;
};

/// Configuration of the synthetic recording generator. Each recording is a
/// sum of `sinusoids` tones with frequencies drawn uniformly in the class
/// band and independent per-channel phases, plus white Gaussian noise and an
/// optional 1/f noise tilt. Fully deterministic given (seed, class, instance).
struct SynthSpec {
    int n_channels = 8;
    double sample_rate_hz = 250.0;
    double duration_s = 4.0;
    std::vector<SynthClass> classes;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
    int sinusoids = 3;
    bool one_over_f = false;

    void validate() const;

    /// Two disjoint-band classes (8-12 Hz vs 25-35 Hz) at desk scale.
    static SynthSpec desk_default(std::uint64_t seed);
};

/// Generate one labeled recording. `instance` selects the derived RNG
/// stream, so recordings can be produced in any order or in parallel.
Recording generate(const SynthSpec& spec, int class_index, std::uint64_t instance = 0);

}  // namespace eegdiff
