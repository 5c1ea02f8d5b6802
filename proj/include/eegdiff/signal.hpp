#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eegdiff {

/// Multichannel recording, channels x time, row-major by channel.
struct Recording {
    std::vector<double> data;
    int channels = 0;
    std::int64_t samples = 0;
    double sample_rate_hz = 0.0;
    std::string label;
    std::string subject_id;
    std::string session_id;

    double at(int channel, std::int64_t t) const {
        return data[static_cast<std::size_t>(channel) * static_cast<std::size_t>(samples) +
                    static_cast<std::size_t>(t)];
    }
    double& at(int channel, std::int64_t t) {
        return data[static_cast<std::size_t>(channel) * static_cast<std::size_t>(samples) +
                    static_cast<std::size_t>(t)];
    }
};

/// One-sided STFT output, frames x freq_bins x channels.
struct Spectrogram {
    std::vector<std::complex<double>> values;
    int frames = 0;
    int freq_bins = 0;  // wsize/2 + 1
    int channels = 0;
    int wsize = 0;
    int hop = 0;
    double freq_resolution_hz = 0.0;

    std::complex<double> at(int frame, int bin, int channel) const {
        return values[(static_cast<std::size_t>(frame) * freq_bins + bin) * channels + channel];
    }
};

enum class Window {
    Hann,         // periodic Hann, the analysis default
    Rectangular,  // oracle/energy-check mode
};

/// Direct O(n^2) DFT; the fallback for non-power-of-two sizes and the test
/// oracle for the FFT path.
std::vector<std::complex<double>> dft_direct(const std::vector<std::complex<double>>& x);

/// Iterative radix-2 FFT; size must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& x);

/// Windowed short-time Fourier transform. Frames start at multiples of
/// `hop`; a trailing partial segment is zero-padded to wsize. Keeps the
/// one-sided spectrum of wsize/2+1 bins.
Spectrogram stft(const Recording& rec, int wsize, int hop, Window window = Window::Hann);

/// Elementwise |z|, frames x freq_bins x channels.
std::vector<double> magnitude(const Spectrogram& spec);

/// Number of STFT frames for a signal of length `samples`.
int stft_frame_count(std::int64_t samples, int wsize, int hop);

/// Delimited text loader: first row channel names, then one row per time
/// step with channels as columns (comma or whitespace separated).
Recording load_recording_text(const std::filesystem::path& path, double sample_rate_hz,
                              const std::string& label = "");

/// Raw binary format: magic "EEGR", u32 channels, u32 time steps,
/// f32 sample rate (little-endian, 16-byte header), then channels x time
/// row-major 32-bit floats.
Recording load_recording_binary(const std::filesystem::path& path, const std::string& label = "");
void save_recording_binary(const std::filesystem::path& path, const Recording& rec);

}  // namespace eegdiff
