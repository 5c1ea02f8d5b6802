#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegdiff/signal.hpp"
#include "eegdiff/tensor.hpp"

namespace eegdiff {

/// Electrode-frequency distribution map: an 8-bit grayscale image with
/// frequency on the vertical axis (flipped: frequency 0 at the bottom row)
/// and channels on the horizontal axis, zero padding on the top rows and
/// right columns.
struct Efdm {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // row-major, row 0 at the top
    std::string label;

    struct Meta {
        int subject = -1;
        int session = -1;
        int frame = -1;
        bool synthetic = false;
    } meta;

    std::uint8_t at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
};

struct EfdmDataset {
    std::vector<Efdm> items;
    std::vector<std::string> class_names;

    int label_index(const std::string& label) const;
    /// Adds the label to the vocabulary if absent, returns its index.
    int intern_label(const std::string& label);
};

struct EfdmOptions {
    double cut_hz = 100.0;
    int image_size = 128;
};

/// One EFDM per STFT frame: cut bins above cut_hz, normalize each frame by
/// its max magnitude, place into an image_size square anchored bottom-left
/// after the vertical flip, quantize to 8 bits (round half up).
std::vector<Efdm> build_efdms(const std::vector<double>& magnitudes, int frames, int freq_bins,
                              int channels, double freq_resolution_hz, const EfdmOptions& options,
                              const std::string& label = "");

/// Convenience overload over a Spectrogram.
std::vector<Efdm> build_efdms(const Spectrogram& spec, const EfdmOptions& options,
                              const std::string& label = "");

/// Grayscale plane replicated into 3 channels, planar [3][H][W].
std::vector<std::uint8_t> to_rgb_triple(const Efdm& e);

/// [3,H,W] tensor with values pixel/127.5 - 1 in [-1, 1].
TensorPtr to_float_tensor(const Efdm& e);

/// Inverse quantization of one pixel value in [-1, 1].
std::uint8_t quantize_unit(double x);

/// 64-bit FNV-1a over the pixel bytes; the dataset leakage fingerprint.
std::uint64_t efdm_fingerprint(const Efdm& e);

/// Binary dataset container, magic "EFDM" (see README for the layout).
void save_dataset(const std::filesystem::path& path, const EfdmDataset& dataset);
EfdmDataset load_dataset(const std::filesystem::path& path);

/// PGM (P5) export of one map; PPM (P6) export of its RGB triple.
void export_pgm(const std::filesystem::path& path, const Efdm& e);
void export_ppm(const std::filesystem::path& path, const Efdm& e);

}  // namespace eegdiff
