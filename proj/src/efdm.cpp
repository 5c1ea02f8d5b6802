#include "eegdiff/efdm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "eegdiff/error.hpp"

namespace eegdiff {

int EfdmDataset::label_index(const std::string& label) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == label) return static_cast<int>(i);
    }
    return -1;
}

int EfdmDataset::intern_label(const std::string& label) {
    const int idx = label_index(label);
    if (idx >= 0) return idx;
    class_names.push_back(label);
    return static_cast<int>(class_names.size()) - 1;
}

std::uint8_t quantize_unit(double x) {
    const double clamped = std::clamp(x, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

std::vector<Efdm> build_efdms(const std::vector<double>& magnitudes, int frames, int freq_bins,
                              int channels, double freq_resolution_hz, const EfdmOptions& options,
                              const std::string& label) {
    if (frames < 0 || freq_bins <= 0 || channels <= 0) throw ValidationError("build_efdms: bad dimensions");
    if (magnitudes.size() != static_cast<std::size_t>(frames) * freq_bins * channels) {
        throw DimensionError("build_efdms: magnitude buffer size " + std::to_string(magnitudes.size()) +
                             " does not match frames*bins*channels");
    }
    if (freq_resolution_hz <= 0) throw ValidationError("build_efdms: frequency resolution must be positive");

    // Retain bins with frequency <= cut_hz.
    int kept_bins = static_cast<int>(std::floor(options.cut_hz / freq_resolution_hz)) + 1;
    kept_bins = std::min(kept_bins, freq_bins);
    const int size = options.image_size;
    if (kept_bins > size || channels > size) {
        throw CapacityError("EFDM content " + std::to_string(kept_bins) + "x" + std::to_string(channels) +
                            " exceeds image size " + std::to_string(size) +
                            "; increase --image-size or coarsen the frequency resolution");
    }

    std::vector<Efdm> maps;
    maps.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        Efdm e;
        e.height = size;
        e.width = size;
        e.pixels.assign(static_cast<std::size_t>(size) * size, 0);
        e.label = label;
        e.meta.frame = f;

        const std::size_t frame_base = static_cast<std::size_t>(f) * freq_bins * channels;
        double peak = 0.0;
        for (int b = 0; b < kept_bins; ++b) {
            for (int c = 0; c < channels; ++c) {
                peak = std::max(peak, magnitudes[frame_base + static_cast<std::size_t>(b) * channels + c]);
            }
        }
        if (peak > 0.0) {
            for (int b = 0; b < kept_bins; ++b) {
                for (int c = 0; c < channels; ++c) {
                    const double v = magnitudes[frame_base + static_cast<std::size_t>(b) * channels + c] / peak;
                    // Vertical flip: bin 0 lands on the bottom row.
                    e.pixels[static_cast<std::size_t>(size - 1 - b) * size + c] = quantize_unit(v);
                }
            }
        }
        maps.push_back(std::move(e));
    }
    return maps;
}

std::vector<Efdm> build_efdms(const Spectrogram& spec, const EfdmOptions& options,
                              const std::string& label) {
    return build_efdms(magnitude(spec), spec.frames, spec.freq_bins, spec.channels,
                       spec.freq_resolution_hz, options, label);
}

std::vector<std::uint8_t> to_rgb_triple(const Efdm& e) {
    std::vector<std::uint8_t> out(3 * e.pixels.size());
    for (int plane = 0; plane < 3; ++plane) {
        std::copy(e.pixels.begin(), e.pixels.end(), out.begin() + static_cast<std::ptrdiff_t>(plane * e.pixels.size()));
    }
    return out;
}

TensorPtr to_float_tensor(const Efdm& e) {
    std::vector<double> data(3 * e.pixels.size());
    for (std::size_t i = 0; i < e.pixels.size(); ++i) {
        const double v = static_cast<double>(e.pixels[i]) / 127.5 - 1.0;
        data[i] = v;
        data[e.pixels.size() + i] = v;
        data[2 * e.pixels.size() + i] = v;
    }
    return Tensor::from_data({3, e.height, e.width}, std::move(data));
}

std::uint64_t efdm_fingerprint(const Efdm& e) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t p : e.pixels) {
        h ^= p;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {
constexpr char kDatasetMagic[4] = {'E', 'F', 'D', 'M'};
constexpr std::uint16_t kDatasetVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}
}  // namespace

void save_dataset(const std::filesystem::path& path, const EfdmDataset& dataset) {
    if (dataset.class_names.empty() || dataset.class_names.size() > 255) {
        throw ValidationError("dataset must have between 1 and 255 classes");
    }
    int height = 0, width = 0;
    for (const auto& e : dataset.items) {
        if (height == 0) {
            height = e.height;
            width = e.width;
        } else if (e.height != height || e.width != width) {
            throw ValidationError("dataset items disagree on pixel dimensions");
        }
        if (dataset.label_index(e.label) < 0) {
            throw ValidationError("item label '" + e.label + "' missing from class vocabulary");
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file " + path.string());
    out.write(kDatasetMagic, 4);
    write_le<std::uint16_t>(out, kDatasetVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.items.size()));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(height));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(width));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dataset.class_names.size()));
    for (const auto& name : dataset.class_names) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& e : dataset.items) {
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dataset.label_index(e.label)));
        out.write(reinterpret_cast<const char*>(e.pixels.data()),
                  static_cast<std::streamsize>(e.pixels.size()));
    }
    if (!out) throw IoError("failed writing dataset file " + path.string());
}

EfdmDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0) {
        throw IoError("bad magic in dataset file " + path.string());
    }
    const auto version = read_le<std::uint16_t>(in);
    if (version != kDatasetVersion) {
        throw IoError("unsupported dataset version " + std::to_string(version) + " in " + path.string());
    }
    const auto count = read_le<std::uint32_t>(in);
    const auto height = read_le<std::uint16_t>(in);
    const auto width = read_le<std::uint16_t>(in);
    const auto n_classes = read_le<std::uint8_t>(in);
    if (!in) throw IoError("truncated dataset header in " + path.string());

    EfdmDataset ds;
    for (int i = 0; i < n_classes; ++i) {
        const auto len = read_le<std::uint16_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        ds.class_names.push_back(std::move(name));
    }
    const std::size_t pixel_count = static_cast<std::size_t>(height) * width;
    ds.items.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto label_idx = read_le<std::uint8_t>(in);
        if (label_idx >= ds.class_names.size()) {
            throw IoError("item " + std::to_string(i) + " has label index outside vocabulary in " +
                          path.string());
        }
        Efdm e;
        e.height = height;
        e.width = width;
        e.label = ds.class_names[label_idx];
        e.pixels.resize(pixel_count);
        in.read(reinterpret_cast<char*>(e.pixels.data()), static_cast<std::streamsize>(pixel_count));
        if (!in) throw IoError("truncated item " + std::to_string(i) + " in " + path.string());
        ds.items.push_back(std::move(e));
    }
    return ds;
}

void export_pgm(const std::filesystem::path& path, const Efdm& e) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file " + path.string());
    out << "P5\n" << e.width << " " << e.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(e.pixels.data()),
              static_cast<std::streamsize>(e.pixels.size()));
    if (!out) throw IoError("failed writing image file " + path.string());
}

void export_ppm(const std::filesystem::path& path, const Efdm& e) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file " + path.string());
    out << "P6\n" << e.width << " " << e.height << "\n255\n";
    // P6 interleaves per pixel; the three planes are identical.
    for (std::size_t i = 0; i < e.pixels.size(); ++i) {
        const char v = static_cast<char>(e.pixels[i]);
        out.write(&v, 1);
        out.write(&v, 1);
        out.write(&v, 1);
    }
    if (!out) throw IoError("failed writing image file " + path.string());
}

}  // namespace eegdiff
