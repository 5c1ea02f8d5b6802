#include "eegdiff/signal.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "eegdiff/error.hpp"

namespace eegdiff {

namespace {

void validate_recording(const Recording& rec, int wsize) {
    if (rec.channels < 1) throw ValidationError("recording must have at least one channel");
    if (rec.samples < wsize) {
        throw ValidationError("window size " + std::to_string(wsize) + " exceeds signal length " +
                              std::to_string(rec.samples));
    }
    for (double v : rec.data) {
        if (std::isnan(v)) throw ValidationError("recording contains NaN samples");
    }
}

std::vector<double> make_window(int wsize, Window window) {
    std::vector<double> w(static_cast<std::size_t>(wsize), 1.0);
    if (window == Window::Hann) {
        for (int n = 0; n < wsize; ++n) {
            w[static_cast<std::size_t>(n)] =
                0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / wsize);
        }
    }
    return w;
}

}  // namespace

std::vector<std::complex<double>> dft_direct(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) /
                                 static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

void fft_pow2(std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ValidationError("fft_pow2 requires a power-of-two size, got " + std::to_string(n));
    }
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

int stft_frame_count(std::int64_t samples, int wsize, int hop) {
    const std::int64_t full = (samples - wsize) / hop + 1;
    const bool tail = (samples - wsize) % hop != 0;
    return static_cast<int>(full + (tail ? 1 : 0));
}

Spectrogram stft(const Recording& rec, int wsize, int hop, Window window) {
    if (wsize < 4 || wsize % 2 != 0) {
        throw ValidationError("wsize must be even and >= 4, got " + std::to_string(wsize));
    }
    if (hop <= 0 || hop > wsize) {
        throw ValidationError("hop must satisfy 0 < hop <= wsize, got " + std::to_string(hop));
    }
    validate_recording(rec, wsize);

    const int frames = stft_frame_count(rec.samples, wsize, hop);
    const int bins = wsize / 2 + 1;
    const bool pow2 = (wsize & (wsize - 1)) == 0;
    const std::vector<double> win = make_window(wsize, window);

    Spectrogram spec;
    spec.frames = frames;
    spec.freq_bins = bins;
    spec.channels = rec.channels;
    spec.wsize = wsize;
    spec.hop = hop;
    spec.freq_resolution_hz = rec.sample_rate_hz / wsize;
    spec.values.assign(static_cast<std::size_t>(frames) * bins * rec.channels, {0.0, 0.0});

    std::vector<std::complex<double>> seg(static_cast<std::size_t>(wsize));
    for (int ch = 0; ch < rec.channels; ++ch) {
        for (int f = 0; f < frames; ++f) {
            const std::int64_t start = static_cast<std::int64_t>(f) * hop;
            for (int n = 0; n < wsize; ++n) {
                const std::int64_t t = start + n;
                const double v = (t < rec.samples) ? rec.at(ch, t) : 0.0;
                seg[static_cast<std::size_t>(n)] = {v * win[static_cast<std::size_t>(n)], 0.0};
            }
            std::vector<std::complex<double>> freq;
            if (pow2) {
                freq = seg;
                fft_pow2(freq);
            } else {
                freq = dft_direct(seg);
            }
            for (int b = 0; b < bins; ++b) {
                spec.values[(static_cast<std::size_t>(f) * bins + b) * rec.channels + ch] =
                    freq[static_cast<std::size_t>(b)];
            }
        }
    }
    return spec;
}

std::vector<double> magnitude(const Spectrogram& spec) {
    std::vector<double> out(spec.values.size());
    for (std::size_t i = 0; i < spec.values.size(); ++i) out[i] = std::abs(spec.values[i]);
    return out;
}

Recording load_recording_text(const std::filesystem::path& path, double sample_rate_hz,
                              const std::string& label) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open recording file " + path.string());
    if (sample_rate_hz <= 0) throw ValidationError("sample rate must be positive");

    std::string header;
    if (!std::getline(in, header)) throw IoError("empty recording file " + path.string());
    const char delim = header.find(',') != std::string::npos ? ',' : ' ';

    auto split = [delim](const std::string& line) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        if (delim == ',') {
            while (std::getline(ls, field, ',')) fields.push_back(field);
        } else {
            while (ls >> field) fields.push_back(field);
        }
        return fields;
    };

    const auto names = split(header);
    const int channels = static_cast<int>(names.size());
    if (channels < 1) throw ValidationError("recording header names no channels");

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line);
        if (static_cast<int>(fields.size()) != channels) {
            throw ValidationError("row " + std::to_string(rows.size() + 2) + " in " + path.string() +
                                  " has " + std::to_string(fields.size()) + " columns, expected " +
                                  std::to_string(channels));
        }
        std::vector<double> row(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) row[i] = std::stod(fields[i]);
        rows.push_back(std::move(row));
    }

    Recording rec;
    rec.channels = channels;
    rec.samples = static_cast<std::int64_t>(rows.size());
    rec.sample_rate_hz = sample_rate_hz;
    rec.label = label;
    rec.data.resize(static_cast<std::size_t>(channels) * rows.size());
    // Transpose: file rows are time steps, storage is channel-major.
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (int c = 0; c < channels; ++c) rec.at(c, static_cast<std::int64_t>(t)) = rows[t][static_cast<std::size_t>(c)];
    }
    return rec;
}

namespace {
constexpr char kRecordingMagic[4] = {'E', 'E', 'G', 'R'};

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

Recording load_recording_binary(const std::filesystem::path& path, const std::string& label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open recording file " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kRecordingMagic, 4) != 0) {
        throw IoError("bad magic in recording file " + path.string());
    }
    const auto channels = read_le<std::uint32_t>(in);
    const auto samples = read_le<std::uint32_t>(in);
    const auto rate = read_le<float>(in);
    if (!in) throw IoError("truncated header in recording file " + path.string());
    if (channels == 0 || samples == 0 || !(rate > 0)) {
        throw ValidationError("invalid header fields in recording file " + path.string());
    }

    Recording rec;
    rec.channels = static_cast<int>(channels);
    rec.samples = static_cast<std::int64_t>(samples);
    rec.sample_rate_hz = static_cast<double>(rate);
    rec.label = label;
    const std::size_t count = static_cast<std::size_t>(channels) * samples;
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw IoError("truncated samples in recording file " + path.string());
    rec.data.assign(raw.begin(), raw.end());
    return rec;
}

void save_recording_binary(const std::filesystem::path& path, const Recording& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write recording file " + path.string());
    out.write(kRecordingMagic, 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.channels));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.samples));
    write_le<float>(out, static_cast<float>(rec.sample_rate_hz));
    std::vector<float> raw(rec.data.begin(), rec.data.end());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("failed writing recording file " + path.string());
}

}  // namespace eegdiff
