#include "eegdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eegdiff/error.hpp"

namespace eegdiff {

namespace {
constexpr char kMagic[4] = {'D', 'D', 'P', 'M'};
constexpr std::uint16_t kVersion = 1;

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

const std::string& LoadedCheckpoint::require(const std::string& key) const {
    auto it = config.find(key);
    if (it == config.end()) throw IoError("checkpoint config missing key '" + key + "'");
    return it->second;
}

void save_checkpoint(const std::filesystem::path& path, CheckpointKind kind,
                     const std::map<std::string, std::string>& config, const NamedParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint file " + path.string());

    std::ostringstream cfg;
    for (const auto& [key, value] : config) cfg << key << "=" << value << "\n";
    const std::string cfg_str = cfg.str();

    out.write(kMagic, 4);
    write_le<std::uint16_t>(out, kVersion);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
    write_le<std::uint8_t>(out, 0);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_str.size()));
    out.write(cfg_str.data(), static_cast<std::streamsize>(cfg_str.size()));

    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : params) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor->ndim()));
        for (int d = 0; d < tensor->ndim(); ++d) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor->dim(d)));
        write_le<std::uint64_t>(out, offset);
        offset += static_cast<std::uint64_t>(tensor->numel());
    }
    write_le<std::uint64_t>(out, offset);
    for (const auto& [name, tensor] : params) {
        out.write(reinterpret_cast<const char*>(tensor->data().data()),
                  static_cast<std::streamsize>(tensor->data().size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint file " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("bad magic in checkpoint file " + path.string());
    }
    const auto version = read_le<std::uint16_t>(in);
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    }
    LoadedCheckpoint ckpt;
    ckpt.kind = static_cast<CheckpointKind>(read_le<std::uint8_t>(in));
    read_le<std::uint8_t>(in);  // reserved

    const auto cfg_len = read_le<std::uint32_t>(in);
    std::string cfg_str(cfg_len, '\0');
    in.read(cfg_str.data(), cfg_len);
    std::istringstream cfg(cfg_str);
    std::string line;
    while (std::getline(cfg, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
    }

    const auto n_params = read_le<std::uint32_t>(in);
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    entries.reserve(n_params);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        Entry e;
        const auto name_len = read_le<std::uint16_t>(in);
        e.name.resize(name_len);
        in.read(e.name.data(), name_len);
        const auto ndim = read_le<std::uint8_t>(in);
        for (int d = 0; d < ndim; ++d) e.shape.push_back(static_cast<int>(read_le<std::uint32_t>(in)));
        e.offset = read_le<std::uint64_t>(in);
        entries.push_back(std::move(e));
    }
    const auto total = read_le<std::uint64_t>(in);
    if (!in) throw IoError("truncated manifest in checkpoint file " + path.string());

    std::vector<double> buffer(total);
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw IoError("truncated parameter buffer in checkpoint file " + path.string());

    for (auto& e : entries) {
        const std::int64_t n = shape_numel(e.shape);
        if (e.offset + static_cast<std::uint64_t>(n) > total) {
            throw IoError("parameter '" + e.name + "' overruns buffer in " + path.string());
        }
        std::vector<double> data(buffer.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                 buffer.begin() + static_cast<std::ptrdiff_t>(e.offset + static_cast<std::uint64_t>(n)));
        ckpt.params.emplace_back(e.name, Tensor::from_data(e.shape, std::move(data), true));
    }
    return ckpt;
}

}  // namespace eegdiff
