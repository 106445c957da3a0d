#include "ncad/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace ncad {

namespace {

// Buffers are little-endian on disk regardless of host order.
template <typename T>
void append_le(std::string& out, T v) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <typename T>
T read_le(const char* p) {
    std::array<unsigned char, sizeof(T)> bits;
    std::memcpy(bits.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
}

}  // namespace

CheckpointDtype checkpoint_dtype_from_string(const std::string& s) {
    if (s == "f64") return CheckpointDtype::f64;
    if (s == "f32") return CheckpointDtype::f32;
    throw ConfigError("unknown checkpoint dtype '" + s + "' (expected f64 or f32)");
}

std::string to_string(CheckpointDtype d) { return d == CheckpointDtype::f64 ? "f64" : "f32"; }

ParameterSet Checkpoint::to_parameter_set() const {
    ParameterSet ps;
    for (const auto& e : tensors) {
        Tensor copy = Tensor::from_values(e.tensor.shape(),
                                          {e.tensor.values().begin(), e.tensor.values().end()});
        ps.add(e.name, std::move(copy));
    }
    return ps;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& meta, CheckpointDtype dtype) {
    const std::size_t elem_size = dtype == CheckpointDtype::f64 ? 8 : 4;

    std::string data;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : params.entries()) {
        const auto vals = e.tensor.values();
        nlohmann::json rec;
        rec["name"] = e.name;
        rec["shape"] = e.tensor.shape();
        rec["offset"] = data.size();
        rec["nbytes"] = vals.size() * elem_size;
        tensors.push_back(std::move(rec));
        for (double v : vals) {
            if (dtype == CheckpointDtype::f64) {
                append_le(data, v);
            } else {
                append_le(data, static_cast<float>(v));
            }
        }
    }

    nlohmann::json header;
    header["version"] = kCheckpointVersion;
    header["dtype"] = to_string(dtype);
    header["meta"] = meta;
    header["tensors"] = std::move(tensors);
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    std::string len;
    append_le<std::uint64_t>(len, header_str.size());
    out.write(len.data(), static_cast<std::streamsize>(len.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("short write to '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < sizeof(kCheckpointMagic) + 8 ||
        std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw DataError("'" + path.string() + "' is not a parameter checkpoint (bad magic)");
    }
    const auto header_len = read_le<std::uint64_t>(blob.data() + sizeof(kCheckpointMagic));
    const std::size_t header_start = sizeof(kCheckpointMagic) + 8;
    if (header_start + header_len > blob.size()) {
        throw DataError("checkpoint '" + path.string() + "' truncated in header");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(header_start, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + path.string() + "' has malformed header: " + e.what());
    }
    if (!header.contains("version")) {
        throw DataError("checkpoint '" + path.string() + "' missing mandatory version field");
    }
    Checkpoint ckp;
    ckp.version = header.at("version").get<int>();
    if (ckp.version != kCheckpointVersion) {
        throw DataError("checkpoint version " + std::to_string(ckp.version) + " unsupported");
    }
    ckp.dtype = checkpoint_dtype_from_string(header.value("dtype", "f64"));
    ckp.meta = header.value("meta", nlohmann::json::object());

    const char* data = blob.data() + header_start + header_len;
    const std::size_t data_size = blob.size() - header_start - header_len;
    const std::size_t elem_size = ckp.dtype == CheckpointDtype::f64 ? 8 : 4;

    for (const auto& rec : header.value("tensors", nlohmann::json::array())) {
        const auto name = rec.at("name").get<std::string>();
        const auto shape = rec.at("shape").get<Shape>();
        const auto offset = rec.at("offset").get<std::size_t>();
        const auto nbytes = rec.at("nbytes").get<std::size_t>();
        const auto count = static_cast<std::size_t>(shape_numel(shape));
        if (nbytes != count * elem_size || offset + nbytes > data_size) {
            throw DataError("checkpoint tensor '" + name + "' has inconsistent layout");
        }
        std::vector<double> vals(count);
        for (std::size_t i = 0; i < count; ++i) {
            const char* p = data + offset + i * elem_size;
            vals[i] = ckp.dtype == CheckpointDtype::f64
                          ? read_le<double>(p)
                          : static_cast<double>(read_le<float>(p));
        }
        ckp.tensors.push_back({name, Tensor::from_values(shape, std::move(vals))});
    }
    return ckp;
}

}  // namespace ncad
