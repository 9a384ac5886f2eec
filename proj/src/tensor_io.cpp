#include "zeresfdg/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

std::filesystem::path sidecar_path(const std::filesystem::path& raw_path) {
    std::filesystem::path p = raw_path;
    p.replace_extension(".json");
    return p;
}

void save_tensor(const Tensor4& t, const std::filesystem::path& raw_path) {
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) {
        throw ConfigError("cannot open " + raw_path.string() + " for writing");
    }
    std::vector<unsigned char> bytes(t.data.size() * 4);
    for (size_t i = 0; i < t.data.size(); i++) {
        uint32_t u = std::bit_cast<uint32_t>(t.data[i]);
        bytes[4 * i + 0] = static_cast<unsigned char>(u);
        bytes[4 * i + 1] = static_cast<unsigned char>(u >> 8);
        bytes[4 * i + 2] = static_cast<unsigned char>(u >> 16);
        bytes[4 * i + 3] = static_cast<unsigned char>(u >> 24);
    }
    raw.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!raw) {
        throw ConfigError("short write to " + raw_path.string());
    }

    nlohmann::json sidecar;
    sidecar["shape"] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    std::ofstream meta(sidecar_path(raw_path));
    if (!meta) {
        throw ConfigError("cannot open " + sidecar_path(raw_path).string() + " for writing");
    }
    meta << sidecar.dump() << "\n";
}

Tensor4 load_tensor(const std::filesystem::path& raw_path) {
    std::ifstream meta(sidecar_path(raw_path));
    if (!meta) {
        throw ConfigError("missing tensor sidecar " + sidecar_path(raw_path).string());
    }
    nlohmann::json sidecar;
    try {
        meta >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad tensor sidecar " + sidecar_path(raw_path).string() + ": " + e.what());
    }
    if (!sidecar.contains("shape") || !sidecar["shape"].is_array() || sidecar["shape"].size() != 4) {
        throw ConfigError("tensor sidecar " + sidecar_path(raw_path).string() +
                          " must contain \"shape\":[n,c,h,w]");
    }
    Shape4 shape{sidecar["shape"][0].get<int64_t>(), sidecar["shape"][1].get<int64_t>(),
                 sidecar["shape"][2].get<int64_t>(), sidecar["shape"][3].get<int64_t>()};
    if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
        throw ConfigError("tensor sidecar " + sidecar_path(raw_path).string() +
                          " has non-positive shape " + shape.str());
    }

    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) {
        throw ConfigError("cannot open " + raw_path.string());
    }
    std::vector<unsigned char> bytes(static_cast<size_t>(shape.elements()) * 4);
    raw.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (raw.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw ConfigError(raw_path.string() + " holds fewer values than shape " + shape.str());
    }
    char extra;
    if (raw.read(&extra, 1)) {
        throw ConfigError(raw_path.string() + " holds more values than shape " + shape.str());
    }
    std::vector<float> values(static_cast<size_t>(shape.elements()));
    for (size_t i = 0; i < values.size(); i++) {
        uint32_t u = static_cast<uint32_t>(bytes[4 * i + 0]) |
                     (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                     (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                     (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
        values[i] = std::bit_cast<float>(u);
    }
    return Tensor4(shape, std::move(values));
}

}  // namespace zeresfdg
