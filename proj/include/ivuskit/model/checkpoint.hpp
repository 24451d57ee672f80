#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivuskit/error.hpp"
#include "ivuskit/model/network.hpp"

namespace ivuskit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

namespace detail {

constexpr char kCheckpointMagic[8] = {'I', 'V', 'K', 'C', 'H', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace detail

// Single-file container: magic, format version, length-prefixed JSON header
// (config + config hash + tensor manifest), then raw float32 blobs in
// manifest order.
inline void save_checkpoint(NestedUNet& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);

    std::vector<nn::ParamRef> all = model.parameters();
    for (auto& s : model.state_buffers()) all.push_back(s);

    nlohmann::json header;
    header["config"] = model_config_to_json(model.config());
    header["config_hash"] = model_config_hash(model.config());
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : all) {
        nlohmann::json t;
        t["name"] = p.name;
        t["count"] = p.values->size();
        tensors.push_back(t);
    }
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    os.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
    detail::write_u32(os, detail::kCheckpointVersion);
    detail::write_u64(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : all)
        os.write(reinterpret_cast<const char*>(p.values->data()),
                 static_cast<std::streamsize>(p.values->size() * sizeof(float)));
    os.flush();
    if (!os) throw IoError("failed while writing checkpoint: " + path);
}

inline NestedUNet load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    char magic[8] = {};
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
        throw IoError("not a checkpoint file: " + path);
    const std::uint32_t version = detail::read_u32(is);
    if (version != detail::kCheckpointVersion)
        throw IoError("unsupported checkpoint version in " + path);
    const std::uint64_t hlen = detail::read_u64(is);
    if (!is || hlen == 0 || hlen > (64ull << 20))
        throw IoError("corrupt checkpoint header in " + path);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw IoError("truncated checkpoint header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("invalid checkpoint header: ") + e.what());
    }

    ModelConfig cfg = model_config_from_json(header.at("config"));
    const std::string stored_hash = header.at("config_hash").get<std::string>();
    if (stored_hash != model_config_hash(cfg))
        throw ValidationError("checkpoint config hash mismatch in " + path);

    NestedUNet model(cfg);
    std::vector<nn::ParamRef> all = model.parameters();
    for (auto& s : model.state_buffers()) all.push_back(s);

    const auto& tensors = header.at("tensors");
    if (tensors.size() != all.size())
        throw ValidationError("checkpoint tensor count does not match model");
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto& t = tensors[k];
        if (t.at("name").get<std::string>() != all[k].name ||
            t.at("count").get<std::uint64_t>() != all[k].values->size())
            throw ValidationError("checkpoint tensor manifest does not match model (" +
                                  all[k].name + ")");
        is.read(reinterpret_cast<char*>(all[k].values->data()),
                static_cast<std::streamsize>(all[k].values->size() * sizeof(float)));
        if (!is) throw IoError("truncated checkpoint data in " + path);
    }
    return model;
}

} // namespace ivuskit
