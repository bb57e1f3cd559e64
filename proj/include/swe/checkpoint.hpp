#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "swe/errors.hpp"
#include "swe/network.hpp"

namespace swe {

// Model checkpoint container ("SWENET01"). Layout, in file order:
//   bytes 0..7   magic "SWENET01"
//   bytes 8..11  header length H as little-endian uint32
//   bytes 12..   H bytes of UTF-8 JSON: arch spec, sgd hyperparameters,
//                training seed, and the tensor directory (name, shape, kind)
//   then         for each directory entry in order, shape-product values as
//                little-endian IEEE-754 float64
inline constexpr char kCheckpointMagic[8] = {'S', 'W', 'E', 'N', 'E', 'T', '0', '1'};

inline nlohmann::json arch_to_json(const ArchSpec& a) {
    return {{"variant", to_string(a.variant)},
            {"channels", a.channels},
            {"classifier_width", a.classifier_width},
            {"kernel", a.kernel}};
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
    ArchSpec a;
    a.variant = parse_variant(j.at("variant").get<std::string>());
    auto ch = j.at("channels").get<std::vector<std::size_t>>();
    if (ch.size() != 3) throw MalformedCheckpoint("expected 3 channel widths");
    std::copy(ch.begin(), ch.end(), a.channels.begin());
    a.classifier_width = j.at("classifier_width").get<std::size_t>();
    a.kernel = j.at("kernel").get<std::size_t>();
    return a;
}

inline nlohmann::json sgd_to_json(const SgdConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed}};
}

inline SgdConfig sgd_from_json(const nlohmann::json& j) {
    SgdConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace detail {

inline void append_f64le(std::vector<std::uint8_t>& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double read_f64le(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

template <typename T>
struct TensorEntry {
    std::string name;
    Tensor<T>* tensor;
    const char* kind;
};

template <typename T>
std::vector<TensorEntry<T>> checkpoint_tensors(Network<T>& net) {
    std::vector<TensorEntry<T>> out;
    for (auto& l : net.layers()) {
        for (ParamView<T> p : l->params()) out.push_back({p.name, p.value, "param"});
        for (BufferView<T> b : l->buffers()) out.push_back({b.name, b.value, "buffer"});
    }
    return out;
}

} // namespace detail

template <typename T>
void save_checkpoint(Network<T>& net, const SgdConfig& sgd,
                     const std::filesystem::path& path) {
    auto entries = detail::checkpoint_tensors(net);
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& e : entries)
        dir.push_back({{"name", e.name}, {"shape", e.tensor->shape()}, {"kind", e.kind}});
    nlohmann::json header = {{"version", 1},
                             {"arch", arch_to_json(net.arch())},
                             {"sgd", sgd_to_json(sgd)},
                             {"seed", net.init_seed()},
                             {"tensors", dir}};
    const std::string hs = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kCheckpointMagic, kCheckpointMagic + 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    for (int i = 0; i < 4; ++i)
        bytes.push_back(static_cast<std::uint8_t>(hlen >> (8 * i)));
    bytes.insert(bytes.end(), hs.begin(), hs.end());
    for (const auto& e : entries)
        for (std::size_t i = 0; i < e.tensor->size(); ++i)
            detail::append_f64le(bytes, double((*e.tensor)[i]));
    write_file_bytes(path, bytes);
}

template <typename T = float>
struct LoadedCheckpoint {
    Network<T> net;
    SgdConfig sgd;
};

template <typename T = float>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw MalformedCheckpoint(path.string() + ": bad magic");
    std::uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= std::uint32_t(bytes[8 + i]) << (8 * i);
    if (bytes.size() < 12 + std::size_t(hlen))
        throw MalformedCheckpoint(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedCheckpoint(path.string() + ": " + e.what());
    }

    LoadedCheckpoint<T> out;
    try {
        const ArchSpec arch = arch_from_json(header.at("arch"));
        out.sgd = sgd_from_json(header.at("sgd"));
        const std::uint64_t seed = header.at("seed").get<std::uint64_t>();
        out.net = build<T>(arch, seed);

        auto entries = detail::checkpoint_tensors(out.net);
        std::map<std::string, Tensor<T>*> by_name;
        for (auto& e : entries) by_name[e.name] = e.tensor;

        std::size_t offset = 12 + hlen;
        for (const auto& d : header.at("tensors")) {
            const std::string name = d.at("name").get<std::string>();
            const auto shape = d.at("shape").get<std::vector<std::size_t>>();
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw MalformedCheckpoint("unknown tensor '" + name + "'");
            if (it->second->shape() != shape)
                throw MalformedCheckpoint("shape mismatch for '" + name + "'");
            const std::size_t n = it->second->size();
            if (bytes.size() < offset + 8 * n)
                throw MalformedCheckpoint(path.string() + ": truncated payload");
            for (std::size_t i = 0; i < n; ++i)
                (*it->second)[i] = static_cast<T>(detail::read_f64le(bytes.data() + offset + 8 * i));
            offset += 8 * n;
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedCheckpoint(path.string() + ": " + e.what());
    }
    out.net.set_mode(Mode::Infer);
    return out;
}

} // namespace swe
