#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "swe/errors.hpp"

namespace swe {

// The IDX container used by the MNIST distribution. All header words are
// 32-bit big-endian; the payload is raw unsigned bytes in row-major order.
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr int kNumClasses = 10;

// Standard MNIST-convention file names inside a data directory.
inline constexpr const char* kTrainImagesFile = "train-images-idx3-ubyte";
inline constexpr const char* kTrainLabelsFile = "train-labels-idx1-ubyte";
inline constexpr const char* kTestImagesFile = "t10k-images-idx3-ubyte";
inline constexpr const char* kTestLabelsFile = "t10k-labels-idx1-ubyte";

struct RawIdxImages {
    std::uint32_t magic = kIdxImagesMagic;
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols bytes
};

struct RawIdxLabels {
    std::uint32_t magic = kIdxLabelsMagic;
    std::uint32_t count = 0;
    std::vector<std::uint8_t> labels; // count bytes, each in {0..9}
};

inline std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline RawIdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16)
        throw TruncatedFile("IDX image header needs 16 bytes, got " +
                            std::to_string(bytes.size()));
    RawIdxImages out;
    out.magic = read_be32(bytes.data());
    if (out.magic != kIdxImagesMagic)
        throw WrongMagic("expected image magic 0x00000803, got 0x" +
                         [](std::uint32_t m) {
                             char buf[16];
                             std::snprintf(buf, sizeof buf, "%08x", m);
                             return std::string(buf);
                         }(out.magic));
    out.count = read_be32(bytes.data() + 4);
    out.rows = read_be32(bytes.data() + 8);
    out.cols = read_be32(bytes.data() + 12);
    const std::size_t want =
        std::size_t(out.count) * out.rows * out.cols;
    if (bytes.size() - 16 < want)
        throw TruncatedFile("IDX image payload: expected " + std::to_string(want) +
                            " bytes, got " + std::to_string(bytes.size() - 16));
    out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + want);
    return out;
}

inline RawIdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8)
        throw TruncatedFile("IDX label header needs 8 bytes, got " +
                            std::to_string(bytes.size()));
    RawIdxLabels out;
    out.magic = read_be32(bytes.data());
    if (out.magic != kIdxLabelsMagic)
        throw WrongMagic("expected label magic 0x00000801");
    out.count = read_be32(bytes.data() + 4);
    if (bytes.size() - 8 < out.count)
        throw TruncatedFile("IDX label payload: expected " + std::to_string(out.count) +
                            " bytes, got " + std::to_string(bytes.size() - 8));
    out.labels.assign(bytes.begin() + 8, bytes.begin() + 8 + out.count);
    for (std::size_t i = 0; i < out.labels.size(); ++i)
        if (out.labels[i] >= kNumClasses)
            throw LabelOutOfRange("label " + std::to_string(int(out.labels[i])) +
                                  " at index " + std::to_string(i));
    return out;
}

inline std::vector<std::uint8_t> serialize(const RawIdxImages& im) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + im.pixels.size());
    append_be32(out, im.magic);
    append_be32(out, im.count);
    append_be32(out, im.rows);
    append_be32(out, im.cols);
    out.insert(out.end(), im.pixels.begin(), im.pixels.end());
    return out;
}

inline std::vector<std::uint8_t> serialize(const RawIdxLabels& lb) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + lb.labels.size());
    append_be32(out, lb.magic);
    append_be32(out, lb.count);
    out.insert(out.end(), lb.labels.begin(), lb.labels.end());
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("short write to " + path.string());
}

inline RawIdxImages load_idx_images(const std::filesystem::path& path) {
    return parse_idx_images(read_file_bytes(path));
}

inline RawIdxLabels load_idx_labels(const std::filesystem::path& path) {
    return parse_idx_labels(read_file_bytes(path));
}

} // namespace swe
