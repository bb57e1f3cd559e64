#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "swe/dataset.hpp"
#include "swe/idx.hpp"
#include "swe/rng.hpp"

namespace swe {

// Deterministic ten-class glyph dataset in MNIST-shaped IDX files: noisy,
// jittered seven-segment digits on a 28x28 canvas. It stands in for the real
// files when they have not been fetched, keeps the same formats and sizes,
// and is hard enough that trained classifiers disagree across seeds.

// Each sample draws one of two corruption profiles. The easy profile keeps
// training stable; the hard tail caps the reachable score below 1 and makes
// independently seeded members disagree, so the fusion methods can differ.
struct SynthSpec {
    std::size_t train_count = 60000;
    std::size_t test_count = 10000;
    std::uint64_t seed = 99;
    double noise = 0.35;          // background noise amplitude, easy profile
    double glyph_dropout = 0.10;  // glyph pixel erase chance, easy profile
    double hard_fraction = 0.15;  // share of samples drawn from the hard profile
    double hard_noise = 0.60;
    double hard_dropout = 0.22;
    int max_shift = 3;            // glyph translation jitter, pixels
};

namespace detail {

// Segment masks per digit: bits A,B,C,D,E,F,G (seven-segment layout).
enum Segment : unsigned {
    kSegA = 1u << 0, // top bar
    kSegB = 1u << 1, // upper right
    kSegC = 1u << 2, // lower right
    kSegD = 1u << 3, // bottom bar
    kSegE = 1u << 4, // lower left
    kSegF = 1u << 5, // upper left
    kSegG = 1u << 6  // middle bar
};

inline constexpr std::array<unsigned, 10> kDigitSegments = {
    kSegA | kSegB | kSegC | kSegD | kSegE | kSegF,         // 0
    kSegB | kSegC,                                         // 1
    kSegA | kSegB | kSegG | kSegE | kSegD,                 // 2
    kSegA | kSegB | kSegG | kSegC | kSegD,                 // 3
    kSegF | kSegG | kSegB | kSegC,                         // 4
    kSegA | kSegF | kSegG | kSegC | kSegD,                 // 5
    kSegA | kSegF | kSegG | kSegE | kSegD | kSegC,         // 6
    kSegA | kSegB | kSegC,                                 // 7
    kSegA | kSegB | kSegC | kSegD | kSegE | kSegF | kSegG, // 8
    kSegA | kSegB | kSegC | kSegD | kSegF | kSegG          // 9
};

/// Paint one segment into a 28x28 intensity canvas at (dx,dy) offset.
inline void paint_segment(std::array<float, 28 * 28>& img, Segment seg, int dx, int dy) {
    auto bar = [&](int y0, int y1, int x0, int x1) {
        for (int y = y0 + dy; y <= y1 + dy; ++y) {
            if (y < 0 || y >= 28) continue;
            for (int x = x0 + dx; x <= x1 + dx; ++x) {
                if (x < 0 || x >= 28) continue;
                img[std::size_t(y) * 28 + std::size_t(x)] = 1.0f;
            }
        }
    };
    switch (seg) {
        case kSegA: bar(3, 5, 9, 18); break;
        case kSegG: bar(12, 14, 9, 18); break;
        case kSegD: bar(21, 23, 9, 18); break;
        case kSegF: bar(4, 13, 7, 9); break;
        case kSegB: bar(4, 13, 18, 20); break;
        case kSegE: bar(13, 22, 7, 9); break;
        case kSegC: bar(13, 22, 18, 20); break;
    }
}

} // namespace detail

/// Generate `count` labeled glyph images from one seeded stream.
inline std::pair<RawIdxImages, RawIdxLabels> generate_synth(std::size_t count,
                                                            std::uint64_t seed,
                                                            const SynthSpec& spec = {}) {
    RawIdxImages images;
    images.count = static_cast<std::uint32_t>(count);
    images.rows = 28;
    images.cols = 28;
    images.pixels.resize(count * 28 * 28);
    RawIdxLabels labels;
    labels.count = static_cast<std::uint32_t>(count);
    labels.labels.resize(count);

    Xorshift64Star rng(seed);
    std::array<float, 28 * 28> canvas{};
    for (std::size_t i = 0; i < count; ++i) {
        const int digit = static_cast<int>(rng.next_below(10));
        labels.labels[i] = static_cast<std::uint8_t>(digit);

        canvas.fill(0.0f);
        const bool hard = rng.next_double() < spec.hard_fraction;
        const double noise = hard ? spec.hard_noise : spec.noise;
        const double dropout = hard ? spec.hard_dropout : spec.glyph_dropout;
        const int dx = static_cast<int>(rng.next_below(2 * spec.max_shift + 1)) - spec.max_shift;
        const int dy = static_cast<int>(rng.next_below(2 * spec.max_shift + 1)) - spec.max_shift;
        const unsigned segs = detail::kDigitSegments[std::size_t(digit)];
        for (unsigned bit = 0; bit < 7; ++bit)
            if (segs & (1u << bit))
                detail::paint_segment(canvas, detail::Segment(1u << bit), dx, dy);

        const double intensity = rng.next_double(0.55, 1.0);
        std::uint8_t* out = images.pixels.data() + i * 28 * 28;
        for (std::size_t p = 0; p < 28 * 28; ++p) {
            double v = 0.0;
            if (canvas[p] > 0.0f) {
                const bool dropped = rng.next_double() < dropout;
                if (!dropped) v = intensity * (1.0 - 0.35 * rng.next_double());
            }
            v += noise * rng.next_double();
            if (v > 1.0) v = 1.0;
            out[p] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
        }
    }
    return {std::move(images), std::move(labels)};
}

/// Write the four MNIST-convention files into `dir`. Train and test come from
/// independent derived streams of spec.seed.
inline void write_synth_dataset(const std::filesystem::path& dir, const SynthSpec& spec = {}) {
    std::filesystem::create_directories(dir);
    auto [train_images, train_labels] =
        generate_synth(spec.train_count, combine64(spec.seed, 0), spec);
    auto [test_images, test_labels] =
        generate_synth(spec.test_count, combine64(spec.seed, 1), spec);
    write_file_bytes(dir / kTrainImagesFile, serialize(train_images));
    write_file_bytes(dir / kTrainLabelsFile, serialize(train_labels));
    write_file_bytes(dir / kTestImagesFile, serialize(test_images));
    write_file_bytes(dir / kTestLabelsFile, serialize(test_labels));
}

} // namespace swe
