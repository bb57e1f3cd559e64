#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swe/errors.hpp"
#include "swe/idx.hpp"
#include "swe/rng.hpp"
#include "swe/tensor.hpp"

namespace swe {

constexpr std::size_t kImageSide = 28;
constexpr std::size_t kImageChannels = 1;

enum class SplitKind { Train, Validation, Test };

/// Labeled image collection. Pixels are stored normalized to [0,1]
/// (byte / 255); immutable once built and safe to share across threads.
struct Dataset {
    Tensor<float> images;              // [n, 1, 28, 28]
    std::vector<std::uint8_t> labels;  // class index per sample
    SplitKind split = SplitKind::Train;

    std::size_t size() const { return labels.size(); }
};

struct SplitSpec {
    std::size_t train_count = 50000;
    std::size_t validation_count = 10000;
    std::size_t test_count = 10000;
    std::uint64_t seed = 1;

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

namespace detail {

inline Dataset gather(const RawIdxImages& images, const RawIdxLabels& labels,
                      std::span<const std::uint32_t> indices, SplitKind kind) {
    Dataset ds;
    ds.split = kind;
    ds.images = Tensor<float>({indices.size(), kImageChannels, kImageSide, kImageSide});
    ds.labels.resize(indices.size());
    const std::size_t px = kImageSide * kImageSide;
    float* dst = ds.images.data();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::uint8_t* src = images.pixels.data() + std::size_t(indices[i]) * px;
        for (std::size_t p = 0; p < px; ++p)
            dst[i * px + p] = static_cast<float>(src[p]) * (1.0f / 255.0f);
        ds.labels[i] = labels.labels[indices[i]];
    }
    return ds;
}

inline void check_pair(const RawIdxImages& images, const RawIdxLabels& labels) {
    if (images.count != labels.count)
        throw LengthMismatch("image count " + std::to_string(images.count) +
                             " != label count " + std::to_string(labels.count));
    if (images.rows != kImageSide || images.cols != kImageSide)
        throw ShapeMismatch("expected 28x28 images, got " +
                            std::to_string(images.rows) + "x" + std::to_string(images.cols));
}

} // namespace detail

/// Carve train/validation out of one labeled file via a seeded permutation:
/// the first train_count permuted indices become the train split, the next
/// validation_count the validation split. Permutation seed: combine64(spec.seed, 0).
inline std::pair<Dataset, Dataset> make_splits(const RawIdxImages& images,
                                               const RawIdxLabels& labels,
                                               const SplitSpec& spec) {
    detail::check_pair(images, labels);
    if (spec.train_count + spec.validation_count > images.count)
        throw SpecTooLarge("requested " +
                           std::to_string(spec.train_count + spec.validation_count) +
                           " samples from a file of " + std::to_string(images.count));
    std::vector<std::uint32_t> perm = permutation(images.count, combine64(spec.seed, 0));
    std::span<const std::uint32_t> all(perm);
    Dataset train = detail::gather(images, labels, all.subspan(0, spec.train_count),
                                   SplitKind::Train);
    Dataset val = detail::gather(images, labels,
                                 all.subspan(spec.train_count, spec.validation_count),
                                 SplitKind::Validation);
    return {std::move(train), std::move(val)};
}

/// Test split from the separate test files. When test_count is smaller than
/// the file, a seeded permutation (combine64(spec.seed, 1)) picks the subset.
inline Dataset make_test_set(const RawIdxImages& images, const RawIdxLabels& labels,
                             const SplitSpec& spec) {
    detail::check_pair(images, labels);
    if (spec.test_count > images.count)
        throw SpecTooLarge("requested " + std::to_string(spec.test_count) +
                           " test samples from a file of " + std::to_string(images.count));
    std::vector<std::uint32_t> perm = permutation(images.count, combine64(spec.seed, 1));
    return detail::gather(images, labels,
                          std::span<const std::uint32_t>(perm).subspan(0, spec.test_count),
                          SplitKind::Test);
}

struct DataSplits {
    Dataset train, validation, test;
};

inline DataSplits load_splits(const std::filesystem::path& dir, const SplitSpec& spec) {
    RawIdxImages tri = load_idx_images(dir / kTrainImagesFile);
    RawIdxLabels trl = load_idx_labels(dir / kTrainLabelsFile);
    RawIdxImages tei = load_idx_images(dir / kTestImagesFile);
    RawIdxLabels tel = load_idx_labels(dir / kTestLabelsFile);
    auto [train, val] = make_splits(tri, trl, spec);
    Dataset test = make_test_set(tei, tel, spec);
    return {std::move(train), std::move(val), std::move(test)};
}

/// Serves seeded, shuffled minibatches. Each epoch visits every sample index
/// exactly once; the epoch permutation is a pure function of (seed, epoch)
/// with permutation seed combine64(seed, epoch). Single-owner mutable;
/// independent iterators over one Dataset may run concurrently.
template <typename T = float>
class BatchIterator {
public:
    struct Batch {
        Tensor<T> images;        // [b, 1, 28, 28]
        std::vector<int> labels; // length b
    };

    BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t seed)
        : ds_(&ds), batch_size_(batch_size), seed_(seed) {
        begin_epoch(0);
    }

    void begin_epoch(std::uint64_t epoch) {
        epoch_ = epoch;
        perm_ = permutation(ds_->size(), combine64(seed_, epoch));
        pos_ = 0;
    }

    std::uint64_t epoch() const { return epoch_; }

    /// Next minibatch, or nullopt at end of epoch (the last batch may be short).
    std::optional<Batch> next() {
        if (pos_ >= perm_.size()) return std::nullopt;
        const std::size_t b = std::min(batch_size_, perm_.size() - pos_);
        Batch out;
        out.images = Tensor<T>({b, kImageChannels, kImageSide, kImageSide});
        out.labels.resize(b);
        const std::size_t px = kImageChannels * kImageSide * kImageSide;
        const float* src = ds_->images.data();
        T* dst = out.images.data();
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t s = perm_[pos_ + i];
            for (std::size_t p = 0; p < px; ++p)
                dst[i * px + p] = static_cast<T>(src[s * px + p]);
            out.labels[i] = ds_->labels[s];
        }
        pos_ += b;
        return out;
    }

private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::vector<std::uint32_t> perm_;
    std::size_t pos_ = 0;
};

/// One-hot encoding of class labels, [n, classes].
template <typename T>
Tensor<T> one_hot(std::span<const int> labels, std::size_t classes = kNumClasses) {
    Tensor<T> out({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw ClassOutOfRange("label " + std::to_string(labels[i]));
        out(i, static_cast<std::size_t>(labels[i])) = T{1};
    }
    return out;
}

} // namespace swe
