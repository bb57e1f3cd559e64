#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "swe/dataset.hpp"

using namespace swe;

namespace {

/// Tiny labeled file pair where sample i is identifiable: its first pixel
/// byte equals i and its label equals i % 10.
std::pair<RawIdxImages, RawIdxLabels> tagged_data(std::uint32_t count) {
    RawIdxImages im;
    im.count = count;
    im.rows = kImageSide;
    im.cols = kImageSide;
    im.pixels.assign(std::size_t(count) * kImageSide * kImageSide, 0);
    RawIdxLabels lb;
    lb.count = count;
    lb.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        im.pixels[std::size_t(i) * kImageSide * kImageSide] = std::uint8_t(i);
        lb.labels[i] = std::uint8_t(i % 10);
    }
    return {im, lb};
}

int sample_tag(const Dataset& ds, std::size_t i) {
    return int(std::lround(ds.images.data()[i * kImageSide * kImageSide] * 255.0f));
}

} // namespace

TEST(MakeSplits, SizesAndDisjointness) {
    auto [im, lb] = tagged_data(100);
    SplitSpec spec{.train_count = 50, .validation_count = 20, .test_count = 0, .seed = 7};
    auto [train, val] = make_splits(im, lb, spec);
    EXPECT_EQ(train.size(), 50u);
    EXPECT_EQ(val.size(), 20u);
    EXPECT_EQ(train.split, SplitKind::Train);
    EXPECT_EQ(val.split, SplitKind::Validation);

    std::set<int> train_ids, val_ids;
    for (std::size_t i = 0; i < train.size(); ++i) train_ids.insert(sample_tag(train, i));
    for (std::size_t i = 0; i < val.size(); ++i) val_ids.insert(sample_tag(val, i));
    EXPECT_EQ(train_ids.size(), 50u);
    EXPECT_EQ(val_ids.size(), 20u);
    for (int id : val_ids) EXPECT_FALSE(train_ids.count(id));
}

TEST(MakeSplits, EmptyValidationAllowed) {
    auto [im, lb] = tagged_data(30);
    SplitSpec spec{.train_count = 30, .validation_count = 0, .test_count = 0, .seed = 1};
    auto [train, val] = make_splits(im, lb, spec);
    EXPECT_EQ(train.size(), 30u);
    EXPECT_EQ(val.size(), 0u);
}

TEST(MakeSplits, DeterministicForSeed) {
    auto [im, lb] = tagged_data(64);
    SplitSpec spec{.train_count = 40, .validation_count = 24, .test_count = 0, .seed = 9};
    auto [t1, v1] = make_splits(im, lb, spec);
    auto [t2, v2] = make_splits(im, lb, spec);
    EXPECT_TRUE(t1.images == t2.images);
    EXPECT_EQ(t1.labels, t2.labels);
    EXPECT_TRUE(v1.images == v2.images);
    EXPECT_EQ(v1.labels, v2.labels);

    spec.seed = 10;
    auto [t3, v3] = make_splits(im, lb, spec);
    EXPECT_FALSE(t1.images == t3.images);
}

TEST(MakeSplits, RejectsOversizedSpec) {
    auto [im, lb] = tagged_data(10);
    SplitSpec spec{.train_count = 8, .validation_count = 3, .test_count = 0, .seed = 1};
    EXPECT_THROW(make_splits(im, lb, spec), SpecTooLarge);
}

TEST(MakeSplits, RejectsCountMismatch) {
    auto [im, lb] = tagged_data(10);
    lb.count = 9;
    lb.labels.resize(9);
    SplitSpec spec{.train_count = 5, .validation_count = 2, .test_count = 0, .seed = 1};
    EXPECT_THROW(make_splits(im, lb, spec), LengthMismatch);
}

TEST(MakeSplits, NormalizesTo01WithExactTop) {
    RawIdxImages im;
    im.count = 1;
    im.rows = kImageSide;
    im.cols = kImageSide;
    im.pixels.assign(kImageSide * kImageSide, 0);
    im.pixels[0] = 255;
    im.pixels[1] = 128;
    RawIdxLabels lb;
    lb.count = 1;
    lb.labels = {3};
    SplitSpec spec{.train_count = 1, .validation_count = 0, .test_count = 0, .seed = 1};
    auto [train, val] = make_splits(im, lb, spec);
    EXPECT_EQ(train.images.data()[0], 1.0f);
    float lo = 1.0f, hi = 0.0f;
    for (float v : train.images.flat()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.0f);
    EXPECT_LE(hi, 1.0f);
}

TEST(MakeTestSet, SeededSubset) {
    auto [im, lb] = tagged_data(50);
    SplitSpec spec{.train_count = 0, .validation_count = 0, .test_count = 20, .seed = 4};
    Dataset test = make_test_set(im, lb, spec);
    EXPECT_EQ(test.size(), 20u);
    EXPECT_EQ(test.split, SplitKind::Test);
    Dataset again = make_test_set(im, lb, spec);
    EXPECT_TRUE(test.images == again.images);
}

TEST(BatchIterator, BatchSizes) {
    auto [im, lb] = tagged_data(10);
    SplitSpec spec{.train_count = 10, .validation_count = 0, .test_count = 0, .seed = 1};
    auto [train, val] = make_splits(im, lb, spec);
    BatchIterator<float> it(train, 4, 11);
    std::vector<std::size_t> sizes;
    while (auto b = it.next()) sizes.push_back(b->labels.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
}

TEST(BatchIterator, EpochCoversEverySampleOnce) {
    auto [im, lb] = tagged_data(37);
    SplitSpec spec{.train_count = 37, .validation_count = 0, .test_count = 0, .seed = 2};
    auto [train, val] = make_splits(im, lb, spec);
    for (std::uint64_t epoch : {0ull, 1ull, 5ull}) {
        BatchIterator<float> it(train, 5, 123);
        it.begin_epoch(epoch);
        std::multiset<int> seen;
        while (auto b = it.next())
            for (std::size_t i = 0; i < b->labels.size(); ++i)
                seen.insert(int(std::lround(b->images.data()[i * kImageSide * kImageSide] * 255.0f)));
        std::multiset<int> want;
        for (std::size_t i = 0; i < train.size(); ++i) want.insert(sample_tag(train, i));
        EXPECT_EQ(seen, want) << "epoch " << epoch;
    }
}

TEST(BatchIterator, SameSeedSameBatches) {
    auto [im, lb] = tagged_data(26);
    SplitSpec spec{.train_count = 26, .validation_count = 0, .test_count = 0, .seed = 3};
    auto [train, val] = make_splits(im, lb, spec);
    BatchIterator<float> a(train, 8, 77), b(train, 8, 77);
    a.begin_epoch(4);
    b.begin_epoch(4);
    while (true) {
        auto ba = a.next();
        auto bb = b.next();
        EXPECT_EQ(bool(ba), bool(bb));
        if (!ba) break;
        EXPECT_TRUE(ba->images == bb->images);
        EXPECT_EQ(ba->labels, bb->labels);
    }
}

TEST(BatchIterator, DifferentEpochsShuffleDifferently) {
    auto [im, lb] = tagged_data(64);
    SplitSpec spec{.train_count = 64, .validation_count = 0, .test_count = 0, .seed = 3};
    auto [train, val] = make_splits(im, lb, spec);
    BatchIterator<float> it(train, 64, 5);
    it.begin_epoch(0);
    auto e0 = it.next()->labels;
    it.begin_epoch(1);
    auto e1 = it.next()->labels;
    EXPECT_NE(e0, e1);
}

TEST(OneHot, EncodesAndValidates) {
    std::vector<int> labels{0, 9, 3};
    Tensor<float> oh = one_hot<float>(labels);
    EXPECT_EQ(oh.shape(), (std::vector<std::size_t>{3, 10}));
    EXPECT_EQ(oh(0, 0), 1.0f);
    EXPECT_EQ(oh(1, 9), 1.0f);
    EXPECT_EQ(oh(2, 3), 1.0f);
    float sum = 0;
    for (float v : oh.flat()) sum += v;
    EXPECT_EQ(sum, 3.0f);
    std::vector<int> bad{10};
    EXPECT_THROW(one_hot<float>(bad), ClassOutOfRange);
}
