#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swe/dataset.hpp"
#include "swe/errors.hpp"
#include "swe/layers.hpp"
#include "swe/rng.hpp"
#include "swe/tensor.hpp"

namespace swe {

enum class Variant { LeNetA, LeNetB, LeNetC };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::LeNetA: return "lenet-a";
        case Variant::LeNetB: return "lenet-b";
        case Variant::LeNetC: return "lenet-c";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "lenet-a" || s == "a" || s == "A") return Variant::LeNetA;
    if (s == "lenet-b" || s == "b" || s == "B") return Variant::LeNetB;
    if (s == "lenet-c" || s == "c" || s == "C") return Variant::LeNetC;
    throw BadConfig("unknown architecture '" + s + "'");
}

/// Architecture template. The three variants share the same three-block
/// feature extractor skeleton with one final fully-connected classifier:
///   lenet-a: {Conv, MP} x 3          lenet-b: {Conv, BN, MP} x 3
///   lenet-c: {Conv, Conv, MP} x 3
/// Convs are 5x5, stride 1, padding 2 by default; pools are 2x2 stride 2;
/// ReLU follows each Conv (after BN in lenet-b).
struct ArchSpec {
    Variant variant = Variant::LeNetA;
    std::array<std::size_t, 3> channels{8, 16, 32};
    std::size_t classifier_width = 10; // output classes
    std::size_t kernel = 5;

    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct SgdConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t epochs = 5;
    std::uint64_t seed = 1;

    friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

/// Ordered layer stack. Copying deep-copies the layers.
template <typename T = float>
class Network {
public:
    Network() = default;

    Network(const Network& other) { *this = other; }
    Network& operator=(const Network& other) {
        if (this == &other) return *this;
        arch_ = other.arch_;
        init_seed_ = other.init_seed_;
        mode_ = other.mode_;
        layers_.clear();
        layers_.reserve(other.layers_.size());
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
        return *this;
    }
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    Mode mode() const { return mode_; }
    void set_mode(Mode m) { mode_ = m; }

    const ArchSpec& arch() const { return arch_; }
    std::uint64_t init_seed() const { return init_seed_; }
    void set_arch(const ArchSpec& spec, std::uint64_t seed) {
        arch_ = spec;
        init_seed_ = seed;
    }

    void add_layer(std::unique_ptr<Layer<T>> l) { layers_.push_back(std::move(l)); }
    const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }
    std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

    /// Class probabilities, [b, classes]; rows sum to 1.
    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> z = logits(x);
        softmax_rows(z);
        return z;
    }

    /// Raw pre-softmax scores.
    Tensor<T> logits(const Tensor<T>& x) {
        Tensor<T> h = x;
        for (auto& l : layers_) h = l->forward(h, mode_);
        return h;
    }

    std::vector<int> predict(const Tensor<T>& x) {
        Tensor<T> z = logits(x);
        std::vector<int> out(z.dim(0));
        const std::size_t k = z.dim(1);
        for (std::size_t i = 0; i < z.dim(0); ++i) {
            const T* row = z.data() + i * k;
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (row[c] > row[best]) best = c;
            out[i] = static_cast<int>(best);
        }
        return out;
    }

    /// Mean cross-entropy over the batch; parameter gradients accumulate into
    /// the layers (call zero_grad() first). Requires Train mode.
    double loss_and_grad(const Tensor<T>& x, std::span<const int> labels) {
        if (mode_ != Mode::Train)
            throw Error("loss_and_grad requires train mode");
        if (x.dim(0) != labels.size())
            throw ShapeMismatch("batch of " + std::to_string(x.dim(0)) + " images vs " +
                                std::to_string(labels.size()) + " labels");
        Tensor<T> z = logits(x);
        const std::size_t b = z.dim(0), k = z.dim(1);

        // softmax + cross-entropy, fused gradient (p - onehot) / b
        Tensor<T> gz({b, k});
        double loss = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const T* row = z.data() + i * k;
            double m = double(row[0]);
            for (std::size_t c = 1; c < k; ++c) m = std::max(m, double(row[c]));
            double denom = 0.0;
            for (std::size_t c = 0; c < k; ++c) denom += std::exp(double(row[c]) - m);
            const int y = labels[i];
            if (y < 0 || std::size_t(y) >= k)
                throw ClassOutOfRange("label " + std::to_string(y));
            loss -= (double(row[std::size_t(y)]) - m) - std::log(denom);
            T* g = gz.data() + i * k;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = std::exp(double(row[c]) - m) / denom;
                g[c] = static_cast<T>((p - (std::size_t(y) == c ? 1.0 : 0.0)) / double(b));
            }
        }
        loss /= double(b);
        if (!std::isfinite(loss)) throw NonFiniteLoss("loss is not finite");

        Tensor<T> g = gz;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(std::move(g));
        return loss;
    }

    void zero_grad() {
        for (auto& l : layers_)
            for (ParamView<T> p : l->params()) p.grad->zero();
    }

    /// Plain SGD update p <- p - lr * g. Running statistics are untouched.
    void sgd_step(double lr) {
        for (auto& l : layers_)
            for (ParamView<T> p : l->params()) {
                T* v = p.value->data();
                const T* g = p.grad->data();
                for (std::size_t i = 0; i < p.value->size(); ++i)
                    v[i] -= static_cast<T>(lr) * g[i];
            }
    }

    std::vector<ParamView<T>> params() {
        std::vector<ParamView<T>> out;
        for (auto& l : layers_)
            for (ParamView<T> p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<BufferView<T>> buffers() {
        std::vector<BufferView<T>> out;
        for (auto& l : layers_)
            for (BufferView<T> b : l->buffers()) out.push_back(b);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto& l : layers_)
            for (ParamView<T> p : l->params()) n += p.value->size();
        return n;
    }

private:
    static void softmax_rows(Tensor<T>& z) {
        const std::size_t b = z.dim(0), k = z.dim(1);
        for (std::size_t i = 0; i < b; ++i) {
            T* row = z.data() + i * k;
            double m = double(row[0]);
            for (std::size_t c = 1; c < k; ++c) m = std::max(m, double(row[c]));
            double denom = 0.0;
            for (std::size_t c = 0; c < k; ++c) denom += std::exp(double(row[c]) - m);
            for (std::size_t c = 0; c < k; ++c)
                row[c] = static_cast<T>(std::exp(double(row[c]) - m) / denom);
        }
    }

    ArchSpec arch_;
    std::uint64_t init_seed_ = 0;
    Mode mode_ = Mode::Train;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Instantiate a variant per the architecture template. Weight tensors are
/// filled in layer order from one xorshift64* stream seeded with mix64(seed),
/// so a (spec, seed) pair fully determines the parameters.
template <typename T = float>
Network<T> build(const ArchSpec& spec, std::uint64_t seed) {
    Network<T> net;
    net.set_arch(spec, seed);
    const std::size_t k = spec.kernel;
    const std::size_t pad = k / 2;
    std::size_t side = kImageSide;
    std::size_t in_ch = kImageChannels;
    for (int blk = 0; blk < 3; ++blk) {
        const std::size_t out_ch = spec.channels[std::size_t(blk)];
        const std::string suffix = std::to_string(blk + 1);
        switch (spec.variant) {
            case Variant::LeNetA:
                net.add_layer(std::make_unique<Conv2d<T>>("conv" + suffix, in_ch, out_ch,
                                                          k, 1, pad, true));
                break;
            case Variant::LeNetB:
                net.add_layer(std::make_unique<Conv2d<T>>("conv" + suffix, in_ch, out_ch,
                                                          k, 1, pad, false));
                net.add_layer(std::make_unique<BatchNorm2d<T>>("bn" + suffix, out_ch, true));
                break;
            case Variant::LeNetC:
                net.add_layer(std::make_unique<Conv2d<T>>("conv" + suffix + "a", in_ch,
                                                          out_ch, k, 1, pad, true));
                net.add_layer(std::make_unique<Conv2d<T>>("conv" + suffix + "b", out_ch,
                                                          out_ch, k, 1, pad, true));
                break;
        }
        net.add_layer(std::make_unique<MaxPool2d<T>>("pool" + suffix, 2, 2));
        side = (side - 2) / 2 + 1;
        in_ch = out_ch;
    }
    net.add_layer(std::make_unique<Flatten<T>>("flatten"));
    net.add_layer(std::make_unique<FullyConnected<T>>("fc", in_ch * side * side,
                                                      spec.classifier_width, false));
    Xorshift64Star rng(mix64(seed));
    for (auto& l : net.layers()) l->init(rng);
    return net;
}

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Minibatch SGD for cfg.epochs epochs. cfg.seed determines both the weight
/// initialization (stream combine64(seed, 0)) and the per-epoch shuffles
/// (stream combine64(seed, 1)); a fixed (spec, dataset, cfg) triple gives
/// bitwise-identical parameters on every run.
template <typename T = float>
Network<T> train(const ArchSpec& spec, const Dataset& train_set, const SgdConfig& cfg,
                 const EpochCallback& on_epoch = {}) {
    if (train_set.size() == 0) throw Error("empty training set");
    Network<T> net = build<T>(spec, combine64(cfg.seed, 0));
    net.set_mode(Mode::Train);
    BatchIterator<T> batches(train_set, cfg.batch_size, combine64(cfg.seed, 1));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        batches.begin_epoch(epoch);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        while (auto batch = batches.next()) {
            net.zero_grad();
            double loss;
            try {
                loss = net.loss_and_grad(batch->images, batch->labels);
            } catch (const NonFiniteLoss&) {
                throw NonFiniteLoss("divergence at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            net.sgd_step(cfg.learning_rate);
            loss_sum += loss;
            ++batch_index;
        }
        if (on_epoch) on_epoch(epoch, loss_sum / double(std::max<std::size_t>(batch_index, 1)));
    }
    return net;
}

} // namespace swe
