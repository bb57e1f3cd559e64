#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "swe/errors.hpp"
#include "swe/gemm.hpp"
#include "swe/rng.hpp"
#include "swe/tensor.hpp"

namespace swe {

enum class Mode { Train, Infer };

enum class LayerKind { Conv, MaxPool, BatchNorm, Flatten, FullyConnected };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "Conv";
        case LayerKind::MaxPool: return "MP";
        case LayerKind::BatchNorm: return "BN";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::FullyConnected: return "FC";
    }
    return "?";
}

template <typename T>
struct ParamView {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

template <typename T>
struct BufferView {
    std::string name;
    Tensor<T>* value;
};

/// One stage of the network. forward() in Train mode caches whatever the
/// matching backward() needs; backward() accumulates parameter gradients and
/// returns the gradient with respect to its input.
template <typename T>
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual LayerKind kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    virtual Tensor<T> backward(Tensor<T> grad_y) = 0;
    virtual void init(Xorshift64Star&) {}
    virtual std::vector<ParamView<T>> params() { return {}; }
    virtual std::vector<BufferView<T>> buffers() { return {}; }
    virtual std::unique_ptr<Layer<T>> clone() const = 0;

protected:
    std::string name_;
};

namespace detail {

/// Seeded fan-scaled uniform draw into `t`, elements in storage order,
/// limit = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_fill(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out,
                 Xorshift64Star& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.next_double(-limit, limit));
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
    T* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = p[i] > T{} ? p[i] : T{};
}

/// Zeroes grad entries where the cached post-activation output is zero.
template <typename T>
void relu_mask(Tensor<T>& grad, const Tensor<T>& out) {
    T* g = grad.data();
    const T* o = out.data();
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (o[i] <= T{}) g[i] = T{};
}

} // namespace detail

/// 2-D convolution (cross-correlation), optionally fused with ReLU.
/// Forward runs one im2col + GEMM per sample.
template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch,
           std::size_t kernel, std::size_t stride, std::size_t pad, bool relu)
        : Layer<T>(std::move(name)), in_ch_(in_ch), out_ch_(out_ch),
          kernel_(kernel), stride_(stride), pad_(pad), relu_(relu),
          weight_(Tensor<T>({out_ch, in_ch, kernel, kernel})),
          bias_(Tensor<T>({out_ch})),
          grad_weight_(Tensor<T>({out_ch, in_ch, kernel, kernel})),
          grad_bias_(Tensor<T>({out_ch})) {}

    LayerKind kind() const override { return LayerKind::Conv; }

    void init(Xorshift64Star& rng) override {
        detail::glorot_fill(weight_, in_ch_ * kernel_ * kernel_,
                            out_ch_ * kernel_ * kernel_, rng);
        bias_.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        check_input(x);
        const std::size_t b = x.dim(0), h = x.dim(2), w = x.dim(3);
        const std::size_t oh = out_extent(h), ow = out_extent(w);
        const std::size_t k2 = in_ch_ * kernel_ * kernel_;
        const std::size_t ohw = oh * ow;

        Tensor<T> y({b, out_ch_, oh, ow});
        const bool training = (mode == Mode::Train);
        if (training) {
            cols_ = Tensor<T>({b, k2, ohw});
            in_h_ = h;
            in_w_ = w;
        }
        std::vector<T> scratch;
        if (!training) scratch.resize(k2 * ohw);

        for (std::size_t n = 0; n < b; ++n) {
            T* col = training ? cols_.data() + n * k2 * ohw : scratch.data();
            im2col(x.data() + n * in_ch_ * h * w, h, w, oh, ow, col);
            T* yn = y.data() + n * out_ch_ * ohw;
            for (std::size_t oc = 0; oc < out_ch_; ++oc)
                std::fill(yn + oc * ohw, yn + (oc + 1) * ohw, bias_[oc]);
            gemm_nn(out_ch_, ohw, k2, weight_.data(), col, yn);
        }
        if (relu_) detail::relu_inplace(y);
        if (training) out_ = y;
        return y;
    }

    Tensor<T> backward(Tensor<T> gy) override {
        const std::size_t b = gy.dim(0);
        const std::size_t oh = gy.dim(2), ow = gy.dim(3);
        const std::size_t ohw = oh * ow;
        const std::size_t k2 = in_ch_ * kernel_ * kernel_;
        if (relu_) detail::relu_mask(gy, out_);

        Tensor<T> gx({b, in_ch_, in_h_, in_w_});
        std::vector<T> gcol(k2 * ohw);
        for (std::size_t n = 0; n < b; ++n) {
            const T* gyn = gy.data() + n * out_ch_ * ohw;
            const T* col = cols_.data() + n * k2 * ohw;
            for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                T acc{};
                const T* g = gyn + oc * ohw;
                for (std::size_t i = 0; i < ohw; ++i) acc += g[i];
                grad_bias_[oc] += acc;
            }
            gemm_nt(out_ch_, k2, ohw, gyn, col, grad_weight_.data());
            std::fill(gcol.begin(), gcol.end(), T{});
            gemm_tn(k2, ohw, out_ch_, weight_.data(), gyn, gcol.data());
            col2im(gcol.data(), in_h_, in_w_, oh, ow,
                   gx.data() + n * in_ch_ * in_h_ * in_w_);
        }
        return gx;
    }

    std::vector<ParamView<T>> params() override {
        return {{this->name_ + ".weight", &weight_, &grad_weight_},
                {this->name_ + ".bias", &bias_, &grad_bias_}};
    }

    std::unique_ptr<Layer<T>> clone() const override {
        return std::make_unique<Conv2d<T>>(*this);
    }

    std::size_t out_extent(std::size_t in) const {
        return (in + 2 * pad_ - kernel_) / stride_ + 1;
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.rank() != 4 || x.dim(1) != in_ch_)
            throw ShapeMismatch(this->name_ + ": expected [b," +
                                std::to_string(in_ch_) + ",h,w], got " + x.shape_str());
        if (x.dim(2) + 2 * pad_ < kernel_ || x.dim(3) + 2 * pad_ < kernel_)
            throw ShapeMismatch(this->name_ + ": input smaller than kernel");
    }

    // col[(ic*k+ky)*k+kx][oy*ow+ox] = x[ic][oy*stride+ky-pad][ox*stride+kx-pad]
    void im2col(const T* x, std::size_t h, std::size_t w,
                std::size_t oh, std::size_t ow, T* col) const {
        const std::ptrdiff_t H = std::ptrdiff_t(h), W = std::ptrdiff_t(w);
        std::size_t r = 0;
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
            const T* plane = x + ic * h * w;
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
                for (std::size_t kx = 0; kx < kernel_; ++kx, ++r) {
                    T* dst = col + r * oh * ow;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(oy * stride_ + ky) - std::ptrdiff_t(pad_);
                        T* d = dst + oy * ow;
                        if (iy < 0 || iy >= H) {
                            std::fill(d, d + ow, T{});
                            continue;
                        }
                        const T* src = plane + std::size_t(iy) * w;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(ox * stride_ + kx) - std::ptrdiff_t(pad_);
                            d[ox] = (ix < 0 || ix >= W) ? T{} : src[ix];
                        }
                    }
                }
            }
        }
    }

    void col2im(const T* col, std::size_t h, std::size_t w,
                std::size_t oh, std::size_t ow, T* x) const {
        const std::ptrdiff_t H = std::ptrdiff_t(h), W = std::ptrdiff_t(w);
        std::size_t r = 0;
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
            T* plane = x + ic * h * w;
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
                for (std::size_t kx = 0; kx < kernel_; ++kx, ++r) {
                    const T* src_row = col + r * oh * ow;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(oy * stride_ + ky) - std::ptrdiff_t(pad_);
                        if (iy < 0 || iy >= H) continue;
                        T* dst = plane + std::size_t(iy) * w;
                        const T* s = src_row + oy * ow;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(ox * stride_ + kx) - std::ptrdiff_t(pad_);
                            if (ix >= 0 && ix < W) dst[std::size_t(ix)] += s[ox];
                        }
                    }
                }
            }
        }
    }

    std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
    bool relu_;
    Tensor<T> weight_, bias_, grad_weight_, grad_bias_;
    // train-mode caches
    Tensor<T> cols_, out_;
    std::size_t in_h_ = 0, in_w_ = 0;
};

/// Max pooling. Gradient routing sends each output gradient to the first
/// maximal input position in row-major window scan order.
template <typename T>
class MaxPool2d final : public Layer<T> {
public:
    MaxPool2d(std::string name, std::size_t pool, std::size_t stride)
        : Layer<T>(std::move(name)), pool_(pool), stride_(stride) {}

    LayerKind kind() const override { return LayerKind::MaxPool; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        if (x.rank() != 4)
            throw ShapeMismatch(this->name_ + ": expected rank-4 input, got " + x.shape_str());
        const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h < pool_ || w < pool_)
            throw ShapeMismatch(this->name_ + ": input smaller than pool window");
        const std::size_t oh = (h - pool_) / stride_ + 1;
        const std::size_t ow = (w - pool_) / stride_ + 1;
        Tensor<T> y({b, c, oh, ow});
        const bool training = (mode == Mode::Train);
        if (training) {
            argmax_.assign(y.size(), 0);
            in_shape_ = {b, c, h, w};
        }
        const T* xp = x.data();
        T* yp = y.data();
        std::size_t o = 0;
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* plane = xp + (n * c + ch) * h * w;
                const std::size_t base = (n * c + ch) * h * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                        const std::size_t y0 = oy * stride_, x0 = ox * stride_;
                        T best = plane[y0 * w + x0];
                        std::size_t best_at = y0 * w + x0;
                        for (std::size_t py = 0; py < pool_; ++py)
                            for (std::size_t px = 0; px < pool_; ++px) {
                                const std::size_t at = (y0 + py) * w + (x0 + px);
                                if (plane[at] > best) {
                                    best = plane[at];
                                    best_at = at;
                                }
                            }
                        yp[o] = best;
                        if (training) argmax_[o] = base + best_at;
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(Tensor<T> gy) override {
        Tensor<T> gx(std::vector<std::size_t>(in_shape_.begin(), in_shape_.end()));
        T* gxp = gx.data();
        const T* gyp = gy.data();
        for (std::size_t o = 0; o < gy.size(); ++o) gxp[argmax_[o]] += gyp[o];
        return gx;
    }

    std::unique_ptr<Layer<T>> clone() const override {
        return std::make_unique<MaxPool2d<T>>(*this);
    }

private:
    std::size_t pool_, stride_;
    std::vector<std::size_t> argmax_;
    std::array<std::size_t, 4> in_shape_{};
};

/// Per-channel batch normalization over (batch, height, width), optionally
/// fused with ReLU. Train mode normalizes by biased batch statistics and
/// updates the running estimates; infer mode uses the running estimates and
/// mutates nothing. Statistics accumulate in double regardless of T.
template <typename T>
class BatchNorm2d final : public Layer<T> {
public:
    BatchNorm2d(std::string name, std::size_t channels, bool relu,
                double eps = 1e-5, double momentum = 0.9)
        : Layer<T>(std::move(name)), channels_(channels), relu_(relu), eps_(eps),
          momentum_(momentum),
          gamma_(Tensor<T>({channels})), beta_(Tensor<T>({channels})),
          grad_gamma_(Tensor<T>({channels})), grad_beta_(Tensor<T>({channels})),
          running_mean_(Tensor<T>({channels})), running_var_(Tensor<T>({channels})) {
        gamma_.fill(T{1});
        running_var_.fill(T{1});
    }

    LayerKind kind() const override { return LayerKind::BatchNorm; }

    void init(Xorshift64Star&) override {
        gamma_.fill(T{1});
        beta_.zero();
        running_mean_.zero();
        running_var_.fill(T{1});
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        if (x.rank() != 4 || x.dim(1) != channels_)
            throw ShapeMismatch(this->name_ + ": expected [b," +
                                std::to_string(channels_) + ",h,w], got " + x.shape_str());
        const std::size_t b = x.dim(0), h = x.dim(2), w = x.dim(3);
        const std::size_t hw = h * w, n = b * hw;
        Tensor<T> y(x.shape());

        if (mode == Mode::Train) {
            xhat_ = Tensor<T>(x.shape());
            inv_std_.resize(channels_);
            count_ = n;
            for (std::size_t c = 0; c < channels_; ++c) {
                double sum = 0.0, sumsq = 0.0;
                for (std::size_t s = 0; s < b; ++s) {
                    const T* p = x.data() + (s * channels_ + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double v = double(p[i]);
                        sum += v;
                        sumsq += v * v;
                    }
                }
                const double mean = sum / double(n);
                double var = sumsq / double(n) - mean * mean;
                if (var < 0.0) var = 0.0;
                const double inv_std = 1.0 / std::sqrt(var + eps_);
                inv_std_[c] = inv_std;
                const double g = double(gamma_[c]), bt = double(beta_[c]);
                for (std::size_t s = 0; s < b; ++s) {
                    const T* p = x.data() + (s * channels_ + c) * hw;
                    T* xh = xhat_.data() + (s * channels_ + c) * hw;
                    T* yo = y.data() + (s * channels_ + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double v = (double(p[i]) - mean) * inv_std;
                        xh[i] = static_cast<T>(v);
                        yo[i] = static_cast<T>(g * v + bt);
                    }
                }
                running_mean_[c] = static_cast<T>(momentum_ * double(running_mean_[c]) +
                                                  (1.0 - momentum_) * mean);
                running_var_[c] = static_cast<T>(momentum_ * double(running_var_[c]) +
                                                 (1.0 - momentum_) * var);
            }
        } else {
            for (std::size_t c = 0; c < channels_; ++c) {
                const double mean = double(running_mean_[c]);
                const double inv_std = 1.0 / std::sqrt(double(running_var_[c]) + eps_);
                const double g = double(gamma_[c]), bt = double(beta_[c]);
                for (std::size_t s = 0; s < b; ++s) {
                    const T* p = x.data() + (s * channels_ + c) * hw;
                    T* yo = y.data() + (s * channels_ + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i)
                        yo[i] = static_cast<T>(g * (double(p[i]) - mean) * inv_std + bt);
                }
            }
        }
        if (relu_) detail::relu_inplace(y);
        if (mode == Mode::Train && relu_) out_ = y;
        return y;
    }

    Tensor<T> backward(Tensor<T> gy) override {
        if (relu_) detail::relu_mask(gy, out_);
        const std::size_t b = gy.dim(0), hw = gy.dim(2) * gy.dim(3);
        const double n = double(count_);
        Tensor<T> gx(gy.shape());
        for (std::size_t c = 0; c < channels_; ++c) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (std::size_t s = 0; s < b; ++s) {
                const T* g = gy.data() + (s * channels_ + c) * hw;
                const T* xh = xhat_.data() + (s * channels_ + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_gy += double(g[i]);
                    sum_gy_xhat += double(g[i]) * double(xh[i]);
                }
            }
            grad_gamma_[c] += static_cast<T>(sum_gy_xhat);
            grad_beta_[c] += static_cast<T>(sum_gy);
            const double scale = double(gamma_[c]) * inv_std_[c];
            const double mean_gy = sum_gy / n;
            const double mean_gy_xhat = sum_gy_xhat / n;
            for (std::size_t s = 0; s < b; ++s) {
                const T* g = gy.data() + (s * channels_ + c) * hw;
                const T* xh = xhat_.data() + (s * channels_ + c) * hw;
                T* out = gx.data() + (s * channels_ + c) * hw;
                for (std::size_t i = 0; i < hw; ++i)
                    out[i] = static_cast<T>(
                        scale * (double(g[i]) - mean_gy - double(xh[i]) * mean_gy_xhat));
            }
        }
        return gx;
    }

    std::vector<ParamView<T>> params() override {
        return {{this->name_ + ".gamma", &gamma_, &grad_gamma_},
                {this->name_ + ".beta", &beta_, &grad_beta_}};
    }

    std::vector<BufferView<T>> buffers() override {
        return {{this->name_ + ".running_mean", &running_mean_},
                {this->name_ + ".running_var", &running_var_}};
    }

    std::unique_ptr<Layer<T>> clone() const override {
        return std::make_unique<BatchNorm2d<T>>(*this);
    }

private:
    std::size_t channels_;
    bool relu_;
    double eps_, momentum_;
    Tensor<T> gamma_, beta_, grad_gamma_, grad_beta_;
    Tensor<T> running_mean_, running_var_;
    // train-mode caches
    Tensor<T> xhat_, out_;
    std::vector<double> inv_std_;
    std::size_t count_ = 0;
};

/// [b, c, h, w] -> [b, c*h*w]
template <typename T>
class Flatten final : public Layer<T> {
public:
    explicit Flatten(std::string name) : Layer<T>(std::move(name)) {}

    LayerKind kind() const override { return LayerKind::Flatten; }

    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        if (x.rank() < 2)
            throw ShapeMismatch(this->name_ + ": expected batched input");
        in_shape_ = x.shape();
        Tensor<T> y = x;
        y.reshape({x.dim(0), x.size() / x.dim(0)});
        return y;
    }

    Tensor<T> backward(Tensor<T> gy) override {
        gy.reshape(in_shape_);
        return gy;
    }

    std::unique_ptr<Layer<T>> clone() const override {
        return std::make_unique<Flatten<T>>(*this);
    }

private:
    std::vector<std::size_t> in_shape_;
};

/// Dense layer y = x W^T + b, optionally fused with ReLU.
template <typename T>
class FullyConnected final : public Layer<T> {
public:
    FullyConnected(std::string name, std::size_t in, std::size_t out, bool relu = false)
        : Layer<T>(std::move(name)), in_(in), out_(out), relu_(relu),
          weight_(Tensor<T>({out, in})), bias_(Tensor<T>({out})),
          grad_weight_(Tensor<T>({out, in})), grad_bias_(Tensor<T>({out})) {}

    LayerKind kind() const override { return LayerKind::FullyConnected; }

    void init(Xorshift64Star& rng) override {
        detail::glorot_fill(weight_, in_, out_, rng);
        bias_.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        if (x.rank() != 2 || x.dim(1) != in_)
            throw ShapeMismatch(this->name_ + ": expected [b," + std::to_string(in_) +
                                "], got " + x.shape_str());
        const std::size_t b = x.dim(0);
        Tensor<T> y({b, out_});
        for (std::size_t i = 0; i < b; ++i)
            std::copy(bias_.data(), bias_.data() + out_, y.data() + i * out_);
        gemm_nt(b, out_, in_, x.data(), weight_.data(), y.data());
        if (relu_) detail::relu_inplace(y);
        if (mode == Mode::Train) {
            x_ = x;
            if (relu_) act_ = y;
        }
        return y;
    }

    Tensor<T> backward(Tensor<T> gy) override {
        if (relu_) detail::relu_mask(gy, act_);
        const std::size_t b = gy.dim(0);
        for (std::size_t i = 0; i < b; ++i) {
            const T* g = gy.data() + i * out_;
            for (std::size_t o = 0; o < out_; ++o) grad_bias_[o] += g[o];
        }
        gemm_tn(out_, in_, b, gy.data(), x_.data(), grad_weight_.data());
        Tensor<T> gx({b, in_});
        gemm_nn(b, in_, out_, gy.data(), weight_.data(), gx.data());
        return gx;
    }

    std::vector<ParamView<T>> params() override {
        return {{this->name_ + ".weight", &weight_, &grad_weight_},
                {this->name_ + ".bias", &bias_, &grad_bias_}};
    }

    std::unique_ptr<Layer<T>> clone() const override {
        return std::make_unique<FullyConnected<T>>(*this);
    }

private:
    std::size_t in_, out_;
    bool relu_;
    Tensor<T> weight_, bias_, grad_weight_, grad_bias_;
    Tensor<T> x_, act_;
};

} // namespace swe
