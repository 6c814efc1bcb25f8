#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/bitstring.hpp"
#include "ganmark/losses.hpp"
#include "ganmark/metrics.hpp"
#include "ganmark/nn.hpp"
#include "ganmark/rng.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark {

struct CodecConfig {
    int image_size = 32;
    int channels = 3;
    int payload = 50;
    double lambda_weight = 1.0;
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    double residual_scale = 0.25;   // bound on the embedding residual amplitude
    double holdout_fraction = 0.1;
    int hidden_channels = 16;
    int payload_channels = 2;  // spatial payload planes concatenated to the image

    void validate() const {
        if (payload <= 0) throw std::invalid_argument("CodecConfig: payload must be positive");
        if (lambda_weight < 0)
            throw std::invalid_argument("CodecConfig: lambda must be nonnegative");
        if (image_size < 8 || image_size % 8 != 0)
            throw std::invalid_argument("CodecConfig: image size must be a positive multiple of 8");
        if (channels != 3) throw std::invalid_argument("CodecConfig: expected 3 channels");
        if (epochs < 0 || batch_size <= 0 || learning_rate <= 0)
            throw std::invalid_argument("CodecConfig: bad training recipe");
        if (optimizer != "adam") throw std::invalid_argument("CodecConfig: unknown optimizer");
    }
};

struct CodecMetrics {
    double mse = 0, bit_accuracy = 0, psnr = 0, ssim = 0;
    double final_loss = 0;
};

// Stack per-image CHW tensors into an NCHW batch.
template <class T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& images, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("stack_batch: empty selection");
    const auto& s = images.at(static_cast<size_t>(idx[0])).shape;
    Tensor<T> out({static_cast<int>(idx.size()), s[0], s[1], s[2]});
    int64_t per = Tensor<T>::numel_of(s);
    for (size_t b = 0; b < idx.size(); ++b) {
        const auto& img = images.at(static_cast<size_t>(idx[b]));
        if (img.shape != s) throw std::invalid_argument("stack_batch: heterogeneous shapes");
        std::copy_n(img.ptr(), per, out.ptr() + static_cast<int64_t>(b) * per);
    }
    return out;
}

template <class T>
Tensor<T> bits_to_tensor(const std::vector<BitString>& ws) {
    int n = ws.at(0).length();
    Tensor<T> out({static_cast<int>(ws.size()), n});
    for (size_t b = 0; b < ws.size(); ++b)
        for (int i = 0; i < n; ++i) out.data[b * n + i] = static_cast<T>(ws[b].bit(i));
    return out;
}

// Embeds a payload into an image as a bounded residual: the payload is
// projected to spatial planes, concatenated with the image, run through a
// small conv stack, and the result added as residual_scale * tanh(r).
template <class T>
class Encoder {
public:
    Encoder(const CodecConfig& cfg, Rng& rng)
        : cfg_(cfg),
          proj_(cfg.payload, cfg.payload_channels * cfg.image_size * cfg.image_size, rng) {
        const int hc = cfg.hidden_channels;
        body_.template add<nn::Conv2d<T>>(3 + cfg.payload_channels, hc, 3, 1, 1, rng);
        body_.template add<nn::LeakyReLU<T>>(T(0.2));
        body_.template add<nn::Conv2d<T>>(hc, hc, 3, 1, 1, rng);
        body_.template add<nn::LeakyReLU<T>>(T(0.2));
        body_.template add<nn::Conv2d<T>>(hc, 3, 3, 1, 1, rng);
    }

    // x: [B,3,S,S] in [0,1]; bits: [B,N] in {0,1}
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& bits) {
        const int S = cfg_.image_size;
        if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != S || x.dim(3) != S)
            throw std::invalid_argument("Encoder: bad image batch shape");
        if (bits.rank() != 2 || bits.dim(1) != cfg_.payload)
            throw std::invalid_argument("Encoder: payload length mismatch");
        if (bits.dim(0) != x.dim(0))
            throw std::invalid_argument("Encoder: batch size mismatch");
        const int B = x.dim(0), pc = cfg_.payload_channels;
        x_ = x;
        Tensor<T> planes = proj_.forward(bits);  // [B, pc*S*S]
        Tensor<T> cat({B, 3 + pc, S, S});
        for (int b = 0; b < B; ++b) {
            std::copy_n(x.ptr() + static_cast<size_t>(b) * 3 * S * S, 3 * S * S,
                        cat.ptr() + static_cast<size_t>(b) * (3 + pc) * S * S);
            std::copy_n(planes.ptr() + static_cast<size_t>(b) * pc * S * S, pc * S * S,
                        cat.ptr() + static_cast<size_t>(b) * (3 + pc) * S * S + 3 * S * S);
        }
        Tensor<T> res = body_.forward(cat);
        tanh_res_ = res;
        for (auto& v : tanh_res_.data) v = std::tanh(v);
        Tensor<T> y = x;
        for (size_t i = 0; i < y.data.size(); ++i)
            y.data[i] += static_cast<T>(cfg_.residual_scale) * tanh_res_.data[i];
        clamp_mask_.assign(y.data.size(), 1);
        for (size_t i = 0; i < y.data.size(); ++i) {
            if (y.data[i] < T(0)) {
                y.data[i] = T(0);
                clamp_mask_[i] = 0;
            } else if (y.data[i] > T(1)) {
                y.data[i] = T(1);
                clamp_mask_[i] = 0;
            }
        }
        return y;
    }

    // Returns the gradient w.r.t. the cover image.
    Tensor<T> backward(const Tensor<T>& gy) {
        Tensor<T> g = gy;
        for (size_t i = 0; i < g.data.size(); ++i)
            if (!clamp_mask_[i]) g.data[i] = T(0);
        Tensor<T> gres = g;
        for (size_t i = 0; i < gres.data.size(); ++i)
            gres.data[i] *= static_cast<T>(cfg_.residual_scale) *
                            (T(1) - tanh_res_.data[i] * tanh_res_.data[i]);
        Tensor<T> gcat = body_.backward(gres);
        const int B = x_.dim(0), S = cfg_.image_size, pc = cfg_.payload_channels;
        Tensor<T> gx = g;  // skip-connection branch
        Tensor<T> gplanes({B, pc * S * S});
        for (int b = 0; b < B; ++b) {
            const T* src = gcat.ptr() + static_cast<size_t>(b) * (3 + pc) * S * S;
            T* dst = gx.ptr() + static_cast<size_t>(b) * 3 * S * S;
            for (int i = 0; i < 3 * S * S; ++i) dst[i] += src[i];
            std::copy_n(src + 3 * S * S, pc * S * S,
                        gplanes.ptr() + static_cast<size_t>(b) * pc * S * S);
        }
        proj_.backward(gplanes);
        return gx;
    }

    std::vector<nn::Param<T>*> params() {
        auto out = proj_.params();
        auto b = body_.params();
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

    const CodecConfig& config() const { return cfg_; }

private:
    CodecConfig cfg_;
    nn::Linear<T> proj_;
    nn::Sequential<T> body_;
    Tensor<T> x_, tanh_res_;
    std::vector<uint8_t> clamp_mask_;
};

// Strided conv stack ending in a linear head of width N; outputs logits,
// squashed to (0,1) at the decode boundary.
template <class T>
class Decoder {
public:
    Decoder(const CodecConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int hc = cfg.hidden_channels;
        net_.template add<nn::Conv2d<T>>(3, hc, 3, 2, 1, rng);
        net_.template add<nn::LeakyReLU<T>>(T(0.2));
        net_.template add<nn::Conv2d<T>>(hc, 2 * hc, 3, 2, 1, rng);
        net_.template add<nn::LeakyReLU<T>>(T(0.2));
        net_.template add<nn::Conv2d<T>>(2 * hc, 4 * hc, 3, 2, 1, rng);
        net_.template add<nn::LeakyReLU<T>>(T(0.2));
        net_.template add<nn::Flatten<T>>();
        int feat = 4 * hc * (cfg.image_size / 8) * (cfg.image_size / 8);
        net_.template add<nn::Linear<T>>(feat, cfg.payload, rng);
    }

    Tensor<T> forward_logits(const Tensor<T>& x) {
        const int S = cfg_.image_size;
        if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != S || x.dim(3) != S)
            throw std::invalid_argument("Decoder: bad image batch shape");
        return net_.forward(x);
    }

    Tensor<T> backward(const Tensor<T>& glogits) { return net_.backward(glogits); }

    // Single-image decode to per-bit probabilities.
    SoftBits decode(const Tensor<T>& img) {
        if (img.rank() != 3) throw std::invalid_argument("Decoder: expected CHW image");
        Tensor<T> batch({1, img.dim(0), img.dim(1), img.dim(2)});
        std::copy_n(img.ptr(), img.numel(), batch.ptr());
        Tensor<T> logits = forward_logits(batch);
        std::vector<double> p(static_cast<size_t>(cfg_.payload));
        for (int i = 0; i < cfg_.payload; ++i)
            p[static_cast<size_t>(i)] =
                clamp_prob(1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i]))));
        return SoftBits(std::move(p));
    }

    std::vector<nn::Param<T>*> params() { return net_.params(); }
    const CodecConfig& config() const { return cfg_; }

    uint64_t param_hash() {
        uint64_t h = 1469598103934665603ull;
        for (auto* p : net_.params()) h = tensor_hash(p->value, h);
        return h;
    }

private:
    CodecConfig cfg_;
    nn::Sequential<T> net_;
};

// Immutable view of a trained decoder: gradients flow through it to its
// input, but its parameters can never be updated.
template <class T>
class FrozenDecoder {
public:
    explicit FrozenDecoder(std::unique_ptr<Decoder<T>> dec)
        : dec_(std::move(dec)), hash_(dec_->param_hash()) {}

    Tensor<T> forward_logits(const Tensor<T>& x) { return dec_->forward_logits(x); }

    Tensor<T> backward_to_input(const Tensor<T>& glogits) {
        Tensor<T> gx = dec_->backward(glogits);
        nn::zero_grads(dec_->params());  // accumulated but never applied
        return gx;
    }

    SoftBits decode(const Tensor<T>& img) { return dec_->decode(img); }

    std::vector<nn::Param<T>*> params() {
        throw std::logic_error("FrozenDecoder: parameters are frozen and not updatable");
    }

    uint64_t param_hash() const { return hash_; }

    void check_unchanged() const {
        if (dec_->param_hash() != hash_)
            throw std::runtime_error("FrozenDecoder: parameter hash changed");
    }

    const CodecConfig& config() const { return dec_->config(); }
    Decoder<T>& inner() { return *dec_; }

private:
    std::unique_ptr<Decoder<T>> dec_;
    uint64_t hash_;
};

template <class T>
struct Codec {
    std::unique_ptr<Encoder<T>> encoder;
    std::unique_ptr<Decoder<T>> decoder;
    CodecConfig config;
};

template <class T>
Codec<T> build_codec(const CodecConfig& cfg, Rng& rng) {
    cfg.validate();
    Codec<T> c;
    c.config = cfg;
    c.encoder = std::make_unique<Encoder<T>>(cfg, rng);
    c.decoder = std::make_unique<Decoder<T>>(cfg, rng);
    return c;
}

// Single-image encode.
template <class T>
Tensor<T> encode(Encoder<T>& enc, const Tensor<T>& img, const BitString& w) {
    if (w.length() != enc.config().payload)
        throw std::invalid_argument("encode: payload length mismatch");
    Tensor<T> batch({1, img.dim(0), img.dim(1), img.dim(2)});
    std::copy_n(img.ptr(), img.numel(), batch.ptr());
    Tensor<T> bits = bits_to_tensor<T>({w});
    Tensor<T> out = enc.forward(batch, bits);
    Tensor<T> y({img.dim(0), img.dim(1), img.dim(2)});
    std::copy_n(out.ptr(), y.numel(), y.ptr());
    return y;
}

template <class T>
struct CodecCheckpoint {
    Codec<T> codec;
    CodecMetrics metrics;
    bool success = false;
    std::vector<std::pair<int, double>> loss_curve;  // (epoch, mean loss)
};

// Joint encoder/decoder training: MSE(x, E(x,w)) + lambda * BCE(w, D(E(x,w))).
template <class T>
CodecCheckpoint<T> train_codec(const std::vector<Tensor<T>>& dataset, const CodecConfig& cfg,
                               Rng& rng) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_codec: empty dataset");
    for (const auto& img : dataset)
        if (img.rank() != 3 || img.dim(1) != cfg.image_size || img.dim(2) != cfg.image_size)
            throw std::invalid_argument("train_codec: dataset image size mismatch");

    CodecCheckpoint<T> ckpt;
    ckpt.codec = build_codec<T>(cfg, rng);
    Encoder<T>& enc = *ckpt.codec.encoder;
    Decoder<T>& dec = *ckpt.codec.decoder;

    int holdout = std::max(1, static_cast<int>(dataset.size() * cfg.holdout_fraction));
    holdout = std::min<int>(holdout, static_cast<int>(dataset.size()) - 1);
    if (holdout < 1) holdout = static_cast<int>(dataset.size());  // single-image corner
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    // deterministic shuffle for the split
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);
    std::vector<int> val(order.end() - holdout, order.end());
    std::vector<int> train(order.begin(), order.end() - holdout);
    if (train.empty()) train = val;

    auto all_params = enc.params();
    {
        auto dp = dec.params();
        all_params.insert(all_params.end(), dp.begin(), dp.end());
    }
    nn::Adam<T> opt(all_params, cfg.learning_rate);

    const int N = cfg.payload;
    const int B = std::min<int>(cfg.batch_size, static_cast<int>(train.size()));
    const int iters_per_epoch = std::max<size_t>(1, train.size() / B);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = static_cast<int>(train.size()) - 1; i > 0; --i)
            std::swap(train[i], train[rng.uniform_int(0, i)]);
        double epoch_loss = 0;
        for (int it = 0; it < iters_per_epoch; ++it) {
            std::vector<int> idx(train.begin() + static_cast<size_t>(it) * B,
                                 train.begin() + static_cast<size_t>(it) * B + B);
            Tensor<T> x = stack_batch(dataset, idx);
            std::vector<BitString> ws;
            ws.reserve(static_cast<size_t>(B));
            for (int b = 0; b < B; ++b) ws.push_back(BitString::random(N, rng));
            Tensor<T> bits = bits_to_tensor<T>(ws);

            Tensor<T> xw = enc.forward(x, bits);
            Tensor<T> logits = dec.forward_logits(xw);

            // loss bookkeeping
            double mse_term = 0;
            for (int64_t i2 = 0; i2 < x.numel(); ++i2) {
                double d = static_cast<double>(xw.data[i2]) - static_cast<double>(x.data[i2]);
                mse_term += d * d;
            }
            mse_term /= static_cast<double>(x.numel());
            double bce_term = 0;
            Tensor<T> glogits(logits.shape);
            const double inv_bn = 1.0 / (static_cast<double>(B) * N);
            for (int b = 0; b < B; ++b)
                for (int i2 = 0; i2 < N; ++i2) {
                    double p = 1.0 / (1.0 + std::exp(-static_cast<double>(
                                                logits.data[static_cast<size_t>(b) * N + i2])));
                    double wbit = ws[static_cast<size_t>(b)].bit(i2);
                    bce_term += wbit ? -std::log(clamp_prob(p)) : -std::log(1.0 - clamp_prob(p));
                    glogits.data[static_cast<size_t>(b) * N + i2] =
                        static_cast<T>(cfg.lambda_weight * (p - wbit) * inv_bn);
                }
            bce_term *= inv_bn;
            double loss = mse_term + cfg.lambda_weight * bce_term;
            if (!std::isfinite(loss))
                throw std::runtime_error("train_codec: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;

            opt.zero_grads();
            Tensor<T> gxw = dec.backward(glogits);
            const double mse_scale = 2.0 / static_cast<double>(x.numel());
            for (int64_t i2 = 0; i2 < x.numel(); ++i2)
                gxw.data[i2] += static_cast<T>(
                    mse_scale * (static_cast<double>(xw.data[i2]) - static_cast<double>(x.data[i2])));
            enc.backward(gxw);
            opt.step();
        }
        ckpt.loss_curve.emplace_back(epoch, epoch_loss / iters_per_epoch);
        ckpt.metrics.final_loss = epoch_loss / iters_per_epoch;
    }

    // held-out evaluation
    double acc = 0, psnr_sum = 0, ssim_sum = 0, mse_sum = 0;
    for (int vi : val) {
        const Tensor<T>& img = dataset[static_cast<size_t>(vi)];
        BitString w = BitString::random(N, rng);
        Tensor<T> xw = encode(enc, img, w);
        acc += bit_accuracy(hard_threshold(dec.decode(xw)), w);
        psnr_sum += psnr(img, xw);
        ssim_sum += ssim(img, xw);
        mse_sum += mse(img, xw);
    }
    const double nv = static_cast<double>(val.size());
    ckpt.metrics.bit_accuracy = acc / nv;
    ckpt.metrics.psnr = psnr_sum / nv;
    ckpt.metrics.ssim = ssim_sum / nv;
    ckpt.metrics.mse = mse_sum / nv;
    ckpt.success = ckpt.metrics.bit_accuracy >= 0.99 && ckpt.metrics.psnr >= 30.0;
    return ckpt;
}

}  // namespace ganmark
