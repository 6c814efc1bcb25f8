#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/augment.hpp"
#include "ganmark/bitstring.hpp"
#include "ganmark/codec.hpp"
#include "ganmark/gan.hpp"
#include "ganmark/image_io.hpp"
#include "ganmark/losses.hpp"

namespace ganmark {

struct EmbedConfig {
    double gamma = 3.0;  // watermark-loss weight; 0 is the conventional-GAN control
    int finetune_iterations = 2000;
    BitString w_gt;
    bool use_augmentation = false;
    int batch_size = 32;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    int validation_samples = 500;
    int log_every = 25;

    void validate(int payload) const {
        if (gamma < 0) throw std::invalid_argument("EmbedConfig: gamma must be nonnegative");
        if (finetune_iterations < 0 || batch_size <= 0 || validation_samples < 1)
            throw std::invalid_argument("EmbedConfig: bad training recipe");
        if (w_gt.length() != payload)
            throw std::invalid_argument("EmbedConfig: watermark length must match decoder payload");
    }
};

struct EmbedLossRow {
    int iteration;
    double g_loss;
    double watermark_bce;
    double bit_accuracy;  // running, on the training batch
};

template <class T>
struct WatermarkedGanCheckpoint {
    std::unique_ptr<Generator<T>> generator;
    GanConfig gan_config;
    EmbedConfig embed_config;
    uint64_t decoder_hash = 0;  // exact frozen decoder identity used during fine-tuning
    double final_bit_accuracy = 0;
    std::vector<EmbedLossRow> curve;
    std::string status = "initialized";
};

struct ValidationResult {
    double bit_accuracy = 0;
    double drift_mse = -1;  // mean per-pixel distance to the warm-up generator, if measured
};

// Mean bit accuracy of the frozen decoder on fresh latent draws, never seen
// during training. Optionally also reports the pixel drift from a reference
// (warm-up) generator on shared z, as an invisibility proxy.
template <class T>
ValidationResult validate_embedding(Generator<T>& g, FrozenDecoder<T>& dec,
                                    const BitString& w_gt, int num_samples, Rng& rng,
                                    Generator<T>* warmup_reference = nullptr) {
    if (num_samples < 1)
        throw std::invalid_argument("validate_embedding: num_samples must be >= 1");
    ValidationResult res;
    const int chunk = 50;
    double acc = 0, drift = 0;
    int done = 0;
    const int S = g.config().image_size, decS = dec.config().image_size;
    while (done < num_samples) {
        int b = std::min(chunk, num_samples - done);
        Tensor<T> z = sample_latent<T>(g.config().latent, b, rng);
        Tensor<T> imgs = generate(g, z);
        for (int i = 0; i < b; ++i) {
            Tensor<T> img({3, S, S});
            std::copy_n(imgs.ptr() + static_cast<size_t>(i) * 3 * S * S, img.numel(), img.ptr());
            if (S != decS) img = resize_decode_input(img, decS);
            acc += bit_accuracy(hard_threshold(dec.decode(img)), w_gt);
        }
        if (warmup_reference) {
            Tensor<T> ref = generate(*warmup_reference, z);
            for (int64_t i = 0; i < imgs.numel(); ++i) {
                double d = static_cast<double>(imgs.data[i]) - static_cast<double>(ref.data[i]);
                drift += d * d;
            }
        }
        done += b;
    }
    res.bit_accuracy = acc / num_samples;
    if (warmup_reference)
        res.drift_mse = drift / (static_cast<double>(num_samples) * 3 * S * S);
    return res;
}

// Images of other sizes are resized to the decoder's training size before
// decoding (bilinear).
template <class T>
Tensor<T> resize_decode_input(const Tensor<T>& img, int size) {
    return resize_bilinear(img, size);
}

// Fine-tunes a warm-started GAN against a frozen decoder so that every
// generated image carries w_gt. The discriminator keeps training with the
// adversarial loss; the generator loss gains the weighted decoding error,
// with the processing layer on the decoder branch when enabled.
template <class T>
WatermarkedGanCheckpoint<T> finetune(GanCheckpoint<T>& gan, FrozenDecoder<T>& dec,
                                     const std::vector<Tensor<T>>& dataset,
                                     const EmbedConfig& cfg, const AugmentationConfig& aug,
                                     Rng& rng) {
    const GanConfig gcfg = gan.config;
    cfg.validate(dec.config().payload);
    aug.validate();
    if (dataset.empty()) throw std::invalid_argument("finetune: empty dataset");
    if (gcfg.image_size != dec.config().image_size)
        throw std::invalid_argument("finetune: generator/decoder image size mismatch");
    if (!gan.generator || !gan.discriminator)
        throw std::invalid_argument("finetune: GAN checkpoint is incomplete");

    dec.check_unchanged();
    const uint64_t dec_hash_before = dec.param_hash();

    WatermarkedGanCheckpoint<T> out;
    out.gan_config = gcfg;
    out.embed_config = cfg;
    out.decoder_hash = dec_hash_before;
    out.generator = std::move(gan.generator);

    Generator<T>& G = *out.generator;
    Discriminator<T>& D = *gan.discriminator;
    nn::Adam<T> opt_g(G.params(), cfg.lr_g, 0.5);
    nn::Adam<T> opt_d(D.params(), cfg.lr_d, 0.5);
    const int B = cfg.batch_size;
    const int N = dec.config().payload;
    Tensor<T> wbits = bits_to_tensor<T>(std::vector<BitString>{cfg.w_gt});

    for (int it = 0; it < cfg.finetune_iterations; ++it) {
        // --- discriminator step (adversarial loss, unchanged) ---
        std::vector<int> idx(static_cast<size_t>(B));
        for (auto& i : idx) i = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
        Tensor<T> x_real = stack_batch(dataset, idx);
        Tensor<T> z = sample_latent<T>(gcfg.latent, B, rng);
        Tensor<T> x_fake = G.forward(z);

        Tensor<T> lr_logits = D.forward_logits(x_real);
        auto p_real = Discriminator<T>::probs(lr_logits);
        Tensor<T> g_real(lr_logits.shape);
        for (int b = 0; b < B; ++b) g_real.data[b] = static_cast<T>((p_real[b] - 1.0) / B);
        opt_d.zero_grads();
        D.backward(g_real);
        Tensor<T> lf_logits = D.forward_logits(x_fake);
        auto p_fake = Discriminator<T>::probs(lf_logits);
        Tensor<T> g_fake(lf_logits.shape);
        for (int b = 0; b < B; ++b) g_fake.data[b] = static_cast<T>(p_fake[b] / B);
        D.backward(g_fake);
        opt_d.step();

        // --- generator step: adversarial branch + watermark branch ---
        Tensor<T> z2 = sample_latent<T>(gcfg.latent, B, rng);
        Tensor<T> x_g = G.forward(z2);

        Tensor<T> lg_logits = D.forward_logits(x_g);
        auto p_g = Discriminator<T>::probs(lg_logits);
        Tensor<T> g_logit(lg_logits.shape);
        for (int b = 0; b < B; ++b) {
            double d = gcfg.saturating_g_loss ? p_g[b] : p_g[b] - 1.0;
            g_logit.data[b] = static_cast<T>(d / B);
        }
        nn::zero_grads(D.params());
        Tensor<T> gx = D.backward(g_logit);
        double gl = g_loss_from_probs(p_g, gcfg.saturating_g_loss);

        double wm_bce = 0, batch_acc = 0;
        if (cfg.gamma > 0) {
            std::unique_ptr<PipelineApplication<T>> pipe;
            const Tensor<T>* dec_in = &x_g;
            if (cfg.use_augmentation) {
                pipe = std::make_unique<PipelineApplication<T>>(x_g, aug, rng);
                dec_in = &pipe->output();
            }
            Tensor<T> wlogits = dec.forward_logits(*dec_in);
            Tensor<T> gwlogits(wlogits.shape);
            const double inv_bn = 1.0 / (static_cast<double>(B) * N);
            for (int b = 0; b < B; ++b) {
                int match = 0;
                for (int i = 0; i < N; ++i) {
                    double lz = wlogits.data[static_cast<size_t>(b) * N + i];
                    double p = 1.0 / (1.0 + std::exp(-lz));
                    double wbit = cfg.w_gt.bit(i);
                    wm_bce += wbit ? -std::log(clamp_prob(p)) : -std::log(1.0 - clamp_prob(p));
                    gwlogits.data[static_cast<size_t>(b) * N + i] =
                        static_cast<T>(cfg.gamma * (p - wbit) * inv_bn);
                    if ((p >= 0.5) == (wbit > 0.5)) ++match;
                }
                batch_acc += static_cast<double>(match) / N;
            }
            wm_bce *= inv_bn;
            batch_acc /= B;
            Tensor<T> g_dec_in = dec.backward_to_input(gwlogits);
            Tensor<T> g_wm = cfg.use_augmentation ? pipe->backward(g_dec_in) : g_dec_in;
            gx += g_wm;
        }

        if (!std::isfinite(gl) || !std::isfinite(wm_bce))
            throw std::runtime_error("finetune: non-finite loss at iteration " +
                                     std::to_string(it));

        opt_g.zero_grads();
        G.backward(gx);
        opt_g.step();

        if (it % cfg.log_every == 0 || it + 1 == cfg.finetune_iterations)
            out.curve.push_back({it, gl, wm_bce, batch_acc});
    }

    dec.check_unchanged();
    if (dec.param_hash() != dec_hash_before)
        throw std::runtime_error("finetune: frozen decoder hash mismatch");

    Rng val_rng = rng.split(0x76616c69);  // independent validation stream
    out.final_bit_accuracy =
        validate_embedding(G, dec, cfg.w_gt, cfg.validation_samples, val_rng).bit_accuracy;
    out.status = "trained";
    // hand the (still-trained) discriminator back to the caller's checkpoint
    return out;
}

}  // namespace ganmark
