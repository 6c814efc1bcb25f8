#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/codec.hpp"
#include "ganmark/losses.hpp"
#include "ganmark/nn.hpp"
#include "ganmark/rng.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark {

struct LatentSpec {
    int dim = 64;  // standard normal draws
};

struct GanConfig {
    int image_size = 32;
    int channels = 3;
    LatentSpec latent;
    int batch_size = 32;
    int warmup_iterations = 8000;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    bool saturating_g_loss = false;  // Eq.-literal variant behind this flag
    int log_every = 25;
    int snapshot_every = 500;

    void validate() const {
        if (image_size < 8 || (image_size & (image_size - 1)) != 0 || image_size < 8)
            throw std::invalid_argument("GanConfig: image size must be a power of two >= 8");
        if (channels != 3) throw std::invalid_argument("GanConfig: expected 3 channels");
        if (latent.dim <= 0) throw std::invalid_argument("GanConfig: latent dim must be positive");
        if (batch_size <= 0 || warmup_iterations < 0 || lr_g <= 0 || lr_d <= 0)
            throw std::invalid_argument("GanConfig: bad training recipe");
    }
};

struct GanLossRow {
    int iteration;
    double d_loss;
    double g_loss;
};

template <class T>
Tensor<T> sample_latent(const LatentSpec& spec, int batch, Rng& rng) {
    if (batch < 1) throw std::invalid_argument("sample_latent: batch must be >= 1");
    Tensor<T> z({batch, spec.dim});
    for (auto& v : z.data) v = static_cast<T>(rng.normal());
    return z;
}

// DCGAN-style generator: linear to a 4x4 base, then nearest-upsample + conv
// stages, terminal sigmoid so outputs always lie in [0,1].
template <class T>
class Generator {
public:
    Generator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
        int stages = 0;
        for (int s = 4; s < cfg.image_size; s *= 2) ++stages;
        base_ch_ = 64;
        head_ = std::make_unique<nn::Linear<T>>(cfg.latent.dim, base_ch_ * 4 * 4, rng);
        net_.template add<nn::BatchNorm2d<T>>(base_ch_);
        net_.template add<nn::LeakyReLU<T>>(T(0.2));
        int ch = base_ch_;
        for (int s = 0; s < stages; ++s) {
            int next = std::max(8, ch / 2);
            net_.template add<nn::Upsample2x<T>>();
            net_.template add<nn::Conv2d<T>>(ch, next, 3, 1, 1, rng);
            net_.template add<nn::BatchNorm2d<T>>(next);
            net_.template add<nn::LeakyReLU<T>>(T(0.2));
            ch = next;
        }
        net_.template add<nn::Conv2d<T>>(ch, 3, 3, 1, 1, rng);
        net_.template add<nn::Sigmoid<T>>();
    }

    Tensor<T> forward(const Tensor<T>& z) {
        if (z.rank() != 2 || z.dim(1) != cfg_.latent.dim)
            throw std::invalid_argument("Generator: latent shape mismatch");
        Tensor<T> h = head_->forward(z);
        Tensor<T> grid;
        grid.shape = {z.dim(0), base_ch_, 4, 4};
        grid.data = std::move(h.data);
        return net_.forward(grid);
    }

    Tensor<T> backward(const Tensor<T>& gy) {
        Tensor<T> g = net_.backward(gy);
        Tensor<T> flat;
        flat.shape = {g.dim(0), base_ch_ * 4 * 4};
        flat.data = std::move(g.data);
        return head_->backward(flat);
    }

    std::vector<nn::Param<T>*> params() {
        auto out = head_->params();
        auto b = net_.params();
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

    void set_train(bool t) { net_.set_train(t); }
    const GanConfig& config() const { return cfg_; }

    // BatchNorm running statistics, needed for checkpoint round-trips.
    std::vector<Tensor<T>*> norm_state() {
        std::vector<Tensor<T>*> out;
        for (size_t i = 0; i < net_.size(); ++i)
            if (auto* bn = dynamic_cast<nn::BatchNorm2d<T>*>(net_.at(i))) {
                out.push_back(&bn->running_mean());
                out.push_back(&bn->running_var());
            }
        return out;
    }

    uint64_t param_hash() {
        uint64_t h = 1469598103934665603ull;
        for (auto* p : params()) h = tensor_hash(p->value, h);
        return h;
    }

private:
    GanConfig cfg_;
    int base_ch_;
    std::unique_ptr<nn::Linear<T>> head_;
    nn::Sequential<T> net_;
};

// Strided conv discriminator ending in a single probability logit.
template <class T>
class Discriminator {
public:
    Discriminator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
        int ch = 16, size = cfg.image_size, in = 3;
        while (size > 4) {
            net_.template add<nn::Conv2d<T>>(in, ch, 3, 2, 1, rng);
            net_.template add<nn::LeakyReLU<T>>(T(0.2));
            in = ch;
            ch = std::min(128, ch * 2);
            size /= 2;
        }
        net_.template add<nn::Flatten<T>>();
        net_.template add<nn::Linear<T>>(in * size * size, 1, rng);
    }

    // raw logits, [B,1]
    Tensor<T> forward_logits(const Tensor<T>& x) {
        if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.image_size ||
            x.dim(3) != cfg_.image_size)
            throw std::invalid_argument("Discriminator: bad image batch shape");
        return net_.forward(x);
    }

    Tensor<T> backward(const Tensor<T>& glogits) { return net_.backward(glogits); }

    static std::vector<double> probs(const Tensor<T>& logits) {
        std::vector<double> p(logits.data.size());
        for (size_t i = 0; i < p.size(); ++i)
            p[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i])));
        return p;
    }

    std::vector<nn::Param<T>*> params() { return net_.params(); }
    void set_train(bool t) { net_.set_train(t); }

private:
    GanConfig cfg_;
    nn::Sequential<T> net_;
};

template <class T>
struct GanCheckpoint {
    std::unique_ptr<Generator<T>> generator;
    std::unique_ptr<Discriminator<T>> discriminator;
    GanConfig config;
    int64_t iteration = 0;
    std::vector<GanLossRow> loss_curve;
    std::string status = "initialized";  // initialized | trained | diverged
};

// Deterministic generation from a fixed generator (eval mode).
template <class T>
Tensor<T> generate(Generator<T>& g, const Tensor<T>& z) {
    g.set_train(false);
    Tensor<T> out = g.forward(z);
    g.set_train(true);
    return out;
}

namespace gan_detail {

template <class T>
std::vector<Tensor<T>> snapshot_params(const std::vector<nn::Param<T>*>& ps) {
    std::vector<Tensor<T>> out;
    out.reserve(ps.size());
    for (auto* p : ps) out.push_back(p->value);
    return out;
}

template <class T>
void restore_params(const std::vector<nn::Param<T>*>& ps, const std::vector<Tensor<T>>& snap) {
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap[i];
}

}  // namespace gan_detail

// Conventional adversarial warm-up (no watermark term, i.e. gamma = 0):
// alternating D updates with -E[log D(x)] - E[log(1-D(G(z)))] and G updates
// with the configured generator-loss variant.
template <class T>
GanCheckpoint<T> train_gan_warmup(const std::vector<Tensor<T>>& dataset, const GanConfig& cfg,
                                  Rng& rng) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_gan_warmup: empty dataset");
    for (const auto& img : dataset)
        if (img.rank() != 3 || img.dim(1) != cfg.image_size || img.dim(2) != cfg.image_size)
            throw std::invalid_argument("train_gan_warmup: dataset image size mismatch");

    GanCheckpoint<T> ckpt;
    ckpt.config = cfg;
    ckpt.generator = std::make_unique<Generator<T>>(cfg, rng);
    ckpt.discriminator = std::make_unique<Discriminator<T>>(cfg, rng);
    if (cfg.warmup_iterations == 0) return ckpt;

    Generator<T>& G = *ckpt.generator;
    Discriminator<T>& D = *ckpt.discriminator;
    nn::Adam<T> opt_g(G.params(), cfg.lr_g, 0.5);
    nn::Adam<T> opt_d(D.params(), cfg.lr_d, 0.5);
    const int B = cfg.batch_size;

    auto snap_g = gan_detail::snapshot_params(G.params());
    auto snap_d = gan_detail::snapshot_params(D.params());
    int64_t snap_iter = 0;

    for (int it = 0; it < cfg.warmup_iterations; ++it) {
        // --- discriminator step ---
        std::vector<int> idx(static_cast<size_t>(B));
        for (auto& i : idx) i = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
        Tensor<T> x_real = stack_batch(dataset, idx);
        Tensor<T> z = sample_latent<T>(cfg.latent, B, rng);
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
        double dl = d_loss_from_probs(p_real, p_fake);

        // --- generator step ---
        Tensor<T> z2 = sample_latent<T>(cfg.latent, B, rng);
        Tensor<T> x_g = G.forward(z2);
        Tensor<T> lg_logits = D.forward_logits(x_g);
        auto p_g = Discriminator<T>::probs(lg_logits);
        Tensor<T> g_logit(lg_logits.shape);
        for (int b = 0; b < B; ++b) {
            double d = cfg.saturating_g_loss ? p_g[b] : p_g[b] - 1.0;
            g_logit.data[b] = static_cast<T>(d / B);
        }
        opt_g.zero_grads();
        nn::zero_grads(D.params());
        Tensor<T> gx = D.backward(g_logit);
        G.backward(gx);
        opt_g.step();
        double gl = g_loss_from_probs(p_g, cfg.saturating_g_loss);

        bool logits_ok = true;
        for (auto v : lf_logits.data)
            if (!std::isfinite(static_cast<double>(v))) logits_ok = false;
        for (auto v : lg_logits.data)
            if (!std::isfinite(static_cast<double>(v))) logits_ok = false;
        if (!logits_ok || !std::isfinite(dl) || !std::isfinite(gl)) {
            gan_detail::restore_params(G.params(), snap_g);
            gan_detail::restore_params(D.params(), snap_d);
            ckpt.iteration = snap_iter;
            ckpt.status = "diverged";
            return ckpt;
        }
        if (it % cfg.log_every == 0 || it + 1 == cfg.warmup_iterations)
            ckpt.loss_curve.push_back({it, dl, gl});
        if ((it + 1) % cfg.snapshot_every == 0) {
            snap_g = gan_detail::snapshot_params(G.params());
            snap_d = gan_detail::snapshot_params(D.params());
            snap_iter = it + 1;
        }
        ckpt.iteration = it + 1;
    }
    ckpt.status = "trained";
    return ckpt;
}

}  // namespace ganmark
