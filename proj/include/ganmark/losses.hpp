#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ganmark/bitstring.hpp"
#include "ganmark/metrics.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark {

// Probabilities are clamped to [1e-7, 1-1e-7] before any log.
inline constexpr double kProbEps = 1e-7;

inline double clamp_prob(double p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

inline void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
}

// Mean-over-bits binary cross-entropy between a payload and decoder probabilities.
inline double bce(const BitString& w, const std::vector<double>& probs) {
    if (w.length() != static_cast<int>(probs.size()))
        throw std::invalid_argument("bce: payload length mismatch");
    double acc = 0.0;
    for (int i = 0; i < w.length(); ++i) {
        double p = clamp_prob(probs[i]);
        acc += w.bit(i) ? -std::log(p) : -std::log(1.0 - p);
    }
    double v = acc / w.length();
    check_finite(v, "bce");
    return v;
}

inline double bce(const BitString& w, const SoftBits& w_hat) { return bce(w, w_hat.values); }

// Discriminator loss (mean over the batch): -log D(x) - log(1 - D(G(z))).
inline double d_loss_from_probs(const std::vector<double>& p_real,
                                const std::vector<double>& p_fake) {
    if (p_real.empty() || p_fake.empty())
        throw std::invalid_argument("d_loss: empty probability batch");
    if (p_real.size() != p_fake.size())
        throw std::invalid_argument("d_loss: batch size mismatch");
    double acc = 0.0;
    for (double p : p_real) acc -= std::log(clamp_prob(p));
    for (double p : p_fake) acc -= std::log(1.0 - clamp_prob(p));
    double v = acc / p_real.size();
    check_finite(v, "d_loss");
    return v;
}

// Generator loss. Non-saturating by default: -E[log D(G(z))]. The literal
// saturating form E[log(1 - D(G(z)))] is available behind the flag.
inline double g_loss_from_probs(const std::vector<double>& p_fake, bool saturating = false) {
    if (p_fake.empty()) throw std::invalid_argument("g_loss: empty probability batch");
    double acc = 0.0;
    for (double p : p_fake) {
        double pc = clamp_prob(p);
        acc += saturating ? std::log(1.0 - pc) : -std::log(pc);
    }
    double v = acc / p_fake.size();
    check_finite(v, "g_loss");
    return v;
}

// Codec training loss: MSE(x, x_w) + lambda * BCE(w, w_hat), both mean-reduced.
template <class T>
double codec_loss(const Tensor<T>& x, const Tensor<T>& x_w, const BitString& w,
                  const SoftBits& w_hat, double lambda) {
    if (x.shape != x_w.shape) throw std::invalid_argument("codec_loss: image shape mismatch");
    if (lambda < 0) throw std::invalid_argument("codec_loss: lambda must be nonnegative");
    double v = mse(x, x_w) + lambda * bce(w, w_hat);
    check_finite(v, "codec_loss");
    return v;
}

// Watermarked-generator loss: adversarial generator loss plus the weighted
// decoding error of the owner payload. gamma = 0 reduces to a conventional GAN.
inline double combined_g_loss(double gl, const SoftBits& w_hat, const BitString& w_gt,
                              double gamma) {
    if (w_hat.length() != w_gt.length())
        throw std::invalid_argument("combined_g_loss: payload length mismatch");
    if (gamma < 0) throw std::invalid_argument("combined_g_loss: gamma must be nonnegative");
    if (gamma == 0.0) return gl;
    double v = gl + gamma * bce(w_gt, w_hat);
    check_finite(v, "combined_g_loss");
    return v;
}

}  // namespace ganmark
