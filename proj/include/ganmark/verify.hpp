#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/bitstring.hpp"
#include "ganmark/codec.hpp"
#include "ganmark/image_io.hpp"

namespace ganmark {

struct VerifyConfig {
    double decision_threshold = 0.9;  // tau
    double alpha = 1e-6;              // significance of the chance-null test
    bool resize_to_decoder = true;

    void validate() const {
        if (!(decision_threshold > 0.5 && decision_threshold <= 1.0))
            throw std::invalid_argument("VerifyConfig: tau must lie in (0.5, 1]");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("VerifyConfig: alpha must lie in (0, 1)");
    }
};

enum class Decision { kOwned, kNotOwned, kInconclusive };

inline const char* decision_name(Decision d) {
    switch (d) {
        case Decision::kOwned: return "owned";
        case Decision::kNotOwned: return "not-owned";
        default: return "inconclusive";
    }
}

struct VerificationReport {
    std::vector<double> per_image_accuracy;
    double aggregate_accuracy = 0;
    int64_t matched_bits = 0;  // k
    int64_t total_bits = 0;    // N * m
    double p_value = 1.0;      // P(Bin(N*m, 1/2) >= k)
    Decision decision = Decision::kInconclusive;
    // H0 assumes independent fair bits; correlated decoder biases would make
    // the test anti-conservative, which the report footer notes.
    std::string footer =
        "p-value assumes per-bit independence under H0; correlated decoder "
        "biases reduce the effective evidence";
};

// Exact upper binomial tail P(Bin(M, 1/2) >= k), summed in log space with
// long double accumulation.
inline double binomial_tail_half(int64_t total, int64_t k) {
    if (total < 1) throw std::invalid_argument("binomial_tail_half: total must be >= 1");
    if (k < 0 || k > total) throw std::invalid_argument("binomial_tail_half: k out of range");
    if (k == 0) return 1.0;
    const long double log2v = std::log(2.0L);
    const long double lgn = std::lgamma(static_cast<long double>(total) + 1.0L);
    long double acc = 0.0L;
    for (int64_t j = k; j <= total; ++j) {
        long double lt = lgn - std::lgamma(static_cast<long double>(j) + 1.0L) -
                         std::lgamma(static_cast<long double>(total - j) + 1.0L) -
                         static_cast<long double>(total) * log2v;
        acc += std::exp(lt);
    }
    return static_cast<double>(std::min(1.0L, acc));
}

// hard_threshold(decode(x)), with the resize rule applied first.
template <class T>
BitString extract_watermark(Decoder<T>& dec, const Tensor<T>& img) {
    Tensor<T> in = img;
    if (in.dim(1) != dec.config().image_size || in.dim(2) != dec.config().image_size)
        in = resize_bilinear(in, dec.config().image_size);
    return hard_threshold(dec.decode(in));
}

template <class T>
BitString extract_watermark(FrozenDecoder<T>& dec, const Tensor<T>& img) {
    return extract_watermark(dec.inner(), img);
}

// Decision rule: owned requires BOTH aggregate accuracy >= tau AND
// p-value <= alpha; a significant p-value with sub-threshold accuracy is
// inconclusive; no significance means not-owned.
template <class T>
VerificationReport verify_ownership(Decoder<T>& dec, const std::vector<Tensor<T>>& images,
                                    const BitString& w_gt, const VerifyConfig& cfg) {
    cfg.validate();
    if (images.empty()) throw std::invalid_argument("verify_ownership: empty image set");
    if (w_gt.length() != dec.config().payload)
        throw std::invalid_argument("verify_ownership: watermark length mismatch");

    VerificationReport rep;
    const int N = w_gt.length();
    for (const auto& img : images) {
        BitString got = extract_watermark(dec, img);
        double acc = bit_accuracy(got, w_gt);
        rep.per_image_accuracy.push_back(acc);
        rep.matched_bits += static_cast<int64_t>(std::llround(acc * N));
    }
    rep.total_bits = static_cast<int64_t>(images.size()) * N;
    rep.aggregate_accuracy =
        static_cast<double>(rep.matched_bits) / static_cast<double>(rep.total_bits);
    rep.p_value = binomial_tail_half(rep.total_bits, rep.matched_bits);

    if (rep.p_value <= cfg.alpha)
        rep.decision = rep.aggregate_accuracy >= cfg.decision_threshold ? Decision::kOwned
                                                                        : Decision::kInconclusive;
    else
        rep.decision = Decision::kNotOwned;
    return rep;
}

}  // namespace ganmark
