#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ganmark/rng.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark {

// Differentiable processing layer inserted between the generator output and
// the decoder input during fine-tuning. Every operator maps [0,1] images to
// [0,1] images and admits gradients w.r.t. its image input (clamp boundaries
// excepted).

struct AugmentationConfig {
    double noise_sigma_lo = 0.001, noise_sigma_hi = 0.15;
    int blur_kernel_lo = 1, blur_kernel_hi = 9;  // odd sizes; 1 = no blur
    double blur_sigma_lo = 5.0, blur_sigma_hi = 15.0;
    int jpeg_quality_lo = 20, jpeg_quality_hi = 50;
    double color_factor_lo = 1.0, color_factor_hi = 1.30;
    double per_op_probability = 0.15;

    void validate() const {
        if (per_op_probability < 0.0 || per_op_probability > 1.0)
            throw std::invalid_argument("AugmentationConfig: probability must be in [0,1]");
        if (noise_sigma_hi < noise_sigma_lo || blur_sigma_hi < blur_sigma_lo ||
            jpeg_quality_hi < jpeg_quality_lo || color_factor_hi < color_factor_lo ||
            blur_kernel_hi < blur_kernel_lo)
            throw std::invalid_argument("AugmentationConfig: degenerate range");
        if (blur_kernel_lo % 2 == 0 || blur_kernel_hi % 2 == 0)
            throw std::invalid_argument("AugmentationConfig: kernel bounds must be odd");
        if (noise_sigma_lo < 0 || jpeg_quality_lo < 1 || jpeg_quality_hi > 100 ||
            color_factor_lo <= 0)
            throw std::invalid_argument("AugmentationConfig: range out of bounds");
    }
};

namespace aug_detail {

// BORDER_REFLECT style index mirroring (edge pixel duplicated).
inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

template <class T>
Tensor<T> clamp_with_mask(const Tensor<T>& x, std::vector<uint8_t>& mask) {
    Tensor<T> y = x;
    mask.assign(y.data.size(), 1);
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] < T(0)) {
            y.data[i] = T(0);
            mask[i] = 0;
        } else if (y.data[i] > T(1)) {
            y.data[i] = T(1);
            mask[i] = 0;
        }
    }
    return y;
}

template <class T>
Tensor<T> apply_mask(const Tensor<T>& g, const std::vector<uint8_t>& mask) {
    Tensor<T> out = g;
    for (size_t i = 0; i < out.data.size(); ++i)
        if (!mask[i]) out.data[i] = T(0);
    return out;
}

}  // namespace aug_detail

// Normalized Gaussian kernel; exposed for the kernel-formula oracle.
inline std::vector<double> gaussian_kernel_1d(int size, double sigma) {
    if (size < 1 || size % 2 == 0)
        throw std::invalid_argument("gaussian_kernel_1d: size must be odd and >= 1");
    if (sigma <= 0) throw std::invalid_argument("gaussian_kernel_1d: sigma must be positive");
    std::vector<double> k(static_cast<size_t>(size));
    int r = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        double d = i - r;
        k[i] = std::exp(-d * d / (2 * sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// ---- individual operators, each with a captured backward ----

template <class T>
class GaussianNoiseOp {
public:
    // Additive N(0, sigma^2), clamped; the noise sample is a constant
    // w.r.t. the input, so the gradient is the clamp mask.
    Tensor<T> forward(const Tensor<T>& x, double sigma, Rng& rng) {
        if (sigma < 0) throw std::invalid_argument("add_gaussian_noise: negative sigma");
        if (sigma == 0) {
            mask_.assign(x.data.size(), 1);
            return x;
        }
        Tensor<T> y = x;
        for (auto& v : y.data) v += static_cast<T>(rng.normal(0.0, sigma));
        return aug_detail::clamp_with_mask(y, mask_);
    }

    Tensor<T> backward(const Tensor<T>& gy) const { return aug_detail::apply_mask(gy, mask_); }

private:
    std::vector<uint8_t> mask_;
};

template <class T>
class GaussianBlurOp {
public:
    // Separable Gaussian convolution with reflect padding.
    Tensor<T> forward(const Tensor<T>& x, int kernel_size, double sigma) {
        if (kernel_size % 2 == 0 || kernel_size < 1)
            throw std::invalid_argument("gaussian_blur: kernel size must be odd and >= 1");
        shape_ = x.shape;
        k_ = kernel_size;
        if (kernel_size == 1) {
            identity_ = true;
            return x;
        }
        identity_ = false;
        kernel_ = gaussian_kernel_1d(kernel_size, sigma);
        return convolve(x, false);
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        if (identity_) return gy;
        return convolve(gy, true);
    }

private:
    // The adjoint of reflect-padded convolution with a symmetric kernel is
    // the same convolution with gradients folded back through the mirror map.
    Tensor<T> convolve(const Tensor<T>& x, bool adjoint) const {
        const int C = shape_[0], H = shape_[1], W = shape_[2];
        const int r = k_ / 2;
        Tensor<T> tmp({C, H, W}), out({C, H, W});
        // horizontal pass
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    if (!adjoint) {
                        double acc = 0;
                        for (int t = -r; t <= r; ++t)
                            acc += kernel_[t + r] * x.at3(c, i, aug_detail::reflect(j + t, W));
                        tmp.at3(c, i, j) = static_cast<T>(acc);
                    }
                }
        if (adjoint) {
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        double g = x.at3(c, i, j);
                        for (int t = -r; t <= r; ++t)
                            tmp.at3(c, i, aug_detail::reflect(j + t, W)) +=
                                static_cast<T>(kernel_[t + r] * g);
                    }
        }
        // vertical pass
        out.zero();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    if (!adjoint) {
                        double acc = 0;
                        for (int t = -r; t <= r; ++t)
                            acc += kernel_[t + r] * tmp.at3(c, aug_detail::reflect(i + t, H), j);
                        out.at3(c, i, j) = static_cast<T>(acc);
                    } else {
                        double g = tmp.at3(c, i, j);
                        for (int t = -r; t <= r; ++t)
                            out.at3(c, aug_detail::reflect(i + t, H), j) +=
                                static_cast<T>(kernel_[t + r] * g);
                    }
                }
        return out;
    }

    std::vector<int> shape_;
    std::vector<double> kernel_;
    int k_ = 1;
    bool identity_ = true;
};

enum class JpegRoundingSurrogate {
    kStraightThrough,  // true rounding forward, identity backward
    kCubic             // r(v) = v + (round(v) - v)^3, differentiable forward
};

namespace aug_detail {

inline const double* jpeg_luma_table() {
    static const double t[64] = {
        16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    return t;
}

inline const double* jpeg_chroma_table() {
    static const double t[64] = {
        17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
        24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
    return t;
}

// Standard quality-factor scaling: scale = 5000/Q below 50, 200-2Q otherwise;
// scaled entries clamped to [1,255].
inline void scaled_table(const double* base, int quality, double* out) {
    double s = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    for (int i = 0; i < 64; ++i) {
        double v = std::floor((base[i] * s + 50.0) / 100.0);
        out[i] = std::min(255.0, std::max(1.0, v));
    }
}

// Orthonormal 8x8 DCT-II matrix.
inline const double* dct8_matrix() {
    static double d[64];
    static bool init = [] {
        for (int k = 0; k < 8; ++k)
            for (int n = 0; n < 8; ++n)
                d[k * 8 + n] = std::sqrt((k == 0 ? 1.0 : 2.0) / 8.0) *
                               std::cos(M_PI * (2 * n + 1) * k / 16.0);
        return true;
    }();
    (void)init;
    return d;
}

inline void dct8_forward(const double* block, double* coef) {
    const double* D = dct8_matrix();
    double tmp[64];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int n = 0; n < 8; ++n) acc += D[i * 8 + n] * block[n * 8 + j];
            tmp[i * 8 + j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int n = 0; n < 8; ++n) acc += tmp[i * 8 + n] * D[j * 8 + n];
            coef[i * 8 + j] = acc;
        }
}

inline void dct8_inverse(const double* coef, double* block) {
    const double* D = dct8_matrix();
    double tmp[64];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int n = 0; n < 8; ++n) acc += D[n * 8 + i] * coef[n * 8 + j];
            tmp[i * 8 + j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int n = 0; n < 8; ++n) acc += tmp[i * 8 + n] * D[n * 8 + j];
            block[i * 8 + j] = acc;
        }
}

}  // namespace aug_detail

// Differentiable JPEG approximation: RGB -> YCbCr, 8x8 block DCT,
// quantization with quality-scaled standard tables, a differentiable rounding
// surrogate, dequantization, inverse DCT, YCbCr -> RGB, clamp. No chroma
// subsampling.
template <class T>
class DiffJpegOp {
public:
    Tensor<T> forward(const Tensor<T>& x, int quality,
                      JpegRoundingSurrogate mode = JpegRoundingSurrogate::kStraightThrough) {
        if (quality < 1 || quality > 100)
            throw std::invalid_argument("diff_jpeg: quality must be in [1,100]");
        if (x.rank() != 3 || x.dim(0) != 3)
            throw std::invalid_argument("diff_jpeg: expected 3xHxW image");
        mode_ = mode;
        H_ = x.dim(1);
        W_ = x.dim(2);
        Hp_ = (H_ + 7) / 8 * 8;
        Wp_ = (W_ + 7) / 8 * 8;
        aug_detail::scaled_table(aug_detail::jpeg_luma_table(), quality, qy_);
        aug_detail::scaled_table(aug_detail::jpeg_chroma_table(), quality, qc_);

        // RGB -> YCbCr (JFIF full range), in 0..255 scale shifted by -128
        std::vector<double> ycc(static_cast<size_t>(3) * Hp_ * Wp_);
        for (int i = 0; i < Hp_; ++i)
            for (int j = 0; j < Wp_; ++j) {
                int si = aug_detail::reflect(i, H_), sj = aug_detail::reflect(j, W_);
                double r = x.at3(0, si, sj) * 255.0;
                double g = x.at3(1, si, sj) * 255.0;
                double b = x.at3(2, si, sj) * 255.0;
                plane(ycc, 0, i, j) = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
                plane(ycc, 1, i, j) = -0.168736 * r - 0.331264 * g + 0.5 * b;
                plane(ycc, 2, i, j) = 0.5 * r - 0.418688 * g - 0.081312 * b;
            }

        round_deriv_.assign(ycc.size(), 1.0);
        std::vector<double> rec(ycc.size());
        double block[64], coef[64];
        for (int c = 0; c < 3; ++c) {
            const double* q = c == 0 ? qy_ : qc_;
            for (int bi = 0; bi < Hp_; bi += 8)
                for (int bj = 0; bj < Wp_; bj += 8) {
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v)
                            block[u * 8 + v] = plane(ycc, c, bi + u, bj + v);
                    aug_detail::dct8_forward(block, coef);
                    // quality 100 keeps every coefficient exact, making the op
                    // the identity on in-range inputs
                    for (int t = 0; quality < 100 && t < 64; ++t) {
                        double scaled = coef[t] / q[t];
                        double r = std::round(scaled);
                        double rq;
                        if (mode_ == JpegRoundingSurrogate::kStraightThrough) {
                            rq = r;
                        } else {
                            double d = r - scaled;
                            rq = scaled + d * d * d;
                            plane(round_deriv_, c, bi + t / 8, bj + t % 8) = 1.0 - 3.0 * d * d;
                        }
                        coef[t] = rq * q[t];
                    }
                    aug_detail::dct8_inverse(coef, block);
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v)
                            plane(rec, c, bi + u, bj + v) = block[u * 8 + v];
                }
        }

        // YCbCr -> RGB, crop padding, clamp
        Tensor<T> y({3, H_, W_});
        for (int i = 0; i < H_; ++i)
            for (int j = 0; j < W_; ++j) {
                double Y = plane(rec, 0, i, j) + 128.0;
                double Cb = plane(rec, 1, i, j);
                double Cr = plane(rec, 2, i, j);
                y.at3(0, i, j) = static_cast<T>((Y + 1.402 * Cr) / 255.0);
                y.at3(1, i, j) = static_cast<T>((Y - 0.344136 * Cb - 0.714136 * Cr) / 255.0);
                y.at3(2, i, j) = static_cast<T>((Y + 1.772 * Cb) / 255.0);
            }
        return aug_detail::clamp_with_mask(y, mask_);
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        Tensor<T> g = aug_detail::apply_mask(gy, mask_);
        // adjoint of YCbCr -> RGB (scale factors 255 and 1/255 cancel overall)
        std::vector<double> gycc(static_cast<size_t>(3) * Hp_ * Wp_, 0.0);
        for (int i = 0; i < H_; ++i)
            for (int j = 0; j < W_; ++j) {
                double gr = g.at3(0, i, j), gg = g.at3(1, i, j), gb = g.at3(2, i, j);
                plane(gycc, 0, i, j) = gr + gg + gb;
                plane(gycc, 1, i, j) = -0.344136 * gg + 1.772 * gb;
                plane(gycc, 2, i, j) = 1.402 * gr - 0.714136 * gg;
            }
        // adjoint of IDCT is the forward DCT; rounding surrogate is elementwise
        std::vector<double> gmid(gycc.size());
        double block[64], coef[64];
        for (int c = 0; c < 3; ++c) {
            for (int bi = 0; bi < Hp_; bi += 8)
                for (int bj = 0; bj < Wp_; bj += 8) {
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v)
                            block[u * 8 + v] = plane(gycc, c, bi + u, bj + v);
                    aug_detail::dct8_forward(block, coef);
                    if (mode_ == JpegRoundingSurrogate::kCubic)
                        for (int t = 0; t < 64; ++t)
                            coef[t] *= plane(round_deriv_, c, bi + t / 8, bj + t % 8);
                    aug_detail::dct8_inverse(coef, block);
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v)
                            plane(gmid, c, bi + u, bj + v) = block[u * 8 + v];
                }
        }
        // adjoint of RGB -> YCbCr plus the reflect padding fold-back
        Tensor<T> gx({3, H_, W_});
        for (int i = 0; i < Hp_; ++i)
            for (int j = 0; j < Wp_; ++j) {
                int si = aug_detail::reflect(i, H_), sj = aug_detail::reflect(j, W_);
                double gY = plane(gmid, 0, i, j);
                double gCb = plane(gmid, 1, i, j);
                double gCr = plane(gmid, 2, i, j);
                gx.at3(0, si, sj) += static_cast<T>(0.299 * gY - 0.168736 * gCb + 0.5 * gCr);
                gx.at3(1, si, sj) += static_cast<T>(0.587 * gY - 0.331264 * gCb - 0.418688 * gCr);
                gx.at3(2, si, sj) += static_cast<T>(0.114 * gY + 0.5 * gCb - 0.081312 * gCr);
            }
        return gx;
    }

private:
    double& plane(std::vector<double>& v, int c, int i, int j) const {
        return v[(static_cast<size_t>(c) * Hp_ + i) * Wp_ + j];
    }
    double plane(const std::vector<double>& v, int c, int i, int j) const {
        return v[(static_cast<size_t>(c) * Hp_ + i) * Wp_ + j];
    }

    int H_ = 0, W_ = 0, Hp_ = 0, Wp_ = 0;
    double qy_[64], qc_[64];
    JpegRoundingSurrogate mode_ = JpegRoundingSurrogate::kStraightThrough;
    std::vector<double> round_deriv_;
    std::vector<uint8_t> mask_;
};

// Brightness, contrast (per-image gray mean), saturation (luminance gray),
// applied in that order, then clamp.
template <class T>
class ColorJitterOp {
public:
    Tensor<T> forward(const Tensor<T>& x, double brightness, double contrast, double saturation) {
        if (brightness <= 0 || contrast <= 0 || saturation < 0)
            throw std::invalid_argument("color_jitter: factors must be positive");
        if (x.rank() != 3 || x.dim(0) != 3)
            throw std::invalid_argument("color_jitter: expected 3xHxW image");
        b_ = brightness;
        c_ = contrast;
        s_ = saturation;
        H_ = x.dim(1);
        W_ = x.dim(2);
        Tensor<T> y1 = x;
        for (auto& v : y1.data) v = static_cast<T>(v * b_);
        double m = 0;
        for (int i = 0; i < H_; ++i)
            for (int j = 0; j < W_; ++j)
                m += lum(y1.at3(0, i, j), y1.at3(1, i, j), y1.at3(2, i, j));
        m /= static_cast<double>(H_) * W_;
        Tensor<T> y2 = y1;
        for (auto& v : y2.data) v = static_cast<T>(m + (v - m) * c_);
        Tensor<T> y3 = y2;
        for (int i = 0; i < H_; ++i)
            for (int j = 0; j < W_; ++j) {
                double g = lum(y2.at3(0, i, j), y2.at3(1, i, j), y2.at3(2, i, j));
                for (int ch = 0; ch < 3; ++ch)
                    y3.at3(ch, i, j) = static_cast<T>(g + (y2.at3(ch, i, j) - g) * s_);
            }
        return aug_detail::clamp_with_mask(y3, mask_);
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        Tensor<T> g3 = aug_detail::apply_mask(gy, mask_);
        static const double w[3] = {0.299, 0.587, 0.114};
        // saturation adjoint: s*g + (1-s) * w_ch * sum_channels(g) per pixel
        Tensor<T> g2({3, H_, W_});
        for (int i = 0; i < H_; ++i)
            for (int j = 0; j < W_; ++j) {
                double chsum = g3.at3(0, i, j) + g3.at3(1, i, j) + g3.at3(2, i, j);
                for (int ch = 0; ch < 3; ++ch)
                    g2.at3(ch, i, j) =
                        static_cast<T>(s_ * g3.at3(ch, i, j) + (1.0 - s_) * w[ch] * chsum);
            }
        // contrast adjoint: c*g + (1-c) * (total gradient mass) * dmean/dinput
        double total = 0;
        for (const auto& v : g2.data) total += v;
        const double inv_n = 1.0 / (static_cast<double>(H_) * W_);
        Tensor<T> g1 = g2;
        for (int ch = 0; ch < 3; ++ch)
            for (int i = 0; i < H_; ++i)
                for (int j = 0; j < W_; ++j)
                    g1.at3(ch, i, j) = static_cast<T>(c_ * g2.at3(ch, i, j) +
                                                      (1.0 - c_) * total * w[ch] * inv_n);
        for (auto& v : g1.data) v = static_cast<T>(v * b_);
        return g1;
    }

private:
    static double lum(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

    double b_ = 1, c_ = 1, s_ = 1;
    int H_ = 0, W_ = 0;
    std::vector<uint8_t> mask_;
};

// ---- convenience single-image entry points ----

template <class T>
Tensor<T> add_gaussian_noise(const Tensor<T>& x, double sigma, Rng& rng) {
    GaussianNoiseOp<T> op;
    return op.forward(x, sigma, rng);
}

template <class T>
Tensor<T> gaussian_blur(const Tensor<T>& x, int kernel_size, double sigma) {
    GaussianBlurOp<T> op;
    return op.forward(x, kernel_size, sigma);
}

template <class T>
Tensor<T> diff_jpeg(const Tensor<T>& x, int quality,
                    JpegRoundingSurrogate mode = JpegRoundingSurrogate::kStraightThrough) {
    DiffJpegOp<T> op;
    return op.forward(x, quality, mode);
}

template <class T>
Tensor<T> color_jitter(const Tensor<T>& x, double brightness, double contrast,
                       double saturation) {
    ColorJitterOp<T> op;
    return op.forward(x, brightness, contrast, saturation);
}

// ---- stochastic pipeline over a batch ----

// One application of the pipeline to a batch, keeping the per-image operator
// chains so gradients can be pushed back through exactly what fired.
// Operator order is fixed: noise, blur, JPEG, color. Each operator fires
// independently per image with cfg.per_op_probability; parameters are drawn
// per image.
template <class T>
class PipelineApplication {
public:
    PipelineApplication(const Tensor<T>& batch, const AugmentationConfig& cfg, Rng& rng) {
        cfg.validate();
        if (batch.rank() != 4) throw std::invalid_argument("apply_pipeline: expected NCHW batch");
        const int n = batch.dim(0);
        out_ = batch;
        chains_.resize(static_cast<size_t>(n));
        const int C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
        for (int img = 0; img < n; ++img) {
            Tensor<T> x({C, H, W});
            std::copy_n(batch.ptr() + static_cast<size_t>(img) * C * H * W, x.numel(), x.ptr());
            auto& chain = chains_[static_cast<size_t>(img)];
            if (rng.bernoulli(cfg.per_op_probability)) {
                double sigma = rng.uniform(cfg.noise_sigma_lo, cfg.noise_sigma_hi);
                chain.noise = std::make_unique<GaussianNoiseOp<T>>();
                x = chain.noise->forward(x, sigma, rng);
            }
            if (rng.bernoulli(cfg.per_op_probability)) {
                int n_odd = (cfg.blur_kernel_hi - cfg.blur_kernel_lo) / 2 + 1;
                int k = cfg.blur_kernel_lo + 2 * rng.uniform_int(0, n_odd - 1);
                double sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
                chain.blur = std::make_unique<GaussianBlurOp<T>>();
                x = chain.blur->forward(x, k, sigma);
            }
            if (rng.bernoulli(cfg.per_op_probability)) {
                int q = rng.uniform_int(cfg.jpeg_quality_lo, cfg.jpeg_quality_hi);
                chain.jpeg = std::make_unique<DiffJpegOp<T>>();
                x = chain.jpeg->forward(x, q);
            }
            if (rng.bernoulli(cfg.per_op_probability)) {
                double b = rng.uniform(cfg.color_factor_lo, cfg.color_factor_hi);
                double c = rng.uniform(cfg.color_factor_lo, cfg.color_factor_hi);
                double s = rng.uniform(cfg.color_factor_lo, cfg.color_factor_hi);
                chain.color = std::make_unique<ColorJitterOp<T>>();
                x = chain.color->forward(x, b, c, s);
            }
            std::copy_n(x.ptr(), x.numel(), out_.ptr() + static_cast<size_t>(img) * C * H * W);
        }
    }

    const Tensor<T>& output() const { return out_; }

    Tensor<T> backward(const Tensor<T>& grad_out) const {
        if (grad_out.shape != out_.shape)
            throw std::invalid_argument("PipelineApplication::backward: shape mismatch");
        const int n = out_.dim(0), C = out_.dim(1), H = out_.dim(2), W = out_.dim(3);
        Tensor<T> gin(out_.shape);
        for (int img = 0; img < n; ++img) {
            Tensor<T> g({C, H, W});
            std::copy_n(grad_out.ptr() + static_cast<size_t>(img) * C * H * W, g.numel(), g.ptr());
            const auto& chain = chains_[static_cast<size_t>(img)];
            if (chain.color) g = chain.color->backward(g);
            if (chain.jpeg) g = chain.jpeg->backward(g);
            if (chain.blur) g = chain.blur->backward(g);
            if (chain.noise) g = chain.noise->backward(g);
            std::copy_n(g.ptr(), g.numel(), gin.ptr() + static_cast<size_t>(img) * C * H * W);
        }
        return gin;
    }

    // which operators fired, for rate accounting
    bool fired_noise(int img) const { return chains_[static_cast<size_t>(img)].noise != nullptr; }
    bool fired_blur(int img) const { return chains_[static_cast<size_t>(img)].blur != nullptr; }
    bool fired_jpeg(int img) const { return chains_[static_cast<size_t>(img)].jpeg != nullptr; }
    bool fired_color(int img) const { return chains_[static_cast<size_t>(img)].color != nullptr; }

private:
    struct Chain {
        std::unique_ptr<GaussianNoiseOp<T>> noise;
        std::unique_ptr<GaussianBlurOp<T>> blur;
        std::unique_ptr<DiffJpegOp<T>> jpeg;
        std::unique_ptr<ColorJitterOp<T>> color;
    };
    Tensor<T> out_;
    std::vector<Chain> chains_;
};

template <class T>
Tensor<T> apply_pipeline(const Tensor<T>& batch, const AugmentationConfig& cfg, Rng& rng) {
    return PipelineApplication<T>(batch, cfg, rng).output();
}

}  // namespace ganmark
