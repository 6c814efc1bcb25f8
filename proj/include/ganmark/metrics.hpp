#pragma once

#include <cmath>
#include <stdexcept>

#include "ganmark/tensor.hpp"

namespace ganmark {

namespace detail {
template <class T>
Tensor<T> clamped01(const Tensor<T>& x) {
    Tensor<T> y = x;
    y.clamp01();
    return y;
}
}  // namespace detail

// Metrics operate on [0,1] images (CHW); inputs are clamped first so the
// range invariant holds at the module boundary.

template <class T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw std::invalid_argument("mse: shape mismatch");
    Tensor<T> x = detail::clamped01(a), y = detail::clamped01(b);
    double acc = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(x.numel());
}

inline constexpr double kPsnrCapDb = 100.0;  // sentinel for identical images

template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    double m = mse(a, b);
    if (m <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

// Mean local SSIM, 8x8 uniform window at stride 1, C1=(0.01)^2 C2=(0.03)^2
// with peak 1.0, computed per channel then averaged.
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw std::invalid_argument("ssim: shape mismatch");
    if (a.rank() != 3) throw std::invalid_argument("ssim: expected CHW image");
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    constexpr int win = 8;
    if (H < win || W < win)
        throw std::invalid_argument("ssim: image smaller than the 8x8 window");
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    constexpr double inv_n = 1.0 / (win * win);

    Tensor<T> x = detail::clamped01(a), y = detail::clamped01(b);
    double total = 0.0;
    int64_t count = 0;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i + win <= H; ++i) {
            for (int j = 0; j + win <= W; ++j) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int u = 0; u < win; ++u) {
                    for (int v = 0; v < win; ++v) {
                        double px = x.at3(c, i + u, j + v);
                        double py = y.at3(c, i + u, j + v);
                        sx += px;
                        sy += py;
                        sxx += px * px;
                        syy += py * py;
                        sxy += px * py;
                    }
                }
                double mx = sx * inv_n, my = sy * inv_n;
                double vx = sxx * inv_n - mx * mx;
                double vy = syy * inv_n - my * my;
                double cov = sxy * inv_n - mx * my;
                total += ((2 * mx * my + C1) * (2 * cov + C2)) /
                         ((mx * mx + my * my + C1) * (vx + vy + C2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace ganmark
