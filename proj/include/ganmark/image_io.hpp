#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/tensor.hpp"

namespace ganmark {

// Images on disk are 8-bit RGB; in memory they are CHW tensors in [0,1]
// (decoded by dividing by 255, written back as round(255*x)).

template <class T>
Tensor<T> from_cv_rgb(const cv::Mat& rgb) {
    Tensor<T> out({3, rgb.rows, rgb.cols});
    for (int i = 0; i < rgb.rows; ++i) {
        const cv::Vec3b* row = rgb.ptr<cv::Vec3b>(i);
        for (int j = 0; j < rgb.cols; ++j)
            for (int c = 0; c < 3; ++c)
                out.at3(c, i, j) = static_cast<T>(row[j][c]) / T(255);
    }
    return out;
}

template <class T>
cv::Mat to_cv_rgb(const Tensor<T>& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("to_cv_rgb: expected 3xHxW image");
    cv::Mat rgb(img.dim(1), img.dim(2), CV_8UC3);
    for (int i = 0; i < rgb.rows; ++i) {
        cv::Vec3b* row = rgb.ptr<cv::Vec3b>(i);
        for (int j = 0; j < rgb.cols; ++j)
            for (int c = 0; c < 3; ++c) {
                double v = std::min(1.0, std::max(0.0, static_cast<double>(img.at3(c, i, j))));
                row[j][c] = static_cast<uchar>(std::lround(255.0 * v));
            }
    }
    return rgb;
}

template <class T>
Tensor<T> load_image(const std::string& path, int target_size = -1) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw std::runtime_error("failed to read image: " + path);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    if (target_size > 0 && (rgb.rows != target_size || rgb.cols != target_size))
        cv::resize(rgb, rgb, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
    return from_cv_rgb<T>(rgb);
}

template <class T>
void save_image_png(const Tensor<T>& img, const std::string& path) {
    cv::Mat rgb = to_cv_rgb(img), bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw std::runtime_error("failed to write image: " + path);
}

// Bilinear resize to the decoder's training size.
template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& img, int size) {
    if (img.dim(1) == size && img.dim(2) == size) return img;
    cv::Mat rgb = to_cv_rgb(img);
    cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
    return from_cv_rgb<T>(rgb);
}

// Real (non-differentiable) JPEG round-trip at the given quality factor.
template <class T>
Tensor<T> jpeg_roundtrip(const Tensor<T>& img, int quality) {
    if (quality < 1 || quality > 100)
        throw std::invalid_argument("jpeg_roundtrip: quality must be in [1,100]");
    cv::Mat rgb = to_cv_rgb(img), bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::vector<uchar> buf;
    cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, quality});
    cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
    cv::cvtColor(dec, rgb, cv::COLOR_BGR2RGB);
    return from_cv_rgb<T>(rgb);
}

// Real Gaussian blur (library implementation), used by the robustness sweeps.
template <class T>
Tensor<T> real_gaussian_blur(const Tensor<T>& img, int kernel_size, double sigma) {
    if (kernel_size <= 1) return img;
    cv::Mat rgb = to_cv_rgb(img), out;
    cv::GaussianBlur(rgb, out, cv::Size(kernel_size, kernel_size), sigma, sigma,
                     cv::BORDER_REFLECT);
    return from_cv_rgb<T>(out);
}

}  // namespace ganmark
