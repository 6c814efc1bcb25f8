#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "ganmark/image_io.hpp"
#include "ganmark/rng.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark {

// Loads every readable image in a directory, sorted by filename. Corrupt
// files are skipped and counted rather than failing the whole run.
template <class T>
std::vector<Tensor<T>> load_image_dir(const std::string& dir, int size, bool auto_resize,
                                      int* skipped = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());

    std::vector<Tensor<T>> out;
    int skip = 0;
    for (const auto& p : paths) {
        try {
            Tensor<T> img = load_image<T>(p, auto_resize ? size : -1);
            if (img.dim(1) != size || img.dim(2) != size)
                throw std::runtime_error("size mismatch");
            out.push_back(std::move(img));
        } catch (const std::exception&) {
            ++skip;
        }
    }
    if (skipped) *skipped = skip;
    return out;
}

// Procedural toy dataset: smooth two-colour gradients with one soft disc.
// A low-parameter image family that a desk-scale GAN can model.
template <class T>
Tensor<T> make_toy_image(int size, Rng& rng) {
    Tensor<T> img({3, size, size});
    double c0[3], c1[3], cd[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniform();
        c1[c] = rng.uniform();
        cd[c] = rng.uniform();
    }
    double axis = rng.uniform();  // mixes vertical vs horizontal gradient
    double cx = rng.uniform(0.25, 0.75) * size;
    double cy = rng.uniform(0.25, 0.75) * size;
    double r = rng.uniform(0.15, 0.35) * size;
    const double edge = 2.0;  // soft-edge width in pixels
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            double t = axis * (static_cast<double>(i) / (size - 1)) +
                       (1.0 - axis) * (static_cast<double>(j) / (size - 1));
            double d = std::sqrt((i - cy) * (i - cy) + (j - cx) * (j - cx));
            double a = std::clamp((r - d) / edge + 0.5, 0.0, 1.0);
            a = a * a * (3.0 - 2.0 * a);  // smoothstep
            for (int c = 0; c < 3; ++c) {
                double bg = c0[c] + (c1[c] - c0[c]) * t;
                img.at3(c, i, j) = static_cast<T>(bg + (cd[c] - bg) * a);
            }
        }
    }
    img.clamp01();
    return img;
}

template <class T>
std::vector<Tensor<T>> make_toy_dataset(int count, int size, Rng& rng) {
    std::vector<Tensor<T>> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(make_toy_image<T>(size, rng));
    return out;
}

}  // namespace ganmark
