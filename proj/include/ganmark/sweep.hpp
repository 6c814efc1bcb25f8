#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ganmark/augment.hpp"
#include "ganmark/codec.hpp"
#include "ganmark/embed.hpp"
#include "ganmark/gan.hpp"
#include "ganmark/image_io.hpp"
#include "ganmark/metrics.hpp"
#include "ganmark/verify.hpp"

namespace ganmark {

enum class SweepOperator { kNoise, kBlur, kJpeg, kColor };

inline const char* sweep_operator_name(SweepOperator op) {
    switch (op) {
        case SweepOperator::kNoise: return "noise";
        case SweepOperator::kBlur: return "blur";
        case SweepOperator::kJpeg: return "jpeg";
        default: return "color";
    }
}

struct SweepSpec {
    SweepOperator op = SweepOperator::kNoise;
    std::vector<double> grid;  // strictly monotone strengths
    int samples_per_point = 100;
    double blur_sigma = 10.0;  // fixed blur spread; the kernel size is the strength

    void validate() const {
        if (grid.size() < 1) throw std::invalid_argument("SweepSpec: empty grid");
        if (samples_per_point < 30)
            throw std::invalid_argument("SweepSpec: need at least 30 samples per point");
        bool inc = true, dec = true;
        for (size_t i = 1; i < grid.size(); ++i) {
            if (grid[i] <= grid[i - 1]) inc = false;
            if (grid[i] >= grid[i - 1]) dec = false;
        }
        if (!inc && !dec) throw std::invalid_argument("SweepSpec: grid must be strictly monotone");
    }
};

struct SweepRow {
    std::string op;
    double strength = 0;
    double bit_accuracy = 0;
    double psnr = 0;  // processed vs unprocessed
};

// Robustness sweeps run the REAL processing implementations (actual JPEG
// codec, exact blur), not the training-time differentiable surrogates.
template <class T>
Tensor<T> apply_real_processing(const Tensor<T>& img, SweepOperator op, double strength,
                                double blur_sigma, Rng& rng) {
    switch (op) {
        case SweepOperator::kNoise: {
            Tensor<T> y = img;
            for (auto& v : y.data) v += static_cast<T>(rng.normal(0.0, strength));
            y.clamp01();
            return y;
        }
        case SweepOperator::kBlur: {
            int k = static_cast<int>(std::lround(strength));
            return real_gaussian_blur(img, k, blur_sigma);
        }
        case SweepOperator::kJpeg:
            return jpeg_roundtrip(img, static_cast<int>(std::lround(strength)));
        case SweepOperator::kColor:
        default: {
            ColorJitterOp<T> jitter;
            return jitter.forward(img, strength, 1.0, 1.0);
        }
    }
}

template <class T>
std::vector<SweepRow> run_sweep(Generator<T>& g, FrozenDecoder<T>& dec, const BitString& w_gt,
                                const SweepSpec& spec, Rng& rng) {
    spec.validate();
    if (w_gt.length() != dec.config().payload)
        throw std::invalid_argument("run_sweep: watermark length mismatch");
    std::vector<SweepRow> rows;
    const int S = g.config().image_size;
    for (size_t pi = 0; pi < spec.grid.size(); ++pi) {
        Rng point_rng = rng.split(0x5357 + pi);  // deterministic per grid point
        double strength = spec.grid[pi];
        double acc = 0, psnr_sum = 0;
        int m = spec.samples_per_point;
        const int chunk = 50;
        int done = 0;
        while (done < m) {
            int b = std::min(chunk, m - done);
            Tensor<T> z = sample_latent<T>(g.config().latent, b, point_rng);
            Tensor<T> imgs = generate(g, z);
            for (int i = 0; i < b; ++i) {
                Tensor<T> img({3, S, S});
                std::copy_n(imgs.ptr() + static_cast<size_t>(i) * 3 * S * S, img.numel(),
                            img.ptr());
                Tensor<T> proc =
                    apply_real_processing(img, spec.op, strength, spec.blur_sigma, point_rng);
                acc += bit_accuracy(extract_watermark(dec, proc), w_gt);
                psnr_sum += psnr(img, proc);
            }
            done += b;
        }
        rows.push_back({sweep_operator_name(spec.op), strength, acc / m, psnr_sum / m});
    }
    return rows;
}

// Codec quality report over held-out images with fresh random payloads.
template <class T>
CodecMetrics quality_table(Codec<T>& codec, const std::vector<Tensor<T>>& dataset, int m,
                           Rng& rng) {
    if (m < 1) throw std::invalid_argument("quality_table: m must be >= 1");
    if (dataset.empty()) throw std::invalid_argument("quality_table: empty dataset");
    CodecMetrics out;
    const int N = codec.config.payload;
    for (int i = 0; i < m; ++i) {
        const Tensor<T>& img = dataset[static_cast<size_t>(i) % dataset.size()];
        BitString w = BitString::random(N, rng);
        Tensor<T> xw = encode(*codec.encoder, img, w);
        out.mse += mse(img, xw);
        out.psnr += psnr(img, xw);
        out.ssim += ssim(img, xw);
        out.bit_accuracy += bit_accuracy(hard_threshold(codec.decoder->decode(xw)), w);
    }
    out.mse /= m;
    out.psnr /= m;
    out.ssim /= m;
    out.bit_accuracy /= m;
    return out;
}

namespace sweep_detail {
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace sweep_detail

// CSV with a fixed header; byte-stable for identical inputs. Rows must be in
// strength order.
inline void emit_report(const std::vector<SweepRow>& rows, const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
    // strengths must be strictly monotone within each operator run
    for (size_t start = 0; start < rows.size();) {
        size_t end = start + 1;
        while (end < rows.size() && rows[end].op == rows[start].op) ++end;
        if (end - start >= 2) {
            bool inc = rows[start + 1].strength > rows[start].strength;
            for (size_t i = start + 1; i < end; ++i) {
                bool step_inc = rows[i].strength > rows[i - 1].strength;
                if (rows[i].strength == rows[i - 1].strength || step_inc != inc)
                    throw std::invalid_argument("emit_report: rows out of strength order");
            }
        }
        start = end;
    }
    std::ostringstream os;
    os << "operator,strength,bit_acc,psnr\n";
    for (const auto& r : rows)
        os << r.op << ',' << sweep_detail::fmt(r.strength) << ','
           << sweep_detail::fmt(r.bit_accuracy) << ',' << sweep_detail::fmt(r.psnr) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_report: cannot write " + path);
    f << os.str();
}

// One tab-separated file per operator: strength, plain accuracy, augmented
// accuracy, PSNR (from the plain run).
inline void emit_plot_data(const std::vector<SweepRow>& plain,
                           const std::vector<SweepRow>& augmented, const std::string& dir) {
    if (plain.size() != augmented.size())
        throw std::invalid_argument("emit_plot_data: row count mismatch");
    std::filesystem::create_directories(dir);
    std::ostringstream os;
    std::string cur_op;
    std::ofstream f;
    for (size_t i = 0; i < plain.size(); ++i) {
        if (plain[i].op != augmented[i].op || plain[i].strength != augmented[i].strength)
            throw std::invalid_argument("emit_plot_data: mismatched rows");
        if (plain[i].op != cur_op) {
            cur_op = plain[i].op;
            f.close();
            f.open(dir + "/" + cur_op + ".tsv", std::ios::binary);
            if (!f) throw std::runtime_error("emit_plot_data: cannot write " + dir);
            f << "strength\tacc_plain\tacc_augmented\tpsnr\n";
        }
        f << sweep_detail::fmt(plain[i].strength) << '\t'
          << sweep_detail::fmt(plain[i].bit_accuracy) << '\t'
          << sweep_detail::fmt(augmented[i].bit_accuracy) << '\t'
          << sweep_detail::fmt(plain[i].psnr) << '\n';
    }
}

// Default grids straddle the training ranges plus out-of-range stress points.
inline SweepSpec default_sweep_spec(SweepOperator op, int samples_per_point = 100) {
    SweepSpec s;
    s.op = op;
    s.samples_per_point = samples_per_point;
    switch (op) {
        case SweepOperator::kNoise: s.grid = {0.02, 0.05, 0.08, 0.12, 0.15, 0.25}; break;
        case SweepOperator::kBlur: s.grid = {3, 5, 7, 9}; break;
        case SweepOperator::kJpeg: s.grid = {90, 70, 50, 30, 20}; break;
        case SweepOperator::kColor: s.grid = {1.0, 1.1, 1.2, 1.3}; break;
    }
    return s;
}

}  // namespace ganmark
