#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "ganmark/augment.hpp"
#include "ganmark/codec.hpp"
#include "ganmark/embed.hpp"
#include "ganmark/gan.hpp"
#include "ganmark/verify.hpp"

namespace ganmark {

using json = nlohmann::json;

namespace cfg_detail {
template <class V>
void get_if(const json& j, const char* key, V& out) {
    if (j.contains(key)) out = j.at(key).get<V>();
}
}  // namespace cfg_detail

inline void to_json(json& j, const CodecConfig& c) {
    j = json{{"image_size", c.image_size},       {"channels", c.channels},
             {"payload", c.payload},             {"lambda_weight", c.lambda_weight},
             {"epochs", c.epochs},               {"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate}, {"optimizer", c.optimizer},
             {"residual_scale", c.residual_scale},
             {"holdout_fraction", c.holdout_fraction},
             {"hidden_channels", c.hidden_channels},
             {"payload_channels", c.payload_channels}};
}

inline void from_json(const json& j, CodecConfig& c) {
    using cfg_detail::get_if;
    get_if(j, "image_size", c.image_size);
    get_if(j, "channels", c.channels);
    get_if(j, "payload", c.payload);
    get_if(j, "lambda_weight", c.lambda_weight);
    get_if(j, "epochs", c.epochs);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "learning_rate", c.learning_rate);
    get_if(j, "optimizer", c.optimizer);
    get_if(j, "residual_scale", c.residual_scale);
    get_if(j, "holdout_fraction", c.holdout_fraction);
    get_if(j, "hidden_channels", c.hidden_channels);
    get_if(j, "payload_channels", c.payload_channels);
}

inline void to_json(json& j, const GanConfig& c) {
    j = json{{"image_size", c.image_size},
             {"channels", c.channels},
             {"latent_dim", c.latent.dim},
             {"batch_size", c.batch_size},
             {"warmup_iterations", c.warmup_iterations},
             {"lr_g", c.lr_g},
             {"lr_d", c.lr_d},
             {"saturating_g_loss", c.saturating_g_loss}};
}

inline void from_json(const json& j, GanConfig& c) {
    using cfg_detail::get_if;
    get_if(j, "image_size", c.image_size);
    get_if(j, "channels", c.channels);
    get_if(j, "latent_dim", c.latent.dim);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "warmup_iterations", c.warmup_iterations);
    get_if(j, "lr_g", c.lr_g);
    get_if(j, "lr_d", c.lr_d);
    get_if(j, "saturating_g_loss", c.saturating_g_loss);
}

inline void to_json(json& j, const EmbedConfig& c) {
    j = json{{"gamma", c.gamma},
             {"finetune_iterations", c.finetune_iterations},
             {"watermark_hex", c.w_gt.length() > 0 ? c.w_gt.to_hex() : ""},
             {"watermark_bits", c.w_gt.length()},
             {"use_augmentation", c.use_augmentation},
             {"batch_size", c.batch_size},
             {"lr_g", c.lr_g},
             {"lr_d", c.lr_d},
             {"validation_samples", c.validation_samples}};
}

inline void from_json(const json& j, EmbedConfig& c) {
    using cfg_detail::get_if;
    get_if(j, "gamma", c.gamma);
    get_if(j, "finetune_iterations", c.finetune_iterations);
    get_if(j, "use_augmentation", c.use_augmentation);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "lr_g", c.lr_g);
    get_if(j, "lr_d", c.lr_d);
    get_if(j, "validation_samples", c.validation_samples);
    if (j.contains("watermark_hex") && j.contains("watermark_bits")) {
        int n = j.at("watermark_bits").get<int>();
        std::string hex = j.at("watermark_hex").get<std::string>();
        if (n > 0 && !hex.empty()) c.w_gt = BitString::from_hex(hex, n);
    }
}

inline void to_json(json& j, const AugmentationConfig& c) {
    j = json{{"noise_sigma_range", {c.noise_sigma_lo, c.noise_sigma_hi}},
             {"blur_kernel_range", {c.blur_kernel_lo, c.blur_kernel_hi}},
             {"blur_sigma_range", {c.blur_sigma_lo, c.blur_sigma_hi}},
             {"jpeg_quality_range", {c.jpeg_quality_lo, c.jpeg_quality_hi}},
             {"color_factor_range", {c.color_factor_lo, c.color_factor_hi}},
             {"per_op_probability", c.per_op_probability}};
}

inline void from_json(const json& j, AugmentationConfig& c) {
    auto range = [&](const char* key, auto& lo, auto& hi) {
        if (j.contains(key)) {
            lo = j.at(key).at(0);
            hi = j.at(key).at(1);
        }
    };
    range("noise_sigma_range", c.noise_sigma_lo, c.noise_sigma_hi);
    range("blur_kernel_range", c.blur_kernel_lo, c.blur_kernel_hi);
    range("blur_sigma_range", c.blur_sigma_lo, c.blur_sigma_hi);
    range("jpeg_quality_range", c.jpeg_quality_lo, c.jpeg_quality_hi);
    range("color_factor_range", c.color_factor_lo, c.color_factor_hi);
    cfg_detail::get_if(j, "per_op_probability", c.per_op_probability);
}

inline void to_json(json& j, const VerifyConfig& c) {
    j = json{{"decision_threshold", c.decision_threshold},
             {"alpha", c.alpha},
             {"resize_to_decoder", c.resize_to_decoder}};
}

inline void from_json(const json& j, VerifyConfig& c) {
    using cfg_detail::get_if;
    get_if(j, "decision_threshold", c.decision_threshold);
    get_if(j, "alpha", c.alpha);
    get_if(j, "resize_to_decoder", c.resize_to_decoder);
}

// Whole-run configuration: one structured, human-editable document.
struct RunConfig {
    CodecConfig codec;
    GanConfig gan;
    EmbedConfig embed;
    AugmentationConfig augmentation;
    VerifyConfig verify;
    std::string dataset_dir;
    std::string output_dir = ".";
    uint64_t seed = 1;

    // Cross-section consistency, checked before any compute.
    void validate() const {
        codec.validate();
        gan.validate();
        augmentation.validate();
        verify.validate();
        if (codec.image_size != gan.image_size)
            throw std::invalid_argument(
                "RunConfig: codec and gan image sizes must match");
        if (embed.w_gt.length() > 0 && embed.w_gt.length() != codec.payload)
            throw std::invalid_argument(
                "RunConfig: embed watermark length must equal codec payload");
        if (embed.gamma < 0 || embed.finetune_iterations < 0 || embed.batch_size <= 0)
            throw std::invalid_argument("RunConfig: bad embed section");
    }
};

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"codec", c.codec},       {"gan", c.gan},
             {"embed", c.embed},       {"augmentation", c.augmentation},
             {"verify", c.verify},     {"dataset_dir", c.dataset_dir},
             {"output_dir", c.output_dir}, {"seed", c.seed}};
}

inline void from_json(const json& j, RunConfig& c) {
    using cfg_detail::get_if;
    get_if(j, "codec", c.codec);
    get_if(j, "gan", c.gan);
    get_if(j, "embed", c.embed);
    get_if(j, "augmentation", c.augmentation);
    get_if(j, "verify", c.verify);
    get_if(j, "dataset_dir", c.dataset_dir);
    get_if(j, "output_dir", c.output_dir);
    get_if(j, "seed", c.seed);
}

struct GanPreset {
    int batch_size;
    int warmup_iterations;
    int finetune_iterations;
    double gamma;
};

// Published large-scale recipes, kept as named presets for documentation
// fidelity; desk-scale runs override the iteration counts.
inline GanPreset gan_preset(const std::string& name) {
    if (name == "began") return {64, 400000, 3000, 0.03};
    if (name == "pggan") return {16, 360000, 1000, 3.0};
    if (name == "stylegan2") return {64, 200000, 1000, 3.0};
    if (name == "desk32") return {32, 8000, 2000, 3.0};
    throw std::invalid_argument("unknown preset: " + name);
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
    GanPreset p = gan_preset(name);
    cfg.gan.batch_size = p.batch_size;
    cfg.gan.warmup_iterations = p.warmup_iterations;
    cfg.embed.finetune_iterations = p.finetune_iterations;
    cfg.embed.gamma = p.gamma;
    cfg.embed.batch_size = p.batch_size;
}

}  // namespace ganmark
