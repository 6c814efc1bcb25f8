// Batch CLI for the GAN watermarking toolkit: codec training, GAN warm-up,
// supervised watermark fine-tuning, image generation, ownership verification
// and robustness sweeps.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ganmark/ganmark.hpp"

namespace fs = std::filesystem;
using namespace ganmark;

using real = float;  // training precision

// exit codes
constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;
constexpr int kThresholdFailure = 3;

namespace {

void check_device() {
    const char* dev = std::getenv("GANMARK_DEVICE");
    if (dev && std::string(dev) != "cpu")
        throw std::invalid_argument(std::string("unsupported GANMARK_DEVICE: ") + dev);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    json j = json::parse(f);
    RunConfig cfg = j.get<RunConfig>();
    cfg.validate();
    return cfg;
}

uint64_t file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for hashing: " + path);
    std::vector<char> buf(std::istreambuf_iterator<char>(f), {});
    return fnv1a64(buf.data(), buf.size());
}

std::vector<Tensor<real>> load_dataset_for(const RunConfig& cfg, int* skipped) {
    if (cfg.dataset_dir.empty())
        throw std::invalid_argument("config: dataset_dir is required for this command");
    auto ds = load_image_dir<real>(cfg.dataset_dir, cfg.codec.image_size, true, skipped);
    if (ds.empty()) throw std::invalid_argument("dataset is empty: " + cfg.dataset_dir);
    return ds;
}

int cmd_make_dataset(const std::string& out, int count, int size, uint64_t seed) {
    fs::create_directories(out);
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Tensor<real> img = make_toy_image<real>(size, rng);
        char name[64];
        std::snprintf(name, sizeof(name), "toy_%06d.png", i);
        save_image_png(img, out + "/" + name);
    }
    std::cout << "wrote " << count << " images to " << out << "\n";
    return kOk;
}

int cmd_train_codec(const std::string& config_path, uint64_t seed_override, bool has_seed,
                    const std::string& out_override) {
    RunConfig cfg = load_run_config(config_path);
    if (has_seed) cfg.seed = seed_override;
    std::string out = out_override.empty() ? cfg.output_dir : out_override;
    fs::create_directories(out);
    int skipped = 0;
    auto ds = load_dataset_for(cfg, &skipped);

    Rng rng(cfg.seed);
    auto ckpt = train_codec(ds, cfg.codec, rng);
    std::string ckpt_path = out + "/codec.ckpt";
    save_codec_checkpoint(ckpt, ckpt_path);

    Manifest man;
    man.set("command", "train-codec");
    man.set("config", json(cfg));
    man.set("seed", cfg.seed);
    man.set("skipped_images", skipped);
    man.set("checkpoint", ckpt_path);
    man.set("checkpoint_hash", file_hash(ckpt_path));
    man.set("decoder_hash", ckpt.codec.decoder->param_hash());
    man.set("metrics", {{"mse", ckpt.metrics.mse},
                        {"bit_accuracy", ckpt.metrics.bit_accuracy},
                        {"psnr", ckpt.metrics.psnr},
                        {"ssim", ckpt.metrics.ssim}});
    man.set("success", ckpt.success);
    man.write(out + "/codec_manifest.json");

    std::cout << "codec: bit_acc=" << ckpt.metrics.bit_accuracy
              << " psnr=" << ckpt.metrics.psnr << " ssim=" << ckpt.metrics.ssim << "\n";
    return ckpt.success ? kOk : kThresholdFailure;
}

int cmd_warmup(const std::string& config_path, uint64_t seed_override, bool has_seed,
               const std::string& out_override) {
    RunConfig cfg = load_run_config(config_path);
    if (has_seed) cfg.seed = seed_override;
    std::string out = out_override.empty() ? cfg.output_dir : out_override;
    fs::create_directories(out);
    int skipped = 0;
    auto ds = load_dataset_for(cfg, &skipped);

    Rng rng(cfg.seed ^ 0x77617275);  // independent stream from the codec run
    auto ckpt = train_gan_warmup(ds, cfg.gan, rng);
    std::string ckpt_path = out + "/gan.ckpt";
    save_gan_checkpoint(ckpt, ckpt_path);

    {
        std::ofstream csv(out + "/gan_losses.csv");
        csv << "iteration,d_loss,g_loss\n";
        for (const auto& r : ckpt.loss_curve)
            csv << r.iteration << ',' << r.d_loss << ',' << r.g_loss << '\n';
    }

    Manifest man;
    man.set("command", "warmup");
    man.set("config", json(cfg));
    man.set("seed", cfg.seed);
    man.set("skipped_images", skipped);
    man.set("checkpoint", ckpt_path);
    man.set("checkpoint_hash", file_hash(ckpt_path));
    man.set("iterations", ckpt.iteration);
    man.set("status", ckpt.status);
    man.write(out + "/warmup_manifest.json");

    std::cout << "warmup: " << ckpt.iteration << " iterations, status " << ckpt.status << "\n";
    return ckpt.status == "diverged" ? kRuntimeError : kOk;
}

int cmd_finetune(const std::string& config_path, const std::string& codec_path,
                 const std::string& gan_path, double gamma_override, bool has_gamma,
                 const std::string& preset, uint64_t seed_override, bool has_seed,
                 const std::string& out_override) {
    RunConfig cfg = load_run_config(config_path);
    if (!preset.empty()) apply_preset(cfg, preset);
    if (has_gamma) cfg.embed.gamma = gamma_override;
    if (has_seed) cfg.seed = seed_override;
    std::string out = out_override.empty() ? cfg.output_dir : out_override;
    fs::create_directories(out);

    auto codec = load_codec_checkpoint<real>(codec_path);
    auto gan = load_gan_checkpoint<real>(gan_path);
    if (gan.config.image_size != codec.codec.config.image_size)
        throw std::invalid_argument("finetune: codec and GAN image sizes are inconsistent");
    if (cfg.embed.w_gt.length() == 0)
        cfg.embed.w_gt = BitString::from_owner_key(cfg.seed, codec.codec.config.payload);
    if (cfg.embed.w_gt.length() != codec.codec.config.payload)
        throw std::invalid_argument("finetune: watermark length does not match decoder payload");

    int skipped = 0;
    auto ds = load_dataset_for(cfg, &skipped);
    uint64_t codec_hash = file_hash(codec_path), gan_hash = file_hash(gan_path);

    FrozenDecoder<real> frozen(std::move(codec.codec.decoder));
    Rng rng(cfg.seed ^ 0x66696e65);
    auto wckpt = finetune(gan, frozen, ds, cfg.embed, cfg.augmentation, rng);
    std::string ckpt_path = out + "/wgan.ckpt";
    save_wgan_checkpoint(wckpt, ckpt_path);

    {
        std::ofstream csv(out + "/finetune_curve.csv");
        csv << "iteration,g_loss,watermark_bce,bit_accuracy\n";
        for (const auto& r : wckpt.curve)
            csv << r.iteration << ',' << r.g_loss << ',' << r.watermark_bce << ','
                << r.bit_accuracy << '\n';
    }

    Manifest man;
    man.set("command", "finetune");
    man.set("config", json(cfg));
    man.set("seed", cfg.seed);
    man.set("codec_checkpoint_hash", codec_hash);
    man.set("warmup_checkpoint_hash", gan_hash);
    man.set("frozen_decoder_hash", wckpt.decoder_hash);
    man.set("gamma", cfg.embed.gamma);
    man.set("iterations", cfg.embed.finetune_iterations);
    man.set("augmentation", json(cfg.augmentation));
    man.set("use_augmentation", cfg.embed.use_augmentation);
    man.set("watermark_hex", cfg.embed.w_gt.to_hex());
    man.set("watermark_bits", cfg.embed.w_gt.length());
    man.set("final_bit_accuracy", wckpt.final_bit_accuracy);
    man.set("control_run", cfg.embed.gamma == 0.0);
    if (!preset.empty()) man.set("preset", preset);
    man.write(out + "/finetune_manifest.json");

    std::cout << "finetune: gamma=" << cfg.embed.gamma
              << " final_bit_accuracy=" << wckpt.final_bit_accuracy << "\n";
    return kOk;
}

// Loads a generator from either a warm-up or a watermarked checkpoint.
std::unique_ptr<Generator<real>> load_generator(const std::string& path, GanConfig* cfg_out) {
    CheckpointReader probe(path);
    if (probe.kind() == "gan") {
        auto g = load_gan_checkpoint<real>(path);
        if (cfg_out) *cfg_out = g.config;
        return std::move(g.generator);
    }
    auto w = load_wgan_checkpoint<real>(path);
    if (cfg_out) *cfg_out = w.gan_config;
    return std::move(w.generator);
}

int cmd_generate(const std::string& model, int count, uint64_t seed, const std::string& out) {
    if (count < 0) throw std::invalid_argument("generate: count must be nonnegative");
    fs::create_directories(out);
    GanConfig gcfg;
    auto g = load_generator(model, &gcfg);
    Rng rng(seed);
    const int S = gcfg.image_size;
    int done = 0;
    while (done < count) {
        int b = std::min(32, count - done);
        Tensor<real> z = sample_latent<real>(gcfg.latent, b, rng);
        Tensor<real> imgs = generate(*g, z);
        for (int i = 0; i < b; ++i) {
            Tensor<real> img({3, S, S});
            std::copy_n(imgs.ptr() + static_cast<size_t>(i) * 3 * S * S, img.numel(), img.ptr());
            char name[64];
            std::snprintf(name, sizeof(name), "gen_%05d.png", done + i);
            save_image_png(img, out + "/" + name);
        }
        done += b;
    }
    std::cout << "wrote " << count << " images to " << out << "\n";
    return kOk;
}

int cmd_verify(const std::string& decoder_path, const std::string& watermark_hex,
               const std::string& images_dir, const std::string& config_path,
               const std::string& out) {
    VerifyConfig vcfg;
    if (!config_path.empty()) vcfg = load_run_config(config_path).verify;
    vcfg.validate();
    fs::create_directories(out);

    auto codec = load_codec_checkpoint<real>(decoder_path);
    Decoder<real>& dec = *codec.codec.decoder;
    BitString w_gt = BitString::from_hex(watermark_hex, codec.codec.config.payload);

    int skipped = 0;
    auto images =
        load_image_dir<real>(images_dir, codec.codec.config.image_size,
                             vcfg.resize_to_decoder, &skipped);
    if (images.empty()) throw std::invalid_argument("verify: no readable images in " + images_dir);

    VerificationReport rep = verify_ownership(dec, images, w_gt, vcfg);

    {
        std::ofstream txt(out + "/verify_report.txt");
        txt << "decision: " << decision_name(rep.decision) << "\n"
            << "aggregate_accuracy: " << rep.aggregate_accuracy << "\n"
            << "matched_bits: " << rep.matched_bits << "\n"
            << "total_bits: " << rep.total_bits << "\n"
            << "p_value: " << rep.p_value << "\n"
            << "tau: " << vcfg.decision_threshold << "\n"
            << "alpha: " << vcfg.alpha << "\n"
            << "images: " << images.size() << "\n"
            << "skipped: " << skipped << "\n"
            << "note: " << rep.footer << "\n";
    }
    {
        std::ofstream csv(out + "/verify_per_image.csv");
        csv << "index,bit_accuracy\n";
        for (size_t i = 0; i < rep.per_image_accuracy.size(); ++i)
            csv << i << ',' << rep.per_image_accuracy[i] << '\n';
    }
    std::cout << "decision: " << decision_name(rep.decision)
              << " (accuracy " << rep.aggregate_accuracy << ", p " << rep.p_value << ")\n";
    return kOk;
}

int cmd_sweep(const std::string& model, const std::string& augmented_model,
              const std::string& decoder_path, const std::string& watermark_hex,
              const std::string& spec_name, int samples, uint64_t seed,
              const std::string& out) {
    fs::create_directories(out);
    auto codec = load_codec_checkpoint<real>(decoder_path);
    FrozenDecoder<real> frozen(std::move(codec.codec.decoder));
    BitString w_gt = BitString::from_hex(watermark_hex, codec.codec.config.payload);

    std::vector<SweepOperator> ops;
    if (spec_name == "default")
        ops = {SweepOperator::kNoise, SweepOperator::kBlur, SweepOperator::kJpeg,
               SweepOperator::kColor};
    else if (spec_name == "noise") ops = {SweepOperator::kNoise};
    else if (spec_name == "blur") ops = {SweepOperator::kBlur};
    else if (spec_name == "jpeg") ops = {SweepOperator::kJpeg};
    else if (spec_name == "color") ops = {SweepOperator::kColor};
    else throw std::invalid_argument("sweep: unknown spec '" + spec_name + "'");

    auto g_plain = load_generator(model, nullptr);
    std::unique_ptr<Generator<real>> g_aug;
    if (!augmented_model.empty()) g_aug = load_generator(augmented_model, nullptr);

    std::vector<SweepRow> all_plain, all_aug;
    for (auto op : ops) {
        SweepSpec spec = default_sweep_spec(op, samples);
        Rng rng(seed ^ static_cast<uint64_t>(op));
        auto rows = run_sweep(*g_plain, frozen, w_gt, spec, rng);
        all_plain.insert(all_plain.end(), rows.begin(), rows.end());
        Rng rng2(seed ^ static_cast<uint64_t>(op));
        auto rows_aug = g_aug ? run_sweep(*g_aug, frozen, w_gt, spec, rng2) : rows;
        all_aug.insert(all_aug.end(), rows_aug.begin(), rows_aug.end());
    }
    emit_report(all_plain, out + "/sweep.csv");
    emit_plot_data(all_plain, all_aug, out);
    std::cout << "sweep: " << all_plain.size() << " rows -> " << out << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN watermarking toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, model, augmented_model, codec_path, gan_path;
    std::string watermark_hex, images_dir, preset, spec_name = "default";
    uint64_t seed = 1;
    bool has_seed = false;
    double gamma = 0;
    bool has_gamma = false;
    int count = 16, size = 32, samples = 100;

    auto add_seed = [&](CLI::App* c) {
        c->add_option("--seed", seed, "random seed override")->each([&](const std::string&) {
            has_seed = true;
        });
    };

    auto* mk = app.add_subcommand("make-dataset", "generate a procedural toy dataset");
    mk->add_option("--out", out_dir, "output directory")->required();
    mk->add_option("--count", count, "number of images");
    mk->add_option("--size", size, "image side length");
    add_seed(mk);

    auto* tc = app.add_subcommand("train-codec", "train the watermark encoder/decoder");
    tc->add_option("--config", config_path, "run config file")->required();
    tc->add_option("--out", out_dir, "output directory override");
    add_seed(tc);

    auto* wu = app.add_subcommand("warmup", "conventional GAN warm-up (gamma = 0)");
    wu->add_option("--config", config_path, "run config file")->required();
    wu->add_option("--out", out_dir, "output directory override");
    add_seed(wu);

    auto* ft = app.add_subcommand("finetune", "supervised watermark fine-tuning");
    ft->add_option("--config", config_path, "run config file")->required();
    ft->add_option("--codec", codec_path, "codec checkpoint")->required();
    ft->add_option("--gan", gan_path, "warm-up GAN checkpoint")->required();
    ft->add_option("--gamma", gamma, "gamma override")->each([&](const std::string&) {
        has_gamma = true;
    });
    ft->add_option("--preset", preset, "hyperparameter preset (began|pggan|stylegan2|desk32)");
    ft->add_option("--out", out_dir, "output directory override");
    add_seed(ft);

    auto* gen = app.add_subcommand("generate", "generate images from a checkpoint");
    gen->add_option("--model", model, "gan or wgan checkpoint")->required();
    gen->add_option("--count", count, "number of images");
    gen->add_option("--out", out_dir, "output directory")->required();
    add_seed(gen);

    auto* vf = app.add_subcommand("verify", "ownership verification over an image directory");
    vf->add_option("--decoder", codec_path, "codec checkpoint holding the decoder")->required();
    vf->add_option("--watermark", watermark_hex, "owner watermark (hex)")->required();
    vf->add_option("--images", images_dir, "directory of images to verify")->required();
    vf->add_option("--config", config_path, "run config (for the verify section)");
    vf->add_option("--out", out_dir, "output directory")->required();

    auto* sw = app.add_subcommand("sweep", "robustness sweep with real processing");
    sw->add_option("--model", model, "generator checkpoint")->required();
    sw->add_option("--augmented-model", augmented_model,
                   "optional second generator for the comparison columns");
    sw->add_option("--decoder", codec_path, "codec checkpoint holding the decoder")->required();
    sw->add_option("--watermark", watermark_hex, "owner watermark (hex)")->required();
    sw->add_option("--spec", spec_name, "operator: default|noise|blur|jpeg|color")
        ->default_val("default");
    sw->add_option("--samples", samples, "samples per grid point");
    sw->add_option("--out", out_dir, "output directory")->required();
    add_seed(sw);

    CLI11_PARSE(app, argc, argv);

    try {
        check_device();
        if (mk->parsed()) return cmd_make_dataset(out_dir, count, size, seed);
        if (tc->parsed()) return cmd_train_codec(config_path, seed, has_seed, out_dir);
        if (wu->parsed()) return cmd_warmup(config_path, seed, has_seed, out_dir);
        if (ft->parsed())
            return cmd_finetune(config_path, codec_path, gan_path, gamma, has_gamma, preset,
                                seed, has_seed, out_dir);
        if (gen->parsed()) return cmd_generate(model, count, seed, out_dir);
        if (vf->parsed())
            return cmd_verify(codec_path, watermark_hex, images_dir, config_path, out_dir);
        if (sw->parsed())
            return cmd_sweep(model, augmented_model, codec_path, watermark_hex, spec_name,
                             samples, seed, out_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidationError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kValidationError;
}
