#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "ganmark/checkpoint.hpp"
#include "ganmark/config.hpp"
#include "ganmark/dataset.hpp"
#include "ganmark/manifest.hpp"
#include "test_util.hpp"

using namespace ganmark;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ganmark_ckpt_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static inline int counter = 0;
};

template <class T>
uint64_t params_hash(const std::vector<nn::Param<T>*>& ps) {
    uint64_t h = 1469598103934665603ull;
    for (auto* p : ps) h ^= tensor_hash(p->value) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace

TEST(CodecCheckpoint, RoundTripPreservesParameters) {
    TempDir tmp;
    CodecConfig cfg;
    cfg.image_size = 16;
    cfg.payload = 8;
    cfg.hidden_channels = 4;
    cfg.payload_channels = 1;
    Rng rng(1);
    CodecCheckpoint<float> ckpt;
    ckpt.codec = build_codec<float>(cfg, rng);
    ckpt.metrics.mse = 0.001;
    ckpt.metrics.bit_accuracy = 0.997;
    ckpt.metrics.psnr = 31.5;
    ckpt.metrics.ssim = 0.98;
    ckpt.metrics.final_loss = 0.01;
    ckpt.success = true;
    uint64_t enc_h = params_hash(ckpt.codec.encoder->params());
    uint64_t dec_h = ckpt.codec.decoder->param_hash();

    std::string p = (tmp.path / "codec.ckpt").string();
    save_codec_checkpoint(ckpt, p);
    auto back = load_codec_checkpoint<float>(p);
    EXPECT_EQ(params_hash(back.codec.encoder->params()), enc_h);
    EXPECT_EQ(back.codec.decoder->param_hash(), dec_h);
    EXPECT_EQ(back.metrics.bit_accuracy, 0.997);
    EXPECT_EQ(back.metrics.psnr, 31.5);
    EXPECT_TRUE(back.success);
    EXPECT_EQ(back.codec.config.payload, 8);

    // save -> load -> save: byte-identical files
    std::string p2 = (tmp.path / "codec2.ckpt").string();
    save_codec_checkpoint(back, p2);
    std::ifstream f1(p, std::ios::binary), f2(p2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), {});
    std::string c2((std::istreambuf_iterator<char>(f2)), {});
    // timestamps are not stored in checkpoints, so the bytes must match
    EXPECT_EQ(c1, c2);
}

TEST(GanCheckpoint, RoundTripIncludesNormState) {
    TempDir tmp;
    GanConfig cfg;
    cfg.image_size = 8;
    cfg.latent.dim = 6;
    cfg.batch_size = 4;
    cfg.warmup_iterations = 4;
    Rng drng(2);
    auto ds = make_toy_dataset<float>(8, 8, drng);
    Rng rng(3);
    auto ckpt = train_gan_warmup(ds, cfg, rng);
    uint64_t g_h = params_hash(ckpt.generator->params());
    uint64_t d_h = params_hash(ckpt.discriminator->params());

    std::string p = (tmp.path / "gan.ckpt").string();
    save_gan_checkpoint(ckpt, p);
    auto back = load_gan_checkpoint<float>(p);
    EXPECT_EQ(params_hash(back.generator->params()), g_h);
    EXPECT_EQ(params_hash(back.discriminator->params()), d_h);
    EXPECT_EQ(back.iteration, 4);
    EXPECT_EQ(back.status, "trained");

    // generation after reload reproduces the original generator exactly,
    // which also covers the batch-norm running statistics
    Rng zr1(4), zr2(4);
    Tensor<float> y1 = generate(*ckpt.generator, sample_latent<float>(cfg.latent, 2, zr1));
    Tensor<float> y2 = generate(*back.generator, sample_latent<float>(cfg.latent, 2, zr2));
    for (int64_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(y1.data[i], y2.data[i]);

    EXPECT_THROW(load_codec_checkpoint<float>(p), std::runtime_error);  // wrong kind
}

TEST(WatermarkedGanCheckpoint, RoundTrip) {
    TempDir tmp;
    GanConfig cfg;
    cfg.image_size = 8;
    cfg.latent.dim = 6;
    Rng rng(5);
    WatermarkedGanCheckpoint<float> ckpt;
    ckpt.gan_config = cfg;
    ckpt.generator = std::make_unique<Generator<float>>(cfg, rng);
    ckpt.embed_config.gamma = 3.0;
    ckpt.embed_config.w_gt = BitString::random(8, rng);
    ckpt.decoder_hash = 0xdeadbeefcafef00dull;
    ckpt.final_bit_accuracy = 0.978;
    ckpt.status = "trained";
    uint64_t g_h = params_hash(ckpt.generator->params());

    std::string p = (tmp.path / "wgan.ckpt").string();
    save_wgan_checkpoint(ckpt, p);
    auto back = load_wgan_checkpoint<float>(p);
    EXPECT_EQ(params_hash(back.generator->params()), g_h);
    EXPECT_EQ(back.decoder_hash, 0xdeadbeefcafef00dull);
    EXPECT_EQ(back.final_bit_accuracy, 0.978);
    EXPECT_EQ(back.embed_config.gamma, 3.0);
    EXPECT_EQ(back.embed_config.w_gt, ckpt.embed_config.w_gt);
    EXPECT_EQ(back.status, "trained");
}

TEST(Checkpoint, RejectsCorruptedFiles) {
    TempDir tmp;
    std::string p = (tmp.path / "bad.ckpt").string();
    {
        std::ofstream f(p, std::ios::binary);
        f << "NOTACKPT garbage";
    }
    EXPECT_THROW(CheckpointReader r(p), std::runtime_error);
    EXPECT_THROW(load_codec_checkpoint<float>(p), std::runtime_error);
    EXPECT_THROW(CheckpointReader r((tmp.path / "missing.ckpt").string()), std::runtime_error);

    // flip a byte deep inside a valid checkpoint: the decoder hash check trips
    CodecConfig cfg;
    cfg.image_size = 16;
    cfg.payload = 8;
    cfg.hidden_channels = 4;
    cfg.payload_channels = 1;
    Rng rng(6);
    CodecCheckpoint<float> ckpt;
    ckpt.codec = build_codec<float>(cfg, rng);
    std::string good = (tmp.path / "good.ckpt").string();
    save_codec_checkpoint(ckpt, good);
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    bytes[bytes.size() - 5] ^= 0x40;  // inside the last (decoder) blob
    std::string tampered = (tmp.path / "tampered.ckpt").string();
    {
        std::ofstream out(tampered, std::ios::binary);
        out << bytes;
    }
    EXPECT_THROW(load_codec_checkpoint<float>(tampered), std::runtime_error);
}

TEST(ConfigJson, RoundTrips) {
    CodecConfig cc;
    cc.image_size = 64;
    cc.payload = 100;
    cc.lambda_weight = 2.5;
    json j = cc;
    CodecConfig cc2 = j.get<CodecConfig>();
    EXPECT_EQ(cc2.image_size, 64);
    EXPECT_EQ(cc2.payload, 100);
    EXPECT_EQ(cc2.lambda_weight, 2.5);

    GanConfig gc;
    gc.latent.dim = 99;
    gc.saturating_g_loss = true;
    json jg = gc;
    GanConfig gc2 = jg.get<GanConfig>();
    EXPECT_EQ(gc2.latent.dim, 99);
    EXPECT_TRUE(gc2.saturating_g_loss);

    EmbedConfig ec;
    ec.gamma = 0.03;
    ec.w_gt = BitString({1, 0, 1, 0, 1, 1, 0, 0});
    json je = ec;
    EXPECT_EQ(je.at("watermark_hex").get<std::string>(), ec.w_gt.to_hex());
    EmbedConfig ec2 = je.get<EmbedConfig>();
    EXPECT_EQ(ec2.gamma, 0.03);
    EXPECT_EQ(ec2.w_gt, ec.w_gt);

    AugmentationConfig ac;
    ac.noise_sigma_hi = 0.2;
    ac.jpeg_quality_lo = 30;
    json ja = ac;
    AugmentationConfig ac2 = ja.get<AugmentationConfig>();
    EXPECT_EQ(ac2.noise_sigma_hi, 0.2);
    EXPECT_EQ(ac2.jpeg_quality_lo, 30);

    VerifyConfig vc;
    vc.alpha = 1e-4;
    json jv = vc;
    EXPECT_EQ(jv.get<VerifyConfig>().alpha, 1e-4);

    // partial documents keep defaults for missing keys
    RunConfig rc = json::parse(R"({"seed": 7, "codec": {"payload": 42}})").get<RunConfig>();
    EXPECT_EQ(rc.seed, 7u);
    EXPECT_EQ(rc.codec.payload, 42);
    EXPECT_EQ(rc.gan.image_size, GanConfig{}.image_size);
}

TEST(RunConfig, CrossSectionValidation) {
    RunConfig rc;
    rc.codec.image_size = 32;
    rc.gan.image_size = 32;
    EXPECT_NO_THROW(rc.validate());
    rc.gan.image_size = 64;
    EXPECT_THROW(rc.validate(), std::invalid_argument);
    rc.gan.image_size = 32;
    rc.embed.w_gt = BitString::zeros(10);  // codec payload default differs
    ASSERT_NE(rc.codec.payload, 10);
    EXPECT_THROW(rc.validate(), std::invalid_argument);
}

TEST(Presets, PublishedRecipes) {
    auto began = gan_preset("began");
    EXPECT_EQ(began.batch_size, 64);
    EXPECT_EQ(began.warmup_iterations, 400000);
    EXPECT_EQ(began.finetune_iterations, 3000);
    EXPECT_DOUBLE_EQ(began.gamma, 0.03);

    auto pggan = gan_preset("pggan");
    EXPECT_EQ(pggan.batch_size, 16);
    EXPECT_EQ(pggan.warmup_iterations, 360000);
    EXPECT_EQ(pggan.finetune_iterations, 1000);
    EXPECT_DOUBLE_EQ(pggan.gamma, 3.0);

    auto sg2 = gan_preset("stylegan2");
    EXPECT_EQ(sg2.batch_size, 64);
    EXPECT_EQ(sg2.warmup_iterations, 200000);
    EXPECT_EQ(sg2.finetune_iterations, 1000);
    EXPECT_DOUBLE_EQ(sg2.gamma, 3.0);

    EXPECT_THROW(gan_preset("nope"), std::invalid_argument);

    RunConfig rc;
    apply_preset(rc, "desk32");
    EXPECT_EQ(rc.gan.batch_size, 32);
    EXPECT_EQ(rc.gan.warmup_iterations, 8000);
    EXPECT_EQ(rc.embed.finetune_iterations, 2000);
    EXPECT_DOUBLE_EQ(rc.embed.gamma, 3.0);
    EXPECT_EQ(rc.embed.batch_size, 32);
}

TEST(ManifestFile, WriteAndParse) {
    TempDir tmp;
    Manifest m;
    m.set("gamma", 3.0);
    m.set("watermark_hex", "a5a5");
    m.set("artifacts", json{{"decoder_hash", 12345}});
    std::string p = (tmp.path / "manifest.json").string();
    m.write(p);
    ASSERT_TRUE(fs::exists(p));
    EXPECT_FALSE(fs::exists(p + ".tmp"));  // atomic rename leaves no temp file

    std::ifstream f(p);
    json back = json::parse(f);
    EXPECT_EQ(back.at("gamma").get<double>(), 3.0);
    EXPECT_EQ(back.at("watermark_hex").get<std::string>(), "a5a5");
    EXPECT_EQ(back.at("artifacts").at("decoder_hash").get<int>(), 12345);
    EXPECT_EQ(back.at("tool_version").get<std::string>(), kToolVersion);
    EXPECT_GT(back.at("created_unix").get<int64_t>(), 0);
}
