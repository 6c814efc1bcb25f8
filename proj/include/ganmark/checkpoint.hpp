#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/codec.hpp"
#include "ganmark/config.hpp"
#include "ganmark/embed.hpp"
#include "ganmark/gan.hpp"

namespace ganmark {

// Versioned checkpoint container: magic, version, a JSON header describing
// kind/config/metrics and the tensor directory, then the raw parameter blobs
// in directory order. Round-trips load -> save -> load to identical bytes.

inline constexpr char kCheckpointMagic[4] = {'G', 'M', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <class T>
constexpr const char* dtype_name() {
    if constexpr (sizeof(T) == 4) return "f32";
    else return "f64";
}

class CheckpointWriter {
public:
    explicit CheckpointWriter(std::string kind) { header_["kind"] = std::move(kind); }

    json& header() { return header_; }

    template <class T>
    void add_tensor(const std::string& name, const Tensor<T>& t) {
        json entry{{"name", name}, {"dtype", dtype_name<T>()}, {"shape", t.shape}};
        header_["tensors"].push_back(entry);
        size_t off = blob_.size();
        blob_.resize(off + t.data.size() * sizeof(T));
        std::memcpy(blob_.data() + off, t.data.data(), t.data.size() * sizeof(T));
    }

    // write-temp-then-rename so readers never see a partial file
    void write(const std::string& path) const {
        std::string tmp = path + ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
            f.write(kCheckpointMagic, 4);
            uint32_t ver = kCheckpointVersion;
            f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
            std::string hdr = header_.dump();
            uint64_t hlen = hdr.size();
            f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
            f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
            f.write(reinterpret_cast<const char*>(blob_.data()),
                    static_cast<std::streamsize>(blob_.size()));
            if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
        }
        std::filesystem::rename(tmp, path);
    }

private:
    json header_ = json::object();
    std::vector<unsigned char> blob_;
};

class CheckpointReader {
public:
    explicit CheckpointReader(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
        char magic[4];
        f.read(magic, 4);
        if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
            throw std::runtime_error("checkpoint: bad magic in " + path);
        uint32_t ver = 0;
        f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
        if (ver != kCheckpointVersion)
            throw std::runtime_error("checkpoint: unsupported version in " + path);
        uint64_t hlen = 0;
        f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
        std::string hdr(hlen, '\0');
        f.read(hdr.data(), static_cast<std::streamsize>(hlen));
        header_ = json::parse(hdr);
        blob_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    const json& header() const { return header_; }
    std::string kind() const { return header_.at("kind").get<std::string>(); }

    // Tensors must be consumed in directory order.
    template <class T>
    void read_tensor_into(const std::string& name, Tensor<T>& t) {
        const auto& dir = header_.at("tensors");
        if (next_ >= dir.size()) throw std::runtime_error("checkpoint: tensor directory exhausted");
        const auto& entry = dir.at(next_);
        if (entry.at("name").get<std::string>() != name)
            throw std::runtime_error("checkpoint: expected tensor '" + name + "', found '" +
                                     entry.at("name").get<std::string>() + "'");
        if (entry.at("dtype").get<std::string>() != dtype_name<T>())
            throw std::runtime_error("checkpoint: dtype mismatch for tensor " + name);
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != t.shape)
            throw std::runtime_error("checkpoint: shape mismatch for tensor " + name);
        size_t bytes = t.data.size() * sizeof(T);
        if (offset_ + bytes > blob_.size())
            throw std::runtime_error("checkpoint: truncated blob section");
        std::memcpy(t.data.data(), blob_.data() + offset_, bytes);
        offset_ += bytes;
        ++next_;
    }

private:
    json header_;
    std::vector<unsigned char> blob_;
    size_t offset_ = 0;
    size_t next_ = 0;
};

namespace ckpt_detail {

template <class T>
void add_params(CheckpointWriter& w, const std::string& prefix,
                const std::vector<nn::Param<T>*>& ps) {
    for (size_t i = 0; i < ps.size(); ++i)
        w.add_tensor(prefix + std::to_string(i), ps[i]->value);
}

template <class T>
void read_params(CheckpointReader& r, const std::string& prefix,
                 const std::vector<nn::Param<T>*>& ps) {
    for (size_t i = 0; i < ps.size(); ++i)
        r.read_tensor_into(prefix + std::to_string(i), ps[i]->value);
}

template <class T>
void add_state(CheckpointWriter& w, const std::string& prefix,
               const std::vector<Tensor<T>*>& ts) {
    for (size_t i = 0; i < ts.size(); ++i) w.add_tensor(prefix + std::to_string(i), *ts[i]);
}

template <class T>
void read_state(CheckpointReader& r, const std::string& prefix,
                const std::vector<Tensor<T>*>& ts) {
    for (size_t i = 0; i < ts.size(); ++i) r.read_tensor_into(prefix + std::to_string(i), *ts[i]);
}

}  // namespace ckpt_detail

// ---- codec ----

template <class T>
void save_codec_checkpoint(CodecCheckpoint<T>& ckpt, const std::string& path) {
    CheckpointWriter w("codec");
    w.header()["config"] = ckpt.codec.config;
    w.header()["metrics"] = {{"mse", ckpt.metrics.mse},
                             {"bit_accuracy", ckpt.metrics.bit_accuracy},
                             {"psnr", ckpt.metrics.psnr},
                             {"ssim", ckpt.metrics.ssim},
                             {"final_loss", ckpt.metrics.final_loss}};
    w.header()["success"] = ckpt.success;
    w.header()["decoder_hash"] = ckpt.codec.decoder->param_hash();
    ckpt_detail::add_params(w, "enc.", ckpt.codec.encoder->params());
    ckpt_detail::add_params(w, "dec.", ckpt.codec.decoder->params());
    w.write(path);
}

template <class T>
CodecCheckpoint<T> load_codec_checkpoint(const std::string& path) {
    CheckpointReader r(path);
    if (r.kind() != "codec") throw std::runtime_error("not a codec checkpoint: " + path);
    CodecCheckpoint<T> ckpt;
    CodecConfig cfg = r.header().at("config").get<CodecConfig>();
    Rng init_rng(0);  // values are overwritten by the stored parameters
    ckpt.codec = build_codec<T>(cfg, init_rng);
    ckpt_detail::read_params(r, "enc.", ckpt.codec.encoder->params());
    ckpt_detail::read_params(r, "dec.", ckpt.codec.decoder->params());
    const auto& m = r.header().at("metrics");
    ckpt.metrics.mse = m.at("mse");
    ckpt.metrics.bit_accuracy = m.at("bit_accuracy");
    ckpt.metrics.psnr = m.at("psnr");
    ckpt.metrics.ssim = m.at("ssim");
    ckpt.metrics.final_loss = m.at("final_loss");
    ckpt.success = r.header().at("success");
    uint64_t expect = r.header().at("decoder_hash");
    if (ckpt.codec.decoder->param_hash() != expect)
        throw std::runtime_error("codec checkpoint: decoder hash mismatch after load");
    return ckpt;
}

// ---- gan ----

template <class T>
void save_gan_checkpoint(GanCheckpoint<T>& ckpt, const std::string& path) {
    CheckpointWriter w("gan");
    w.header()["config"] = ckpt.config;
    w.header()["iteration"] = ckpt.iteration;
    w.header()["status"] = ckpt.status;
    ckpt_detail::add_params(w, "g.", ckpt.generator->params());
    ckpt_detail::add_state(w, "g.norm.", ckpt.generator->norm_state());
    ckpt_detail::add_params(w, "d.", ckpt.discriminator->params());
    w.write(path);
}

template <class T>
GanCheckpoint<T> load_gan_checkpoint(const std::string& path) {
    CheckpointReader r(path);
    if (r.kind() != "gan") throw std::runtime_error("not a gan checkpoint: " + path);
    GanCheckpoint<T> ckpt;
    ckpt.config = r.header().at("config").get<GanConfig>();
    Rng init_rng(0);
    ckpt.generator = std::make_unique<Generator<T>>(ckpt.config, init_rng);
    ckpt.discriminator = std::make_unique<Discriminator<T>>(ckpt.config, init_rng);
    ckpt_detail::read_params(r, "g.", ckpt.generator->params());
    ckpt_detail::read_state(r, "g.norm.", ckpt.generator->norm_state());
    ckpt_detail::read_params(r, "d.", ckpt.discriminator->params());
    ckpt.iteration = r.header().at("iteration");
    ckpt.status = r.header().at("status");
    return ckpt;
}

// ---- watermarked gan ----

template <class T>
void save_wgan_checkpoint(WatermarkedGanCheckpoint<T>& ckpt, const std::string& path) {
    CheckpointWriter w("wgan");
    w.header()["gan_config"] = ckpt.gan_config;
    w.header()["embed_config"] = ckpt.embed_config;
    w.header()["decoder_hash"] = ckpt.decoder_hash;
    w.header()["final_bit_accuracy"] = ckpt.final_bit_accuracy;
    w.header()["status"] = ckpt.status;
    ckpt_detail::add_params(w, "g.", ckpt.generator->params());
    ckpt_detail::add_state(w, "g.norm.", ckpt.generator->norm_state());
    w.write(path);
}

template <class T>
WatermarkedGanCheckpoint<T> load_wgan_checkpoint(const std::string& path) {
    CheckpointReader r(path);
    if (r.kind() != "wgan") throw std::runtime_error("not a watermarked-gan checkpoint: " + path);
    WatermarkedGanCheckpoint<T> ckpt;
    ckpt.gan_config = r.header().at("gan_config").get<GanConfig>();
    ckpt.embed_config = r.header().at("embed_config").get<EmbedConfig>();
    Rng init_rng(0);
    ckpt.generator = std::make_unique<Generator<T>>(ckpt.gan_config, init_rng);
    ckpt_detail::read_params(r, "g.", ckpt.generator->params());
    ckpt_detail::read_state(r, "g.norm.", ckpt.generator->norm_state());
    ckpt.decoder_hash = r.header().at("decoder_hash");
    ckpt.final_bit_accuracy = r.header().at("final_bit_accuracy");
    ckpt.status = r.header().at("status");
    return ckpt;
}

}  // namespace ganmark
