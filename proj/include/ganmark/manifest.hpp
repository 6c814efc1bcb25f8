#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include "ganmark/config.hpp"

namespace ganmark {

inline constexpr const char* kToolVersion = "0.1.0";

// Run manifest: config snapshot, artifact hashes, timestamps and the metric
// summary. Written atomically at run end (write-temp-then-rename) and
// immutable afterwards.
class Manifest {
public:
    Manifest() {
        doc_["tool_version"] = kToolVersion;
        doc_["created_unix"] = static_cast<int64_t>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
    }

    json& doc() { return doc_; }

    void set(const std::string& key, const json& value) { doc_[key] = value; }

    void write(const std::string& path) const {
        std::string tmp = path + ".tmp";
        {
            std::ofstream f(tmp, std::ios::trunc);
            if (!f) throw std::runtime_error("manifest: cannot write " + tmp);
            f << doc_.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

private:
    json doc_ = json::object();
};

}  // namespace ganmark
