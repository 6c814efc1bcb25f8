#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganmark/rng.hpp"

namespace ganmark {

// Fixed-length binary payload; the owner's signature embedded in every image.
class BitString {
public:
    BitString() = default;

    explicit BitString(std::vector<uint8_t> bits) : bits_(std::move(bits)) {
        for (uint8_t b : bits_)
            if (b != 0 && b != 1) throw std::invalid_argument("BitString: bits must be 0 or 1");
    }

    static BitString zeros(int n) { return BitString(std::vector<uint8_t>(check_len(n), 0)); }

    static BitString random(int n, Rng& rng) {
        std::vector<uint8_t> b(check_len(n));
        for (auto& v : b) v = rng.bernoulli(0.5) ? 1 : 0;
        return BitString(std::move(b));
    }

    // Owner watermark derived from a key: a seeded uniform bit draw.
    static BitString from_owner_key(uint64_t key, int n) {
        Rng rng(key);
        return random(n, rng);
    }

    int length() const { return static_cast<int>(bits_.size()); }
    uint8_t bit(int i) const { return bits_.at(static_cast<size_t>(i)); }
    const std::vector<uint8_t>& bits() const { return bits_; }

    BitString complement() const {
        std::vector<uint8_t> b(bits_.size());
        for (size_t i = 0; i < bits_.size(); ++i) b[i] = bits_[i] ? 0 : 1;
        return BitString(std::move(b));
    }

    bool operator==(const BitString& o) const { return bits_ == o.bits_; }

    // Hex exchange format: bits packed MSB-first, padded with zeros to a
    // nibble boundary; the payload length travels separately.
    std::string to_hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out;
        int acc = 0, nb = 0;
        for (uint8_t b : bits_) {
            acc = (acc << 1) | b;
            if (++nb == 4) {
                out.push_back(digits[acc]);
                acc = 0;
                nb = 0;
            }
        }
        if (nb > 0) out.push_back(digits[acc << (4 - nb)]);
        return out;
    }

    static BitString from_hex(const std::string& hex, int n) {
        check_len(n);
        if (static_cast<int>(hex.size()) * 4 < n)
            throw std::invalid_argument("BitString::from_hex: hex string too short for payload");
        std::vector<uint8_t> b;
        b.reserve(hex.size() * 4);
        for (char c : hex) {
            int v;
            if (c >= '0' && c <= '9') v = c - '0';
            else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
            else throw std::invalid_argument("BitString::from_hex: invalid hex digit");
            for (int k = 3; k >= 0; --k) b.push_back(static_cast<uint8_t>((v >> k) & 1));
        }
        for (size_t i = n; i < b.size(); ++i)
            if (b[i]) throw std::invalid_argument("BitString::from_hex: nonzero padding bits");
        b.resize(static_cast<size_t>(n));
        return BitString(std::move(b));
    }

private:
    static int check_len(int n) {
        if (n <= 0) throw std::invalid_argument("BitString: length must be positive");
        return n;
    }
    std::vector<uint8_t> bits_;
};

// Per-bit decoder probabilities, each strictly inside (0,1).
struct SoftBits {
    std::vector<double> values;

    explicit SoftBits(std::vector<double> v) : values(std::move(v)) {
        for (double p : values)
            if (!(p > 0.0 && p < 1.0))
                throw std::invalid_argument("SoftBits: values must lie strictly in (0,1)");
    }

    int length() const { return static_cast<int>(values.size()); }
};

// Ties at exactly 0.5 map to bit 1.
inline BitString hard_threshold(const SoftBits& s) {
    std::vector<uint8_t> b(s.values.size());
    for (size_t i = 0; i < b.size(); ++i) b[i] = s.values[i] >= 0.5 ? 1 : 0;
    return BitString(std::move(b));
}

// Fraction of matching positions.
inline double bit_accuracy(const BitString& a, const BitString& b) {
    if (a.length() != b.length())
        throw std::invalid_argument("bit_accuracy: length mismatch");
    int match = 0;
    for (int i = 0; i < a.length(); ++i)
        if (a.bit(i) == b.bit(i)) ++match;
    return static_cast<double>(match) / a.length();
}

}  // namespace ganmark
