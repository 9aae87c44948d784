#pragma once

// GF(2^128) multiplication with the GCM reduction polynomial and the GHASH
// universal hash built on it. Bit order follows the GCM convention: the most
// significant bit of byte 0 is the coefficient of x^0.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "busfw/aes.hpp"

namespace busfw {

struct Gf128 {
    std::uint64_t hi = 0;  // bytes 0..7
    std::uint64_t lo = 0;  // bytes 8..15

    static Gf128 from_bytes(const Block128& b) {
        Gf128 v;
        for (int i = 0; i < 8; ++i) v.hi = (v.hi << 8) | b[i];
        for (int i = 8; i < 16; ++i) v.lo = (v.lo << 8) | b[i];
        return v;
    }
    Block128 to_bytes() const {
        Block128 b{};
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
        for (int i = 0; i < 8; ++i) b[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
        return b;
    }
    Gf128 operator^(const Gf128& o) const { return Gf128{hi ^ o.hi, lo ^ o.lo}; }
    bool operator==(const Gf128& o) const = default;
};

// Shift-and-add product x*y mod x^128 + x^7 + x^2 + x + 1.
inline Gf128 gf128_mul(const Gf128& x, const Gf128& y) {
    Gf128 z{0, 0};
    Gf128 v = y;
    for (int i = 0; i < 128; ++i) {
        const std::uint64_t word = i < 64 ? x.hi : x.lo;
        const int bit = 63 - (i & 63);
        if ((word >> bit) & 1) {
            z.hi ^= v.hi;
            z.lo ^= v.lo;
        }
        const bool lsb = v.lo & 1;
        v.lo = (v.lo >> 1) | (v.hi << 63);
        v.hi >>= 1;
        if (lsb) v.hi ^= 0xe100000000000000ull;  // R = 11100001 || 0^120
    }
    return z;
}

// GHASH over a sequence of 16-byte blocks: y_i = (y_{i-1} xor d_i) * H.
class Ghash {
public:
    explicit Ghash(const Block128& h) : h_(Gf128::from_bytes(h)) {}

    void update(const Block128& block) { y_ = gf128_mul(y_ ^ Gf128::from_bytes(block), h_); }

    Block128 digest() const { return y_.to_bytes(); }

private:
    Gf128 h_;
    Gf128 y_{0, 0};
};

// One-shot GHASH of a byte string; data is zero-padded to a whole number of
// 16-byte blocks.
inline Block128 ghash(const Block128& h, std::span<const std::uint8_t> data) {
    Ghash g(h);
    std::size_t off = 0;
    while (off < data.size()) {
        Block128 blk{};
        const std::size_t n = std::min<std::size_t>(16, data.size() - off);
        for (std::size_t i = 0; i < n; ++i) blk[i] = data[off + i];
        g.update(blk);
        off += n;
    }
    return g.digest();
}

}  // namespace busfw
