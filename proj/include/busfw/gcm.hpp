#pragma once

// Counter-mode AES + GHASH datapath of the cryptographic module, with its
// cycle model. Each 32-bit data word is zero-padded to 128 bits and consumes
// one keystream block; the counter block binds the keystream to a 64-bit
// timestamp and the 32-bit block address so that stale ciphertext can never
// authenticate again.
//
// Counter block layout: timestamp(64) || block_address(32) || word_counter(32),
// word_counter 0 reserved for the tag mask, data words use 1..N.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "busfw/aes.hpp"
#include "busfw/ghash.hpp"

namespace busfw {

// Latency of protecting N 32-bit words: a 10-cycle pipeline fill, then per
// word 10 cycles of block encryption when ciphering and 2 cycles of Galois
// multiplication when authenticating. With neither feature enabled the module
// is bypassed entirely.
inline std::uint64_t crypto_cycles(std::uint64_t n_words, bool cmode, bool imode) {
    if (!cmode && !imode) return 0;
    std::uint64_t per_word = 0;
    if (cmode) per_word += 10;
    if (imode) per_word += 2;
    return 10 + per_word * n_words;
}

struct GcmContext {
    explicit GcmContext(const Block128& key, std::uint64_t timestamp = 0)
        : cipher(key), timestamp(timestamp), h(cipher.encrypt_block(Block128{})) {}

    Aes128 cipher;
    std::uint64_t timestamp;                       // monotonic write counter
    Block128 h;                                    // hash subkey H = Ek(0^128)
    std::optional<std::vector<std::uint8_t>> aad;  // default: 32-bit block address
};

struct ProtectedBlock {
    std::vector<std::uint32_t> ciphertext;
    std::optional<Block128> tag;  // present iff imode
    std::uint64_t timestamp = 0;
};

struct AuthFailure {
    std::string reason;
};

namespace gcm_detail {

inline Block128 counter_block(std::uint64_t timestamp, std::uint32_t block_address,
                              std::uint32_t word_counter) {
    Block128 b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(timestamp >> (56 - 8 * i));
    for (int i = 0; i < 4; ++i) b[8 + i] = static_cast<std::uint8_t>(block_address >> (24 - 8 * i));
    for (int i = 0; i < 4; ++i) b[12 + i] = static_cast<std::uint8_t>(word_counter >> (24 - 8 * i));
    return b;
}

inline std::uint32_t keystream_word(const GcmContext& ctx, std::uint64_t ts, std::uint32_t addr,
                                    std::uint32_t counter) {
    const Block128 ks = ctx.cipher.encrypt_block(counter_block(ts, addr, counter));
    return (std::uint32_t(ks[0]) << 24) | (std::uint32_t(ks[1]) << 16) | (std::uint32_t(ks[2]) << 8) |
           std::uint32_t(ks[3]);
}

inline std::vector<std::uint8_t> effective_aad(const GcmContext& ctx, std::uint32_t block_address) {
    if (ctx.aad) return *ctx.aad;
    return {static_cast<std::uint8_t>(block_address >> 24), static_cast<std::uint8_t>(block_address >> 16),
            static_cast<std::uint8_t>(block_address >> 8), static_cast<std::uint8_t>(block_address)};
}

// Tag over (AAD, ciphertext words), GCM-structured: padded AAD blocks, one
// padded block per 32-bit ciphertext word, a length block, then the mask
// block Ek(counter 0).
inline Block128 compute_tag(const GcmContext& ctx, std::uint64_t ts, std::uint32_t addr,
                            std::span<const std::uint32_t> ct) {
    Ghash g(ctx.h);
    const std::vector<std::uint8_t> aad = effective_aad(ctx, addr);
    for (std::size_t off = 0; off < aad.size(); off += 16) {
        Block128 blk{};
        for (std::size_t i = 0; i < 16 && off + i < aad.size(); ++i) blk[i] = aad[off + i];
        g.update(blk);
    }
    for (std::uint32_t w : ct) {
        Block128 blk{};
        blk[0] = static_cast<std::uint8_t>(w >> 24);
        blk[1] = static_cast<std::uint8_t>(w >> 16);
        blk[2] = static_cast<std::uint8_t>(w >> 8);
        blk[3] = static_cast<std::uint8_t>(w);
        g.update(blk);
    }
    Block128 len{};
    const std::uint64_t aad_bits = aad.size() * 8;
    const std::uint64_t data_bits = ct.size() * 32;
    for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(aad_bits >> (56 - 8 * i));
    for (int i = 0; i < 8; ++i) len[8 + i] = static_cast<std::uint8_t>(data_bits >> (56 - 8 * i));
    g.update(len);

    Block128 tag = g.digest();
    const Block128 mask = ctx.cipher.encrypt_block(counter_block(ts, addr, 0));
    for (int i = 0; i < 16; ++i) tag[i] ^= mask[i];
    return tag;
}

}  // namespace gcm_detail

// Protects a run of 32-bit words under a fresh timestamp. Returns the
// protected block and the cycle cost of the operation.
inline std::pair<ProtectedBlock, std::uint64_t> gcm_protect(GcmContext& ctx, std::uint32_t block_address,
                                                            std::span<const std::uint32_t> plaintext,
                                                            bool cmode, bool imode) {
    ProtectedBlock out;
    out.timestamp = cmode || imode ? ++ctx.timestamp : ctx.timestamp;
    out.ciphertext.reserve(plaintext.size());
    for (std::size_t i = 0; i < plaintext.size(); ++i) {
        std::uint32_t w = plaintext[i];
        if (cmode)
            w ^= gcm_detail::keystream_word(ctx, out.timestamp, block_address,
                                            static_cast<std::uint32_t>(i + 1));
        out.ciphertext.push_back(w);
    }
    if (imode) out.tag = gcm_detail::compute_tag(ctx, out.timestamp, block_address, out.ciphertext);
    return {std::move(out), crypto_cycles(plaintext.size(), cmode, imode)};
}

using UnprotectResult = std::variant<std::vector<std::uint32_t>, AuthFailure>;

// Inverse of gcm_protect. The tag and timestamp must come from the trusted
// store, never from the untrusted memory image: authentication recomputes the
// tag over the presented ciphertext under the trusted timestamp and compares.
inline std::pair<UnprotectResult, std::uint64_t> gcm_unprotect(const GcmContext& ctx,
                                                               std::uint32_t block_address,
                                                               const ProtectedBlock& block, bool cmode,
                                                               bool imode) {
    const std::uint64_t cycles = crypto_cycles(block.ciphertext.size(), cmode, imode);
    if (imode) {
        if (!block.tag) return {AuthFailure{"no stored tag for integrity-protected block"}, cycles};
        const Block128 expect =
            gcm_detail::compute_tag(ctx, block.timestamp, block_address, block.ciphertext);
        if (expect != *block.tag) return {AuthFailure{"tag mismatch"}, cycles};
    }
    std::vector<std::uint32_t> plain;
    plain.reserve(block.ciphertext.size());
    for (std::size_t i = 0; i < block.ciphertext.size(); ++i) {
        std::uint32_t w = block.ciphertext[i];
        if (cmode)
            w ^= gcm_detail::keystream_word(ctx, block.timestamp, block_address,
                                            static_cast<std::uint32_t>(i + 1));
        plain.push_back(w);
    }
    return {std::move(plain), cycles};
}

}  // namespace busfw
