#include <doctest.h>

#include <random>
#include <set>

#include "busfw/aes.hpp"
#include "busfw/gcm.hpp"
#include "busfw/ghash.hpp"
#include "support/test_oracles.hpp"

using namespace busfw;
using namespace busfw::test_oracles;

namespace {

Block128 random_block(std::mt19937_64& rng) {
    Block128 b;
    for (auto& byte : b) byte = static_cast<std::uint8_t>(rng());
    return b;
}

Block128 gf_mul_impl(const Block128& a, const Block128& b) {
    return gf128_mul(Gf128::from_bytes(a), Gf128::from_bytes(b)).to_bytes();
}

}  // namespace

TEST_CASE("aes128 known answers") {
    // FIPS-197 appendix C.1
    CHECK(to_hex(aes128_encrypt_block(from_hex("000102030405060708090a0b0c0d0e0f"),
                                      from_hex("00112233445566778899aabbccddeeff"))) ==
          "69c4e0d86a7b0430d8cdb78070b4c55a");
    // all-zero key and block
    CHECK(to_hex(aes128_encrypt_block(Block128{}, Block128{})) == "66e94bd4ef8a2c3b884cfa59ca342b2e");
    // zero key, low counter blocks (cross-checked against openssl)
    CHECK(to_hex(aes128_encrypt_block(Block128{}, from_hex("00000000000000000000000000000001"))) ==
          "58e2fccefa7e3061367f1d57a4e7455a");
    CHECK(to_hex(aes128_encrypt_block(Block128{}, from_hex("00000000000000000000000000000002"))) ==
          "0388dace60b6a392f328c2b971b2fe78");
}

TEST_CASE("aes128 is a permutation under a fixed key") {
    std::mt19937_64 rng(0x5eed);
    Aes128 aes(from_hex("000102030405060708090a0b0c0d0e0f"));
    std::set<std::string> outputs;
    std::set<std::string> inputs;
    for (int i = 0; i < 256; ++i) {
        Block128 in = random_block(rng);
        if (!inputs.insert(to_hex(in)).second) continue;
        outputs.insert(to_hex(aes.encrypt_block(in)));
    }
    CHECK(outputs.size() == inputs.size());
}

TEST_CASE("aes128 outputs differ across keys") {
    std::mt19937_64 rng(0xbeef);
    int differing = 0;
    for (int i = 0; i < 256; ++i) {
        const Block128 block = random_block(rng);
        const Block128 k1 = random_block(rng);
        Block128 k2 = k1;
        k2[i % 16] ^= static_cast<std::uint8_t>(1 + (rng() % 255));
        if (aes128_encrypt_block(k1, block) != aes128_encrypt_block(k2, block)) ++differing;
    }
    CHECK(differing >= 255);
}

TEST_CASE("ghash field multiply matches brute-force polynomial oracle") {
    // frozen single product: D * H for fixed D and the zero-key subkey H
    const Block128 h = from_hex("66e94bd4ef8a2c3b884cfa59ca342b2e");
    const Block128 d = from_hex("000102030405060708090a0b0c0d0e0f");
    CHECK(to_hex(gf_mul_impl(d, h)) == "9673155feb4b3741b24db4ad03ba38d1");
    CHECK(gf_mul_oracle(d, h) == gf_mul_impl(d, h));

    std::mt19937_64 rng(0xf00d);
    for (int i = 0; i < 300; ++i) {
        const Block128 a = random_block(rng);
        const Block128 b = random_block(rng);
        CHECK(gf_mul_oracle(a, b) == gf_mul_impl(a, b));
    }
}

TEST_CASE("ghash annihilates on zero subkey and matches oracle on random inputs") {
    std::mt19937_64 rng(0xdead);
    // H = 0 is the field's absorbing element
    for (int i = 0; i < 8; ++i) {
        std::vector<std::uint8_t> data;
        for (int j = 0; j < 16 * (1 + i % 4); ++j) data.push_back(static_cast<std::uint8_t>(rng()));
        CHECK(ghash(Block128{}, data) == Block128{});
    }
    // >= 100 random 1..4 block inputs against a block-at-a-time oracle chain
    for (int i = 0; i < 120; ++i) {
        const Block128 h = random_block(rng);
        const int blocks = 1 + static_cast<int>(rng() % 4);
        std::vector<std::uint8_t> data;
        for (int j = 0; j < 16 * blocks; ++j) data.push_back(static_cast<std::uint8_t>(rng()));
        Block128 y{};
        for (int b = 0; b < blocks; ++b) {
            Block128 blk{};
            std::copy(data.begin() + 16 * b, data.begin() + 16 * (b + 1), blk.begin());
            for (int k = 0; k < 16; ++k) y[k] ^= blk[k];
            y = gf_mul_oracle(y, h);
        }
        CHECK(ghash(h, data) == y);
    }
}

TEST_CASE("ghash linearity over the field oracle") {
    std::mt19937_64 rng(0xabcd);
    for (int i = 0; i < 50; ++i) {
        const Block128 h = random_block(rng);
        const Block128 a = random_block(rng);
        const Block128 b = random_block(rng);
        Block128 ab;
        for (int k = 0; k < 16; ++k) ab[k] = a[k] ^ b[k];
        // (a xor b) * H == a*H xor b*H
        Block128 lhs = gf_mul_impl(ab, h);
        Block128 rhs = gf_mul_impl(a, h);
        const Block128 bh = gf_mul_impl(b, h);
        for (int k = 0; k < 16; ++k) rhs[k] ^= bh[k];
        CHECK(lhs == rhs);
        CHECK(lhs == gf_mul_oracle(ab, h));
    }
}

TEST_CASE("standard gcm composition reproduces published vectors") {
    // Test case 1: zero key, zero IV, empty plaintext
    {
        auto [ct, tag] = standard_gcm_encrypt(Block128{}, std::vector<std::uint8_t>(12), {}, {});
        CHECK(ct.empty());
        CHECK(to_hex(tag) == "58e2fccefa7e3061367f1d57a4e7455a");
    }
    // Test case 2: zero key, zero IV, one zero block
    {
        auto [ct, tag] =
            standard_gcm_encrypt(Block128{}, std::vector<std::uint8_t>(12), std::vector<std::uint8_t>(16), {});
        CHECK(bytes_hex(ct) == "0388dace60b6a392f328c2b971b2fe78");
        CHECK(to_hex(tag) == "ab6e47d42cec13bdf53a67b21257bddf");
    }
    const Block128 k3 = from_hex("feffe9928665731c6d6a8f9467308308");
    const auto iv3 = hex_bytes("cafebabefacedbaddecaf888");
    const auto p3 = hex_bytes(
        "d9313225f88406e5a55909c5aff5269a86a7a9531534f7da2e4c303d8a318a72"
        "1c3c0c95956809532fcf0e2449a6b525b16aedf5aa0de657ba637b391aafd255");
    // Test case 3: four full blocks, no AAD
    {
        auto [ct, tag] = standard_gcm_encrypt(k3, iv3, p3, {});
        CHECK(bytes_hex(ct) ==
              "42831ec2217774244b7221b784d0d49ce3aa212f2c02a4e035c17e2329aca12e"
              "21d514b25466931c7d8f6a5aac84aa051ba30b396a0aac973d58e091473f5985");
        CHECK(to_hex(tag) == "4d5c2af327cd64a62cf35abd2ba6fab4");
    }
    // Test case 4: 60-byte plaintext with AAD
    {
        const auto aad = hex_bytes("feedfacedeadbeeffeedfacedeadbeefabaddad2");
        auto [ct, tag] =
            standard_gcm_encrypt(k3, iv3, std::vector<std::uint8_t>(p3.begin(), p3.begin() + 60), aad);
        CHECK(bytes_hex(ct) ==
              "42831ec2217774244b7221b784d0d49ce3aa212f2c02a4e035c17e2329aca12e"
              "21d514b25466931c7d8f6a5aac84aa051ba30b396a0aac973d58e091");
        CHECK(to_hex(tag) == "5bc94fbc3221a5db94fae95ae7121a47");
    }
}

TEST_CASE("crypto cycle model") {
    CHECK(crypto_cycles(0, true, true) == 10);
    CHECK(crypto_cycles(1, true, true) == 22);
    for (std::uint64_t n = 1; n <= 64; ++n) {
        CHECK(crypto_cycles(n, true, true) == 10 + 12 * n);
        CHECK(crypto_cycles(n, true, false) == 10 + 10 * n);
        CHECK(crypto_cycles(n, false, true) == 10 + 2 * n);
        CHECK(crypto_cycles(n, false, false) == 0);
    }
}

TEST_CASE("gcm_protect round trips for all mode combinations") {
    std::mt19937_64 rng(0x9a9a);
    const Block128 key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    for (bool cmode : {false, true}) {
        for (bool imode : {false, true}) {
            GcmContext ctx(key);
            const std::uint32_t addr = 0x82000040;
            std::vector<std::uint32_t> pt;
            const std::size_t n = 1 + rng() % 8;
            for (std::size_t i = 0; i < n; ++i) pt.push_back(static_cast<std::uint32_t>(rng()));

            auto [blk, cycles] = gcm_protect(ctx, addr, pt, cmode, imode);
            CHECK(cycles == crypto_cycles(n, cmode, imode));
            CHECK(bool(blk.tag) == imode);
            if (cmode) CHECK(blk.ciphertext != pt);
            if (!cmode) CHECK(blk.ciphertext == pt);

            auto [res, uc] = gcm_unprotect(ctx, addr, blk, cmode, imode);
            CHECK(uc == cycles);
            REQUIRE(std::holds_alternative<std::vector<std::uint32_t>>(res));
            CHECK(std::get<std::vector<std::uint32_t>>(res) == pt);
        }
    }
}

TEST_CASE("gcm bypass is bit-pure with zero cycles") {
    GcmContext ctx(from_hex("2b7e151628aed2a6abf7158809cf4f3c"));
    const std::vector<std::uint32_t> pt{0xdeadbeef, 0x01234567};
    auto [blk, cycles] = gcm_protect(ctx, 0x1000, pt, false, false);
    CHECK(cycles == 0);
    CHECK(blk.ciphertext == pt);
    CHECK(!blk.tag);
    CHECK(ctx.timestamp == 0);  // bypass performs no protected write
}

TEST_CASE("tampered ciphertext fails authentication") {
    GcmContext ctx(from_hex("2b7e151628aed2a6abf7158809cf4f3c"));
    const std::vector<std::uint32_t> pt{0xcafef00d, 0x12345678, 0x9abcdef0};
    auto [blk, _] = gcm_protect(ctx, 0x2000, pt, true, true);
    blk.ciphertext[1] ^= 0x00010000;  // single bit flip
    auto [res, uc] = gcm_unprotect(ctx, 0x2000, blk, true, true);
    CHECK(std::holds_alternative<AuthFailure>(res));
}

TEST_CASE("replayed block fails against the per-address timestamp table") {
    GcmContext ctx(from_hex("2b7e151628aed2a6abf7158809cf4f3c"));
    const std::uint32_t addr = 0x3000;
    auto [old_blk, c1] = gcm_protect(ctx, addr, std::vector<std::uint32_t>{0x11111111}, true, true);
    auto [new_blk, c2] = gcm_protect(ctx, addr, std::vector<std::uint32_t>{0x22222222}, true, true);
    CHECK(new_blk.timestamp > old_blk.timestamp);

    // The trusted table holds the newest (tag, timestamp); an attacker
    // replaying the old ciphertext cannot make it authenticate.
    ProtectedBlock replay;
    replay.ciphertext = old_blk.ciphertext;
    replay.tag = new_blk.tag;
    replay.timestamp = new_blk.timestamp;
    auto [res, _] = gcm_unprotect(ctx, addr, replay, true, true);
    CHECK(std::holds_alternative<AuthFailure>(res));
}

TEST_CASE("timestamps strictly increase per protected write") {
    GcmContext ctx(from_hex("2b7e151628aed2a6abf7158809cf4f3c"));
    std::uint64_t last = ctx.timestamp;
    for (int i = 0; i < 10; ++i) {
        auto [blk, _] = gcm_protect(ctx, 0x4000, std::vector<std::uint32_t>{0u}, true, true);
        CHECK(blk.timestamp > last);
        last = blk.timestamp;
    }
}
