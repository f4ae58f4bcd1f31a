#pragma once

#include <array>
#include <cstring>

#include "glyph/core/common.hpp"

namespace glyph {

// Deterministic randomness source: ChaCha20 block function in counter mode.
// Same seed + same draw sequence gives identical output on every platform;
// child sources are derived with a domain-separation label so parallel
// workers never share a stream.
class RandomSource {
  public:
    using Seed = std::array<u64, 4>;  // 256-bit

    explicit RandomSource(Seed seed, u64 stream = 0) : seed_(seed), stream_(stream) { refill(); }

    explicit RandomSource(u64 seed) : RandomSource(Seed{seed, 0x9E3779B97F4A7C15ULL, 0, 0}) {}

    u64 next_u64() {
        if (pos_ >= kBlockWords) refill();
        return block_[pos_++];
    }

    // Uniform in [0, bound) without modulo bias (rejection sampling).
    u64 uniform_below(u64 bound) {
        if (bound == 0) throw ParameterError("uniform_below: bound must be positive");
        if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
        const u64 limit = ~u64{0} - (~u64{0} % bound + 1) % bound;
        u64 v = next_u64();
        while (v > limit) v = next_u64();
        return v % bound;
    }

    // Centered binomial: sum of k coin pairs, values in [-k, k], variance k/2.
    i64 cbd(u32 k) {
        i64 acc = 0;
        u32 left = k;
        while (left > 0) {
            u32 take = left < 32 ? left : 32;
            u64 w = next_u64();
            for (u32 i = 0; i < take; ++i) {
                acc += static_cast<i64>((w >> (2 * i)) & 1) - static_cast<i64>((w >> (2 * i + 1)) & 1);
            }
            left -= take;
        }
        return acc;
    }

    // Derived source: independent stream bound to (this seed, label).
    RandomSource child(u64 label) const {
        RandomSource tmp(seed_, stream_ ^ (label * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
        Seed s;
        for (auto& w : s) w = tmp.next_u64();
        return RandomSource(s, 0);
    }

    u64 draws_made() const { return counter_ * kBlockWords + pos_; }
    const Seed& seed() const { return seed_; }

  private:
    static constexpr size_t kBlockWords = 8;  // 64 bytes per ChaCha block

    static void quarter_round(u32& a, u32& b, u32& c, u32& d) {
        a += b; d ^= a; d = (d << 16) | (d >> 16);
        c += d; b ^= c; b = (b << 12) | (b >> 20);
        a += b; d ^= a; d = (d << 8) | (d >> 24);
        c += d; b ^= c; b = (b << 7) | (b >> 25);
    }

    void refill() {
        u32 st[16];
        // "expand 32-byte k"
        st[0] = 0x61707865; st[1] = 0x3320646e; st[2] = 0x79622d32; st[3] = 0x6b206574;
        for (int i = 0; i < 4; ++i) {
            st[4 + 2 * i] = static_cast<u32>(seed_[i]);
            st[5 + 2 * i] = static_cast<u32>(seed_[i] >> 32);
        }
        st[12] = static_cast<u32>(counter_);
        st[13] = static_cast<u32>(counter_ >> 32);
        st[14] = static_cast<u32>(stream_);
        st[15] = static_cast<u32>(stream_ >> 32);
        u32 x[16];
        std::memcpy(x, st, sizeof(x));
        for (int r = 0; r < 10; ++r) {
            quarter_round(x[0], x[4], x[8], x[12]);
            quarter_round(x[1], x[5], x[9], x[13]);
            quarter_round(x[2], x[6], x[10], x[14]);
            quarter_round(x[3], x[7], x[11], x[15]);
            quarter_round(x[0], x[5], x[10], x[15]);
            quarter_round(x[1], x[6], x[11], x[12]);
            quarter_round(x[2], x[7], x[8], x[13]);
            quarter_round(x[3], x[4], x[9], x[14]);
        }
        for (int i = 0; i < 16; ++i) x[i] += st[i];
        for (int i = 0; i < 8; ++i) block_[i] = static_cast<u64>(x[2 * i]) | (static_cast<u64>(x[2 * i + 1]) << 32);
        ++counter_;
        pos_ = 0;
    }

    Seed seed_;
    u64 stream_ = 0;
    u64 counter_ = 0;
    size_t pos_ = 0;
    std::array<u64, kBlockWords> block_{};
};

}  // namespace glyph
