#pragma once

#include <cmath>
#include <fstream>
#include <sstream>

#include "glyph/core/rng.hpp"
#include "glyph/core/serialize.hpp"

namespace glyph {

// Signed fixed point: width_m bits, frac_bits fractional. Representable range
// [-2^(m-1), 2^(m-1)-1] scaled by 2^-frac_bits.
struct FixedPointFormat {
    u32 width_m = 8;
    u32 frac_bits = 5;

    i64 min_value() const { return -(i64(1) << (width_m - 1)); }
    i64 max_value() const { return (i64(1) << (width_m - 1)) - 1; }

    i64 clamp(i64 v) const { return std::min(std::max(v, min_value()), max_value()); }
};

enum class RoundMode { kNearestEven, kStochastic };

// Quantize a real value onto the format grid (value scaled by 2^frac_bits).
inline i64 quantize_value(double x, const FixedPointFormat& fmt, RoundMode mode, RandomSource* rng = nullptr) {
    double scaled = x * std::pow(2.0, fmt.frac_bits);
    i64 q;
    if (mode == RoundMode::kNearestEven) {
        double fl = std::floor(scaled);
        double frac = scaled - fl;
        i64 base = static_cast<i64>(fl);
        if (frac > 0.5) {
            q = base + 1;
        } else if (frac < 0.5) {
            q = base;
        } else {
            q = (base % 2 == 0) ? base : base + 1;  // tie to even
        }
    } else {
        if (rng == nullptr) throw ParameterError("stochastic rounding needs a seeded source");
        double fl = std::floor(scaled);
        double frac = scaled - fl;
        u64 draw = rng->next_u64() >> 11;  // 53-bit uniform
        double u = static_cast<double>(draw) / std::pow(2.0, 53);
        q = static_cast<i64>(fl) + (u < frac ? 1 : 0);
    }
    return fmt.clamp(q);
}

// Integer requantization shared by the plaintext reference and the encrypted
// window circuits: round-half-up shift. The layer formats guarantee the
// result is in range, so no clamping occurs on the data path.
inline i64 requantize(i64 acc, u32 shift, u32 width_m) {
    i64 w = shift == 0 ? acc : ((acc + (i64(1) << (shift - 1))) >> shift);
    u64 mask = (u64(1) << width_m) - 1;
    u64 two = static_cast<u64>(w) & mask;
    return two >= (mask / 2 + 1) ? static_cast<i64>(two) - static_cast<i64>(mask + 1) : static_cast<i64>(two);
}

// Lookup table over an n-bit domain (entries quantized in the layer format).
struct LutTable {
    u32 input_bits = 0;
    u32 frac_bits = 0;
    std::string semantic;
    std::vector<i64> entries;  // size 2^input_bits, signed values

    size_t size() const { return entries.size(); }

    void validate() const {
        if (entries.size() != (size_t(1) << input_bits))
            throw ParameterError("LutTable: entry count must be exactly 2^n");
    }

    std::array<u8, 32> hash() const {
        ByteWriter w;
        w.u32v(input_bits);
        w.u32v(frac_bits);
        w.bytes(semantic.data(), semantic.size());
        for (i64 e : entries) w.u64v(static_cast<u64>(e));
        return Sha256::digest(w.data().data(), w.data().size());
    }
};

// Shift-normalized exponential table: entries = round(2^frac · e^(alpha·(k - k_max)))
// clamped to [1, 2^(m-1)-1]; the floor of one ulp makes a zero denominator
// impossible downstream.
inline LutTable build_exp_table(u32 input_bits, u32 frac_bits, double alpha, u32 out_width) {
    LutTable t;
    t.input_bits = input_bits;
    t.frac_bits = frac_bits;
    t.semantic = "exp";
    const i64 domain = i64(1) << input_bits;
    const i64 vmax = domain / 2 - 1;  // signed two's-complement domain top
    i64 cap = (i64(1) << (out_width - 1)) - 1;
    for (i64 k = 0; k < domain; ++k) {
        i64 v = k >= domain / 2 ? k - domain : k;  // signed input
        double e = std::exp(alpha * static_cast<double>(v - vmax));
        i64 q = static_cast<i64>(std::llround(e * std::pow(2.0, frac_bits)));
        t.entries.push_back(std::min(std::max<i64>(q, 1), cap));
    }
    return t;
}

// Reciprocal table over a windowed sum: entry(k) ~ round(scale / (k·unit)),
// with entry(0) clamped to the table maximum (sums are >= 1 ulp by the exp
// table construction, so index 0 only occurs for the window floor).
inline LutTable build_recip_table(u32 input_bits, i64 numerator, i64 unit, u32 out_width) {
    LutTable t;
    t.input_bits = input_bits;
    t.frac_bits = 0;
    t.semantic = "reciprocal";
    const i64 domain = i64(1) << input_bits;
    i64 cap = (i64(1) << (out_width - 1)) - 1;
    for (i64 k = 0; k < domain; ++k) {
        i64 denom = k * unit;
        i64 q = denom <= 0 ? cap : static_cast<i64>(std::llround(static_cast<double>(numerator) / denom));
        t.entries.push_back(std::min(std::max<i64>(q, 0), cap));
    }
    return t;
}

// ---- table files: plain text, header with n/frac_bits/semantic ----
inline void write_lut_table(const std::string& path, const LutTable& t) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write table file: " + path);
    f << "n=" << t.input_bits << " frac_bits=" << t.frac_bits << " semantic=" << t.semantic << "\n";
    for (i64 e : t.entries) f << e << "\n";
}

inline LutTable read_lut_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read table file: " + path);
    std::string header;
    std::getline(f, header);
    LutTable t;
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
        if (tok.rfind("n=", 0) == 0) t.input_bits = static_cast<u32>(std::stoul(tok.substr(2)));
        else if (tok.rfind("frac_bits=", 0) == 0) t.frac_bits = static_cast<u32>(std::stoul(tok.substr(10)));
        else if (tok.rfind("semantic=", 0) == 0) t.semantic = tok.substr(9);
    }
    i64 v;
    while (f >> v) t.entries.push_back(v);
    t.validate();
    return t;
}

}  // namespace glyph
