#pragma once

#include "glyph/bridge/bridge.hpp"
#include "glyph/nn/fixedpoint.hpp"

namespace glyph {

// Word-level encrypted activation circuits. All words are two's complement,
// LSB first, gate-convention bits at level 1.
class NeuralCircuits {
  public:
    NeuralCircuits(TfheContextPtr tfhe, const TfheKeySet* keys) : tfhe_(std::move(tfhe)), keys_(keys) {}

    const TfheContext& tfhe() const { return *tfhe_; }

    EncryptedWord encrypt_word(i64 value, u32 width, const TfheSecretKeys& sk, RandomSource& rng) const {
        EncryptedWord w;
        for (u32 j = 0; j < width; ++j)
            w.bits.push_back(tfhe_->encrypt_gate_bit(((value >> j) & 1) != 0, sk, rng));
        return w;
    }

    i64 decrypt_word(const EncryptedWord& w, const TfheSecretKeys& sk) const {
        u64 v = 0;
        for (u32 j = 0; j < w.width(); ++j)
            v |= static_cast<u64>(tfhe_->decrypt_gate_bit(w.bits[j], sk)) << j;
        u64 sign = u64(1) << (w.width() - 1);
        return (v & sign) ? static_cast<i64>(v) - (i64(1) << w.width()) : static_cast<i64>(v);
    }

    // Forward ReLU: output MSB is a trivial 0, remaining bits AND the input
    // bits with the negated sign; one NOT without bootstrapping and n-1 AND
    // gates with bootstrapping.
    EncryptedWord relu_forward(const EncryptedWord& u) const {
        OpCounters::global().act_units.fetch_add(1, std::memory_order_relaxed);
        const u32 n = u.width();
        Tlwe not_sign = tfhe_->gate_not(u.sign_bit());
        EncryptedWord out;
        out.bits.resize(n);
        for (u32 j = 0; j + 1 < n; ++j) out.bits[j] = tfhe_->gate_and(u.bits[j], not_sign, *keys_);
        out.bits[n - 1] = tlwe_trivial(kGateFalse, tfhe_->params().level1.n);
        return out;
    }

    // Backward iReLU: every bit of the error word (sign included) is gated by
    // the saved forward sign bit, so a blocked neuron zeroes the whole two's
    // complement word. n AND gates (one more than the forward unit).
    EncryptedWord irelu_backward(const EncryptedWord& delta, const Tlwe& u_msb) const {
        OpCounters::global().act_units.fetch_add(1, std::memory_order_relaxed);
        Tlwe not_sign = tfhe_->gate_not(u_msb);
        EncryptedWord out;
        out.bits.reserve(delta.width());
        for (u32 j = 0; j < delta.width(); ++j) out.bits.push_back(tfhe_->gate_and(delta.bits[j], not_sign, *keys_));
        return out;
    }

    // Table lookup by a multiplexer tree over the word bits. The leaf level
    // collapses against the plaintext entries (constant or a copy/negation of
    // the first select bit); upper levels are bootstrapped multiplexers.
    // The profiler records the paper's 2^n accounting per lookup.
    EncryptedWord lut_apply(const EncryptedWord& u, const LutTable& table) const {
        table.validate();
        const u32 n = u.width();
        if (table.input_bits != n) throw ParameterError("lut_apply: table width does not match the word");
        OpCounters::global().lut_units_paper.fetch_add(u64(1) << n, std::memory_order_relaxed);
        const size_t entries = table.size();
        const u32 l1n = tfhe_->params().level1.n;
        EncryptedWord out;
        out.bits.resize(n);
        // two's-complement index: entry index = value mod 2^n
        for (u32 plane = 0; plane < n; ++plane) {
            // leaf collapse over select bit 0
            std::vector<Tlwe> nodes;
            nodes.reserve(entries / 2);
            for (size_t k = 0; k < entries; k += 2) {
                bool b0 = ((table.entries[k] >> plane) & 1) != 0;
                bool b1 = ((table.entries[k + 1] >> plane) & 1) != 0;
                if (b0 == b1) {
                    nodes.push_back(tlwe_trivial(b0 ? kGateTrue : kGateFalse, l1n));
                } else if (b1) {
                    nodes.push_back(u.bits[0]);
                } else {
                    nodes.push_back(tfhe_->gate_not(u.bits[0]));
                }
            }
            for (u32 level = 1; level < n; ++level) {
                std::vector<Tlwe> next;
                next.reserve(nodes.size() / 2);
                for (size_t k = 0; k < nodes.size(); k += 2)
                    next.push_back(tfhe_->gate_mux(u.bits[level], nodes[k + 1], nodes[k], *keys_));
                nodes = std::move(next);
            }
            out.bits[plane] = nodes[0];
        }
        return out;
    }

  private:
    TfheContextPtr tfhe_;
    const TfheKeySet* keys_;
};

// ---- softmax unit ----

// Quantized softmax built from shift-normalized exponent tables, a windowed
// reciprocal lookup of the class sum, and lattice-side products. For 8-bit
// words the exponent factors into two 4-bit tables (the ring degree resolves
// 4 bits per rotation); the plaintext mirror computes the identical integers.
struct SoftmaxUnit {
    u32 width_m = 8;
    u32 classes = 0;
    LutTable exp_hi;   // exponent factor over the signed high nibble (m=8 only)
    LutTable exp_lo;   // exponent factor over the low nibble / the whole word (m=4)
    u32 exp_shift = 0;     // combine shift for the factored exponent
    u32 sum_shift = 0;     // window shift mapping the class sum to the recip index
    LutTable recip;        // reciprocal of the windowed sum
    u32 out_shift = 0;     // shift for the final product
    u32 one_value = 0;     // fixed-point representation of probability one

    static SoftmaxUnit build(u32 width_m, u32 classes, double alpha = 0.08) {
        SoftmaxUnit s;
        s.width_m = width_m;
        s.classes = classes;
        if (width_m == 8) {
            // exp(u) ~ T_hi[u>>4]·T_lo[u&15] >> exp_shift, + 1 floor
            s.exp_hi.input_bits = 4;
            s.exp_hi.semantic = "exp-high";
            for (i64 h = 0; h < 16; ++h) {
                i64 sh = h >= 8 ? h - 16 : h;
                double e = std::exp(alpha * 16.0 * static_cast<double>(sh - 7));
                s.exp_hi.entries.push_back(std::min<i64>(127, std::llround(e * 128.0)));
            }
            s.exp_lo.input_bits = 4;
            s.exp_lo.semantic = "exp-low";
            for (i64 l = 0; l < 16; ++l) {
                double e = std::exp(alpha * static_cast<double>(l - 15));
                s.exp_lo.entries.push_back(std::max<i64>(1, std::llround(e * 128.0)));
            }
            s.exp_shift = 7;  // product <= 127·128 ~ 2^14 -> 7-bit exponent
            s.one_value = 64;
            s.out_shift = 5;
            // sum in [classes, classes·128]; window to a 4-bit index
            u64 smax = static_cast<u64>(classes) * 128 + classes;
            s.sum_shift = 0;
            while ((smax >> s.sum_shift) >= 16) ++s.sum_shift;
            s.recip.input_bits = 4;
            s.recip.semantic = "reciprocal";
            for (i64 k = 0; k < 16; ++k) {
                i64 denom = (k << s.sum_shift) + (i64(1) << (s.sum_shift - 1));
                i64 q = std::llround(static_cast<double>(s.one_value << s.out_shift) / denom * 2.0);
                // recip scaled so d = E·recip >> (out_shift+1)
                s.recip.entries.push_back(std::min<i64>(127, std::max<i64>(0, q)));
            }
        } else if (width_m == 4) {
            s.exp_lo.input_bits = 4;
            s.exp_lo.semantic = "exp";
            for (i64 k = 0; k < 16; ++k) {
                i64 v = k >= 8 ? k - 16 : k;
                double e = std::exp(0.35 * static_cast<double>(v - 7));
                s.exp_lo.entries.push_back(std::max<i64>(1, std::min<i64>(7, std::llround(e * 8.0))));
            }
            s.exp_shift = 0;
            s.one_value = 4;
            s.out_shift = 3;
            u64 smax = static_cast<u64>(classes) * 7;
            s.sum_shift = 0;
            while ((smax >> s.sum_shift) >= 16) ++s.sum_shift;
            s.recip.input_bits = 4;
            s.recip.semantic = "reciprocal";
            for (i64 k = 0; k < 16; ++k) {
                i64 denom = (k << s.sum_shift) + (s.sum_shift ? (i64(1) << (s.sum_shift - 1)) : 0);
                if (denom <= 0) denom = 1;
                i64 q = std::llround(static_cast<double>(s.one_value << s.out_shift) * 2.0 / denom);
                s.recip.entries.push_back(std::min<i64>(7, std::max<i64>(0, q)));
            }
        } else {
            throw ParameterError("softmax: supported word widths are 4 and 8");
        }
        return s;
    }

    i64 exp_plain(i64 u) const {
        u64 mask = (u64(1) << width_m) - 1;
        u64 two = static_cast<u64>(u) & mask;
        if (width_m == 8) {
            i64 h = static_cast<i64>(two >> 4);
            i64 l = static_cast<i64>(two & 15);
            i64 raw = exp_hi.entries[h] * exp_lo.entries[l];
            return ((raw + (i64(1) << (exp_shift - 1))) >> exp_shift) + 1;
        }
        return exp_lo.entries[two & 15];
    }

    i64 recip_plain(i64 sum) const {
        i64 idx = sum >> sum_shift;
        if (idx > 15) idx = 15;
        return recip.entries[idx];
    }

    // The defining plaintext mirror: the encrypted path computes exactly this.
    std::vector<i64> forward_plain(const std::vector<i64>& u) const {
        std::vector<i64> e(u.size());
        i64 sum = 0;
        for (size_t i = 0; i < u.size(); ++i) {
            e[i] = exp_plain(u[i]);
            sum += e[i];
        }
        i64 r = recip_plain(sum);
        std::vector<i64> d(u.size());
        for (size_t i = 0; i < u.size(); ++i)
            d[i] = (e[i] * r + (i64(1) << out_shift)) >> (out_shift + 1);
        return d;
    }

    // Backward path: quadratic-loss derivative, slot-wise subtraction.
    static i64 isoftmax_plain(i64 d, i64 label) { return d - label; }
};

}  // namespace glyph
