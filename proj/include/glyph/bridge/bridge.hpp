#pragma once

#include "glyph/bgv/bgv.hpp"
#include "glyph/tfhe/tfhe.hpp"

namespace glyph {

// n-bit two's-complement sequence of TLWE bits, LSB first; the operand format
// of every activation circuit. Bit width is fixed per network config; the MSB
// (index width-1) is the sign bit.
struct EncryptedWord {
    std::vector<Tlwe> bits;  // gate convention, level-1 keyed

    u32 width() const { return static_cast<u32>(bits.size()); }
    const Tlwe& sign_bit() const { return bits.back(); }
};

// Key material binding one BGV context and one TFHE context to a shared word
// domain. Both switching directions refuse to operate across mismatched
// parameter hashes.
struct BridgeKeys {
    std::array<u8, 32> bgv_hash{}, tfhe_hash{};
    u64 word_domain = 256;                           // p^r-style integer domain 2^M
    LweKeySwitchKey ksk_bgv_l2;                      // s_bgv (dim N) -> level-2
    std::vector<std::pair<RnsPoly, RnsPoly>> ring_ksk;  // raw rows: 2^(jw)·s3(X) under s_bgv
    u32 ring_base_bits = 16;
};

class SchemeBridge {
  public:
    SchemeBridge(BgvContextPtr bgv, TfheContextPtr tfhe, const TfheKeySet* tfhe_keys, BridgeKeys keys)
        : bgv_(std::move(bgv)), tfhe_(std::move(tfhe)), tfhe_keys_(tfhe_keys), keys_(std::move(keys)) {
        if (keys_.bgv_hash != bgv_->params_hash() || keys_.tfhe_hash != tfhe_->params_hash())
            throw ParameterError("bridge keys were generated for different scheme parameters");
        if (bgv_->n() != tfhe_->ring_n())
            throw ParameterError("bridge requires matching BGV and TFHE ring degrees");
    }

    static BridgeKeys make_keys(const BgvContext& bgv, const BgvSecretKey& bgv_sk, const TfheContext& tfhe,
                                const TfheKeySet& tfhe_keys, RandomSource rng, u64 word_domain = 256) {
        BridgeKeys k;
        k.bgv_hash = bgv.params_hash();
        k.tfhe_hash = tfhe.params_hash();
        k.word_domain = word_domain;
        k.ksk_bgv_l2 = tfhe.make_lwe_keyswitch_key(bgv_sk.s, tfhe_keys.sk.s2, tfhe.params().ks_l2,
                                                   tfhe.params().level2.alpha, rng.child(1));
        // ring keyswitch rows: raw encryptions of 2^(jw)·s3(X) under s_bgv
        RandomSource r = rng.child(2);
        const u32 lvl = bgv.top_level();
        const size_t qbits = mpz_sizeinbase(bgv.big_modulus(lvl).raw(), 2);
        const size_t digits = ceil_div(qbits, k.ring_base_bits);
        for (size_t j = 0; j < digits; ++j) {
            RnsPoly P;
            Mpz pw;
            mpz_ui_pow_ui(pw.raw(), 2, j * k.ring_base_bits);
            for (size_t i = 0; i <= lvl; ++i) {
                const u64 q = bgv.params().modulus_chain[i];
                u64 scale = mpz_fdiv_ui(pw.raw(), q);
                ModPoly m(q, bgv.n());
                for (size_t c = 0; c < bgv.n(); ++c)
                    m.c[c] = mul_mod(scale, mod_reduce_signed(tfhe_keys.sk.s3[c], q), q);
                P.res.push_back(std::move(m));
            }
            BgvCiphertext row = bgv.encrypt_raw(P, bgv_sk, r, lvl);
            k.ring_ksk.emplace_back(std::move(row.parts[0]), std::move(row.parts[1]));
        }
        return k;
    }

    u64 word_domain() const { return keys_.word_domain; }
    const BgvContext& bgv() const { return *bgv_; }
    const TfheContext& tfhe() const { return *tfhe_; }

    // ---- BGV -> TFHE ----

    // Per-ciphertext extraction cache: the phase words of both parts.
    struct Extraction {
        std::vector<u64> w0, w1;
        u32 level;
        u32 scale_bits;  // 0: slot-layer Δ; p: bridge scale Q/2^p
    };

    Extraction extract_words(const BgvCiphertext& ct) const {
        if (ct.size() != 2) throw ParameterError("bridge: ciphertext must be 2-part (relinearize first)");
        if (ct.noise_budget_bits < 4.0)
            throw BudgetError("switch refused: noise budget " + std::to_string(ct.noise_budget_bits) +
                              " bits is below the 4-bit threshold");
        Extraction e;
        e.level = ct.level;
        e.scale_bits = ct.scale_bits;
        e.w0 = bgv_->phase_words(ct.parts[0], ct.level);
        e.w1 = bgv_->phase_words(ct.parts[1], ct.level);
        return e;
    }

    // LWE sample (dim N, key s_bgv) whose phase is the lane's value at Δ/Q
    // scale, i.e. the fine multiples-of-p^{-r} convention.
    Tlwe extract_lane_fine(const Extraction& e, size_t lane) const {
        const size_t n = bgv_->n();
        if (lane >= n) throw ParameterError("lane index out of range");
        Tlwe t;
        t.a.resize(n);
        // phase = w0[lane] + sum_k sign·w1[idx]·s_k  =>  a_k = -sign·w1[idx]
        for (size_t k = 0; k <= lane; ++k) t.a[k] = ~e.w1[lane - k] + 1;
        for (size_t k = lane + 1; k < n; ++k) t.a[k] = e.w1[n + lane - k];
        t.b = e.w0[lane];
        return t;
    }

    // Scale a fine-convention sample (value spacing Δ_src/Q of the torus) to
    // the spread(domain) convention used by functional bootstraps:
    // phase (v + offset)·Δ_src/Q -> (v+offset)/(2^shift·2D). For bridge-scale
    // sources the multiplier is an exact power of two.
    Tlwe fine_to_spread_domain(const Tlwe& fine, u32 src_scale_bits, u64 window_shift, u64 domain,
                               u64 offset = 0) const {
        const u64 dom_shift = log2_exact(2 * domain) + window_shift;
        u64 g;
        u64 off_word;
        if (src_scale_bits != 0) {
            if (src_scale_bits < dom_shift) throw ParameterError("window too wide for the source scale");
            g = u64(1) << (src_scale_bits - dom_shift);
            off_word = offset << (64 - src_scale_bits);
        } else {
            const u64 t = bgv_->t();
            u128 denom = u128(1) << dom_shift;
            if (denom > t) throw ParameterError("window too wide for the plaintext modulus");
            g = static_cast<u64>((static_cast<u128>(t) + denom / 2) / denom);
            off_word = offset ? encode_torus(offset % t, t) : 0;
        }
        Tlwe r = tlwe_scale(fine, g);
        if (off_word) r.b += off_word * g;
        return r;
    }

    // ① extract + scale, ② key-switch into the level-2 path. Output encodes
    // value/(2·domain) per slot lane. Integer-convention carrier for decompose.
    std::vector<Tlwe> bgv_to_tlwe(const BgvCiphertext& ct, size_t lanes, u64 window_shift = 0) const {
        Extraction e = extract_words(ct);
        std::vector<Tlwe> out;
        out.reserve(lanes);
        for (size_t j = 0; j < lanes; ++j) {
            Tlwe fine = extract_lane_fine(e, j);
            Tlwe spread = fine_to_spread_domain(fine, e.scale_bits, window_shift, keys_.word_domain,
                                                window_shift ? (u64(1) << (window_shift - 1)) : 0);
            out.push_back(tfhe_->key_switch(spread, keys_.ksk_bgv_l2));
        }
        OpCounters::global().switch_b2t_words.fetch_add(lanes, std::memory_order_relaxed);
        return out;
    }

    // ---- bit decomposition (integer -> word) ----

    // Decompose a spread(2^m) integer value into m gate bits; exactly m
    // functional bootstraps. The ring degree resolves at most 4 bits per
    // rotation at these noise parameters, so m <= 4 here; wider words come
    // from requant_word below, which reads two windows. Unsigned payloads in
    // [0, 2^m) are centred first so the blind rotation stays in the signed
    // quarter of the torus.
    EncryptedWord decompose_bits(const Tlwe& value_l2, u32 m, bool payload_signed = false) const {
        if (m > 4) throw ParameterError("decompose: single-window M exceeds the resolvable LUT domain");
        const u64 d = u64(1) << m;
        Tlwe in = value_l2;
        const u64 half_shift = payload_signed ? 0 : d / 2;
        if (!payload_signed) in.b -= u64(1) << 62;  // payload - D/2 at spread(D)
        EncryptedWord w;
        w.bits.reserve(m);
        for (u32 j = 0; j < m; ++j) {
            auto bit_lut = [j, d, half_shift](i64 v) {
                u64 uv = (static_cast<u64>(v) + half_shift) & (d - 1);
                return ((uv >> j) & 1) ? kGateTrue : kGateFalse;
            };
            Tlwe raw = tfhe_->functional_bootstrap(in, bit_lut, d, tfhe_keys_->bsk_l2_gate);
            w.bits.push_back(tfhe_->key_switch(raw, tfhe_keys_->ksk_l1));
        }
        return w;
    }

    // Requantization read: word = round_half_up(u / 2^shift) mod 2^m for an
    // accumulator u carried in a fine-convention lane sample. m <= 4 reads one
    // window (m bootstraps); m in (4,8] reads a high window, links it with one
    // value bootstrap, and reads the balanced low window (m+1 bootstraps).
    // The window reads telescope: any +-1 ambiguity of the high band cancels
    // against the balanced residual, so the composed value is exact up to the
    // per-bootstrap noise margin.
    EncryptedWord requant_word(const Tlwe& fine, u32 src_scale_bits, u64 shift, u32 m) const {
        if (m <= 4) {
            // the bootstrap's half-band offset realizes the round-half-up
            Tlwe spread = fine_to_spread_domain(fine, src_scale_bits, shift, u64(1) << m);
            Tlwe l2 = tfhe_->key_switch(spread, keys_.ksk_bgv_l2);
            return decompose_bits(l2, m, /*payload_signed=*/true);
        }
        if (m > 8) throw ParameterError("requant: word width beyond 8 bits unsupported");
        const u32 hi_bits = m - 4;
        EncryptedWord out;
        out.bits.resize(m);
        // high window: phase (u + 2^(shift-1)) / 2^(shift+4) over domain 2^hi_bits
        Tlwe hi_spread = fine_to_spread_domain(fine, src_scale_bits, shift + 4, u64(1) << hi_bits);
        Tlwe hi_l2 = tfhe_->key_switch(hi_spread, keys_.ksk_bgv_l2);
        const u64 d_hi = u64(1) << hi_bits;
        for (u32 j = 0; j < hi_bits; ++j) {
            auto bit_lut = [j, d_hi](i64 v) {
                u64 uv = static_cast<u64>(v) & (d_hi - 1);
                return ((uv >> j) & 1) ? kGateTrue : kGateFalse;
            };
            Tlwe raw = tfhe_->functional_bootstrap(hi_l2, bit_lut, d_hi, tfhe_keys_->bsk_l2_gate);
            out.bits[4 + j] = tfhe_->key_switch(raw, tfhe_keys_->ksk_l1);
        }
        // digit link: value of the high band at the low-window scale
        auto hi_value = [hi_bits](i64 v) { return static_cast<u64>(v) << (64 - hi_bits - 1); };
        Tlwe hi_val = tfhe_->functional_bootstrap(hi_l2, hi_value, d_hi, tfhe_keys_->bsk_l2_fine);
        Tlwe hi_val_l2 = tfhe_->key_switch(hi_val, tfhe_keys_->ksk_l2);
        // residual at the same scale, then amplified into the low window
        Tlwe resid = tlwe_sub(hi_l2, hi_val_l2);
        resid = tlwe_scale(resid, 16);
        for (u32 j = 0; j < 4; ++j) {
            auto bit_lut = [j](i64 v) {
                u64 uv = static_cast<u64>(v) & 15;
                return ((uv >> j) & 1) ? kGateTrue : kGateFalse;
            };
            Tlwe raw = tfhe_->functional_bootstrap(resid, bit_lut, 16, tfhe_keys_->bsk_l2_gate);
            out.bits[j] = tfhe_->key_switch(raw, tfhe_keys_->ksk_l1);
        }
        return out;
    }

    // Requantized value read (gradients): one value bootstrap per nibble,
    // returning ring-level samples with the requested output spacing 2^-p
    // (two's-complement payloads; negatives pack as residues mod 2^p).
    // Most-significant nibble first.
    std::vector<Tlwe> requant_value_nibbles(const Tlwe& fine, u32 src_scale_bits, u64 shift, u32 m,
                                            u32 out_scale_bits) const {
        const u32 p = out_scale_bits;
        if (m <= 4) {
            Tlwe spread = fine_to_spread_domain(fine, src_scale_bits, shift, u64(1) << m);
            Tlwe l2 = tfhe_->key_switch(spread, keys_.ksk_bgv_l2);
            auto value_lut = [m, p](i64 v) {
                u64 band = static_cast<u64>(v) & ((u64(1) << m) - 1);
                i64 sv = band >= (u64(1) << (m - 1)) ? static_cast<i64>(band) - (i64(1) << m)
                                                     : static_cast<i64>(band);
                return static_cast<u64>(sv) << (64 - p);
            };
            return {tfhe_->functional_bootstrap(l2, value_lut, u64(1) << m, tfhe_keys_->bsk_l2_fine)};
        }
        if (m > 8) throw ParameterError("requant: word width beyond 8 bits unsupported");
        const u32 hi_bits = m - 4;
        const u64 d_hi = u64(1) << hi_bits;
        Tlwe hi_spread = fine_to_spread_domain(fine, src_scale_bits, shift + 4, d_hi);
        Tlwe hi_l2 = tfhe_->key_switch(hi_spread, keys_.ksk_bgv_l2);
        // signed high nibble at the output scale, plus a separate digit link
        // at the window scale (the link must stay low-noise, so it cannot be
        // an amplified copy of the output sample).
        auto hi_out_lut = [p](i64 v) { return static_cast<u64>(v) << (64 - p); };
        Tlwe hi_out = tfhe_->functional_bootstrap(hi_l2, hi_out_lut, d_hi, tfhe_keys_->bsk_l2_fine);
        auto hi_link = [hi_bits](i64 v) { return static_cast<u64>(v) << (64 - hi_bits - 1); };
        Tlwe hi_val = tfhe_->functional_bootstrap(hi_l2, hi_link, d_hi, tfhe_keys_->bsk_l2_fine);
        Tlwe resid = tlwe_scale(tlwe_sub(hi_l2, tfhe_->key_switch(hi_val, tfhe_keys_->ksk_l2)), 16);
        // low nibble unsigned at the output scale
        auto lo_lut = [p](i64 v) { return (static_cast<u64>(v) & 15) << (64 - p); };
        Tlwe lo_val = tfhe_->functional_bootstrap(resid, lo_lut, 16, tfhe_keys_->bsk_l2_fine);
        return {hi_out, lo_val};
    }

    // ---- recomposition (word -> integer) ----

    // Weighted per-bit functional bootstraps then linear sums: one value
    // sample per nibble at spacing 2^-p, most significant first. Exactly one
    // bootstrap per bit; the word MSB carries its two's-complement weight.
    std::vector<Tlwe> recompose_nibbles(const EncryptedWord& w, u32 out_scale_bits) const {
        const u32 m = w.width();
        if (m != 4 && m != 8) throw ParameterError("recompose: supported word widths are 4 and 8");
        const u32 p = out_scale_bits;
        const u32 nibbles = m / 4;
        std::vector<Tlwe> out;
        for (u32 nb = 0; nb < nibbles; ++nb) {  // most significant first
            const u32 lo_bit = 4 * (nibbles - 1 - nb);
            Tlwe acc = tlwe_trivial(0, tfhe_->ring_n());
            for (u32 j = 0; j < 4; ++j) {
                const u32 bit_index = lo_bit + j;
                const bool sign = (bit_index + 1 == m);
                const u64 contrib = sign ? (~(u64(1) << (64 - p + j)) + 1)  // -2^j at scale p
                                         : (u64(1) << (64 - p + j));
                Tlwe raw = tfhe_->sign_select_bootstrap(w.bits[bit_index], contrib, 0, tfhe_keys_->bsk_fine);
                acc = tlwe_add(acc, raw);
            }
            out.push_back(std::move(acc));
        }
        return out;
    }

    // ---- TFHE -> BGV ----

    enum class PackLayout { kLanes, kConjugateLanes, kBroadcast, kConstant };

    // ⑤ pack spread-convention values into coefficients, convert the TRLWE to
    // a raw lattice ciphertext under the bridge scale Q/2^p, and key-switch to
    // the BGV secret. Values land in the first K lanes (zeros elsewhere).
    // value_scale_bits must match the spacing of the packed samples.
    BgvCiphertext tlwe_to_bgv(const std::vector<Tlwe>& ring_values, PackLayout layout, u32 value_scale_bits,
                              size_t lanes_hint = 0) const {
        const size_t n = bgv_->n();
        const size_t count = ring_values.size();
        std::vector<Tlwe> l2;
        l2.reserve(count);
        for (const auto& v : ring_values)
            l2.push_back(v.dim() == tfhe_->params().level2.n ? v : tfhe_->key_switch(v, tfhe_keys_->ksk_l2));
        std::vector<size_t> pos;
        std::vector<bool> neg;
        switch (layout) {
            case PackLayout::kLanes:
                for (size_t i = 0; i < count; ++i) { pos.push_back(i); neg.push_back(false); }
                break;
            case PackLayout::kConjugateLanes:
                for (size_t i = 0; i < count; ++i) {
                    pos.push_back(i == 0 ? 0 : n - i);
                    neg.push_back(i != 0);
                }
                break;
            case PackLayout::kBroadcast: {
                if (count != 1) throw ParameterError("broadcast pack takes one value");
                size_t lanes = lanes_hint ? lanes_hint : n;
                std::vector<Tlwe> rep(lanes, l2[0]);
                l2 = std::move(rep);
                for (size_t i = 0; i < lanes; ++i) { pos.push_back(i); neg.push_back(false); }
                break;
            }
            case PackLayout::kConstant:
                if (count != 1) throw ParameterError("constant pack takes one value");
                pos.push_back(0);
                neg.push_back(false);
                break;
        }
        TrlweCiphertext packed = tfhe_->pack_keyswitch(l2, pos, neg, tfhe_keys_->pksk);
        OpCounters::global().switch_t2b_words.fetch_add(count, std::memory_order_relaxed);
        return trlwe_to_bgv(packed, value_scale_bits);
    }

    // TRLWE (under s3) -> tagged BGV ciphertext (under s_bgv): the torus words
    // map to Z_Q by round(w·Q/2^64), an exact mod-Q homomorphism, so the
    // phase keeps the spread scale Q/2^p.
    BgvCiphertext trlwe_to_bgv(const TrlweCiphertext& packed, u32 value_scale_bits) const {
        const u32 lvl = bgv_->top_level();
        // raw ciphertext under s3: c0 = from_words(b), c1 = -from_words(a)
        BgvCiphertext raw;
        raw.level = lvl;
        raw.scale_bits = value_scale_bits;
        raw.noise_budget_bits = bgv_->params().fresh_budget_bits;
        RnsPoly c0 = bgv_->poly_from_words(packed.b.c, lvl);
        RnsPoly c1 = bgv_->poly_from_words(packed.a.c, lvl);
        for (auto& r : c1.res) r = poly_neg(r);
        raw.parts = {std::move(c0), std::move(c1)};
        return ring_key_switch(raw);
    }

    // key switch c0 + c1·s3 -> under s_bgv via the gadget rows.
    BgvCiphertext ring_key_switch(const BgvCiphertext& under_s3) const {
        const u32 lvl = under_s3.level;
        const size_t n = bgv_->n();
        std::vector<Mpz> lifted = bgv_->lift_poly(under_s3.parts[1], lvl);
        BgvCiphertext out;
        out.level = lvl;
        out.scale_bits = under_s3.scale_bits;
        out.noise_budget_bits = under_s3.noise_budget_bits;
        RnsPoly zero;
        for (size_t i = 0; i <= lvl; ++i) zero.res.emplace_back(bgv_->params().modulus_chain[i], n);
        out.parts = {under_s3.parts[0], zero};
        std::vector<i64> dig(n);
        const u64 base = u64(1) << keys_.ring_base_bits;
        for (size_t j = 0; j < keys_.ring_ksk.size(); ++j) {
            bool any = false;
            for (size_t k = 0; k < n; ++k) {
                dig[k] = static_cast<i64>(mpz_fdiv_ui(lifted[k].raw(), base));
                mpz_fdiv_q_2exp(lifted[k].raw(), lifted[k].raw(), keys_.ring_base_bits);
                any = any || dig[k] != 0;
            }
            if (!any) continue;
            out.parts[0] = bgv_->rns_add(out.parts[0], bgv_->mul_by_int(bgv_->truncate_level(keys_.ring_ksk[j].first, lvl), dig, lvl));
            out.parts[1] = bgv_->rns_add(out.parts[1], bgv_->mul_by_int(bgv_->truncate_level(keys_.ring_ksk[j].second, lvl), dig, lvl));
        }
        return out;
    }

    // ---- gradient reduction: batch sum across lanes before requantization ----
    Tlwe lane_sum_fine(const Extraction& e, size_t lanes) const {
        Tlwe acc = extract_lane_fine(e, 0);
        for (size_t j = 1; j < lanes; ++j) acc = tlwe_add(acc, extract_lane_fine(e, j));
        return acc;
    }

  private:
    BgvContextPtr bgv_;
    TfheContextPtr tfhe_;
    const TfheKeySet* tfhe_keys_;
    BridgeKeys keys_;
};

}  // namespace glyph
