#pragma once

#include <cmath>
#include <functional>

#include "glyph/core/rng.hpp"
#include "glyph/core/serialize.hpp"
#include "glyph/core/toruspoly.hpp"
#include "glyph/profile/counters.hpp"

namespace glyph {

// ---- parameters ----

struct TfheLevelParams {
    u32 n = 0;                // LWE dimension (level 3: ring degree)
    double alpha = 0;         // minimal noise standard deviation on the torus
    u32 security_bits = 0;    // declared λ, metadata only
};

struct GadgetSpec {
    u32 base_bits = 6;
    u32 len = 3;
};

struct TfheParams {
    TfheLevelParams level1;   // TLWE carrier for gate bits
    TfheLevelParams level2;   // bridge key-switch path
    TfheLevelParams level3;   // TRLWE/TRGSW ring
    GadgetSpec gate_gadget{6, 3};   // TRGSW gadget for Boolean gates
    GadgetSpec fine_gadget{5, 5};   // TRGSW gadget for value-domain bootstraps
    GadgetSpec ks_l1{1, 13};        // ring->level1 LWE keyswitch (binary digits)
    GadgetSpec ks_l2{3, 8};         // ring->level2 LWE keyswitch
    GadgetSpec pack_gadget{4, 6};   // level2 -> TRLWE packing keyswitch

    size_t ring_n() const { return level3.n; }

    void validate() const {
        if (!is_power_of_two(level3.n)) throw ParameterError("TFHE ring degree must be a power of two");
        if (level1.n == 0 || level2.n == 0) throw ParameterError("TFHE level dimensions must be positive");
        if (level1.alpha <= 0 || level2.alpha <= 0 || level3.alpha <= 0)
            throw ParameterError("TFHE noise parameters must be positive");
        auto covers = [](const GadgetSpec& g) { return g.base_bits * g.len >= 16; };
        if (!covers(gate_gadget) || !covers(fine_gadget))
            throw ParameterError("TRGSW gadget too shallow for the torus word");
    }

    std::array<u8, 32> hash() const {
        ByteWriter w;
        for (const auto* l : {&level1, &level2, &level3}) {
            w.u32v(l->n);
            w.u64v(static_cast<u64>(l->alpha * 1e18));
        }
        for (const auto* g : {&gate_gadget, &fine_gadget, &ks_l1, &ks_l2, &pack_gadget}) {
            w.u32v(g->base_bits);
            w.u32v(g->len);
        }
        return Sha256::digest(w.data().data(), w.data().size());
    }
};

// noise word scale for a CBD(32) draw (σ = 4): one sample = cbd(32)·scale
inline u64 noise_scale_for_alpha(double alpha) {
    double sigma_word = alpha * std::pow(2.0, 64);
    double scale = sigma_word / 4.0;
    if (scale < 1.0) return 1;
    return static_cast<u64>(scale);
}

// ---- ciphertexts ----

// Single LWE sample over the torus; gate convention encodes bits at ±1/8,
// integer conventions encode v/(2D) ("spread") or v·(Δ/Q) ("fine").
struct Tlwe {
    std::vector<u64> a;
    u64 b = 0;

    size_t dim() const { return a.size(); }
};

inline Tlwe tlwe_trivial(u64 mu, size_t dim) {
    Tlwe t;
    t.a.assign(dim, 0);
    t.b = mu;
    return t;
}

inline Tlwe tlwe_add(const Tlwe& x, const Tlwe& y) {
    if (x.dim() != y.dim()) throw ParameterError("TLWE dimension mismatch");
    Tlwe r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    r.b += y.b;
    return r;
}

inline Tlwe tlwe_sub(const Tlwe& x, const Tlwe& y) {
    if (x.dim() != y.dim()) throw ParameterError("TLWE dimension mismatch");
    Tlwe r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
    r.b -= y.b;
    return r;
}

inline Tlwe tlwe_neg(const Tlwe& x) {
    Tlwe r;
    r.a.resize(x.dim());
    for (size_t i = 0; i < x.a.size(); ++i) r.a[i] = ~x.a[i] + 1;
    r.b = ~x.b + 1;
    return r;
}

inline Tlwe tlwe_scale(const Tlwe& x, u64 c) {
    Tlwe r = x;
    for (auto& v : r.a) v *= c;
    r.b *= c;
    return r;
}

struct TrlweCiphertext {
    TorusPoly a, b;
};

// TRGSW sample in pre-transformed (NTT) form; rows 0..len-1 carry the gadget
// on the a part, rows len..2len-1 on the b part.
struct TrgswCiphertext {
    GadgetSpec g;
    std::vector<std::array<TorusPolyNtt, 2>> rows;  // (a, b) transformed
};

// ---- keys ----

struct TfheSecretKeys {
    std::vector<i8> s1;  // level-1 binary key
    std::vector<i8> s2;  // level-2 binary key
    std::vector<i8> s3;  // ring key bits (level 3), also the extracted-LWE key
};

struct BootstrapKey {
    u32 in_dim = 0;
    GadgetSpec g;
    std::vector<TrgswCiphertext> rows;  // TRGSW(s_in[i])
};

struct LweKeySwitchKey {
    u32 from_dim = 0, to_dim = 0;
    GadgetSpec g;
    // rows[i][j] encrypts s_from[i] · 2^(64-(j+1)·base) under the target key
    std::vector<std::vector<Tlwe>> rows;
};

struct PackKeySwitchKey {
    u32 from_dim = 0;
    GadgetSpec g;
    // rows[i][j]: TRLWE(s_from[i] · 2^(64-(j+1)·base) · X^0)
    std::vector<std::vector<TrlweCiphertext>> rows;
};

class TfheContext;
using TfheContextPtr = std::shared_ptr<const TfheContext>;

struct TfheKeySet {
    TfheSecretKeys sk;         // held by the data owner; tests use it as oracle
    BootstrapKey bsk_gate;     // level1 -> ring, gate gadget (Boolean gates)
    BootstrapKey bsk_fine;     // level1 -> ring, fine gadget (recompose value FBs)
    BootstrapKey bsk_l2_gate;  // level2 -> ring, gate gadget (decompose bit FBs)
    BootstrapKey bsk_l2_fine;  // level2 -> ring, fine gadget (window value FBs)
    LweKeySwitchKey ksk_l1;    // ring -> level1
    LweKeySwitchKey ksk_l2;    // ring -> level2
    PackKeySwitchKey pksk;     // level2 -> TRLWE(ring)
};

// Gate-convention plaintext points.
inline constexpr u64 kGateTrue = u64(1) << 61;                 // +1/8
inline constexpr u64 kGateFalse = ~(u64(1) << 61) + 1;         // -1/8
inline constexpr u64 kGateEighth = u64(1) << 61;

class TfheContext : public std::enable_shared_from_this<TfheContext> {
  public:
    explicit TfheContext(TfheParams p) : params_(std::move(p)) {
        params_.validate();
        hash_ = params_.hash();
        detail::ntt_tables_for(detail::conv_prime_for(params_.ring_n()), params_.ring_n());
    }

    const TfheParams& params() const { return params_; }
    const std::array<u8, 32>& params_hash() const { return hash_; }
    size_t ring_n() const { return params_.ring_n(); }

    // ---- key generation ----
    TfheKeySet keygen(RandomSource& rng) const {
        TfheKeySet k;
        RandomSource r = rng.child(0x7fe);
        auto sample_bits = [&](u32 n) {
            std::vector<i8> s(n);
            for (auto& b : s) b = static_cast<i8>(r.uniform_below(2));
            return s;
        };
        k.sk.s1 = sample_bits(params_.level1.n);
        k.sk.s2 = sample_bits(params_.level2.n);
        k.sk.s3 = sample_bits(static_cast<u32>(ring_n()));
        k.bsk_gate = make_bootstrap_key(k.sk.s1, k.sk.s3, params_.gate_gadget, r.child(1));
        k.bsk_fine = make_bootstrap_key(k.sk.s1, k.sk.s3, params_.fine_gadget, r.child(2));
        k.bsk_l2_gate = make_bootstrap_key(k.sk.s2, k.sk.s3, params_.gate_gadget, r.child(7));
        k.bsk_l2_fine = make_bootstrap_key(k.sk.s2, k.sk.s3, params_.fine_gadget, r.child(3));
        k.ksk_l1 = make_lwe_keyswitch_key(k.sk.s3, k.sk.s1, params_.ks_l1, params_.level1.alpha, r.child(4));
        k.ksk_l2 = make_lwe_keyswitch_key(k.sk.s3, k.sk.s2, params_.ks_l2, params_.level2.alpha, r.child(5));
        k.pksk = make_pack_keyswitch_key(k.sk.s2, k.sk.s3, params_.pack_gadget, r.child(6));
        return k;
    }

    // Bootstrap key for an external (e.g. lattice-engine) binary/ternary key.
    BootstrapKey make_bootstrap_key(const std::vector<i8>& s_in, const std::vector<i8>& s_ring,
                                    const GadgetSpec& g, RandomSource rng) const {
        BootstrapKey bk;
        bk.in_dim = static_cast<u32>(s_in.size());
        bk.g = g;
        bk.rows.reserve(s_in.size());
        for (size_t i = 0; i < s_in.size(); ++i) bk.rows.push_back(trgsw_encrypt(s_in[i], s_ring, g, rng));
        return bk;
    }

    LweKeySwitchKey make_lwe_keyswitch_key(const std::vector<i8>& s_from, const std::vector<i8>& s_to,
                                           const GadgetSpec& g, double alpha, RandomSource rng) const {
        LweKeySwitchKey k;
        k.from_dim = static_cast<u32>(s_from.size());
        k.to_dim = static_cast<u32>(s_to.size());
        k.g = g;
        k.rows.resize(s_from.size());
        for (size_t i = 0; i < s_from.size(); ++i) {
            k.rows[i].reserve(g.len);
            for (u32 j = 0; j < g.len; ++j) {
                u64 mu = static_cast<u64>(static_cast<i64>(s_from[i])) << (64 - (j + 1) * g.base_bits);
                k.rows[i].push_back(lwe_encrypt_raw(mu, s_to, alpha, rng));
            }
        }
        return k;
    }

    PackKeySwitchKey make_pack_keyswitch_key(const std::vector<i8>& s_from, const std::vector<i8>& s_ring,
                                             const GadgetSpec& g, RandomSource rng) const {
        PackKeySwitchKey k;
        k.from_dim = static_cast<u32>(s_from.size());
        k.g = g;
        k.rows.resize(s_from.size());
        for (size_t i = 0; i < s_from.size(); ++i) {
            for (u32 j = 0; j < g.len; ++j) {
                TorusPoly mu(ring_n());
                mu.c[0] = static_cast<u64>(static_cast<i64>(s_from[i])) << (64 - (j + 1) * g.base_bits);
                k.rows[i].push_back(trlwe_encrypt_poly(mu, s_ring, params_.level3.alpha, rng));
            }
        }
        return k;
    }

    // ---- low-level encrypt/decrypt ----
    Tlwe lwe_encrypt_raw(u64 mu, const std::vector<i8>& s, double alpha, RandomSource& rng) const {
        Tlwe t;
        t.a.resize(s.size());
        for (auto& w : t.a) w = rng.next_u64();
        u64 dot = 0;
        for (size_t i = 0; i < s.size(); ++i) dot += t.a[i] * static_cast<u64>(static_cast<i64>(s[i]));
        u64 scale = noise_scale_for_alpha(alpha);
        t.b = dot + mu + static_cast<u64>(rng.cbd(32)) * scale;
        return t;
    }

    u64 lwe_phase(const Tlwe& t, const std::vector<i8>& s) const {
        if (t.dim() != s.size()) throw ParameterError("phase: key dimension mismatch");
        u64 dot = 0;
        for (size_t i = 0; i < s.size(); ++i) dot += t.a[i] * static_cast<u64>(static_cast<i64>(s[i]));
        return t.b - dot;
    }

    TrlweCiphertext trlwe_encrypt_poly(const TorusPoly& mu, const std::vector<i8>& s_ring, double alpha,
                                       RandomSource& rng) const {
        TrlweCiphertext c;
        const size_t n = ring_n();
        c.a = TorusPoly(n);
        for (auto& w : c.a.c) w = rng.next_u64();
        std::vector<i64> s(n);
        for (size_t i = 0; i < n; ++i) s[i] = s_ring[i];
        c.b = torus_mul_int_ntt(s, c.a);
        u64 scale = noise_scale_for_alpha(alpha);
        for (size_t i = 0; i < n; ++i) c.b.c[i] += mu.c[i] + static_cast<u64>(rng.cbd(32)) * scale;
        return c;
    }

    TorusPoly trlwe_phase(const TrlweCiphertext& c, const std::vector<i8>& s_ring) const {
        std::vector<i64> s(ring_n());
        for (size_t i = 0; i < ring_n(); ++i) s[i] = s_ring[i];
        return torus_sub(c.b, torus_mul_int_ntt(s, c.a));
    }

    TrgswCiphertext trgsw_encrypt(i64 m, const std::vector<i8>& s_ring, const GadgetSpec& g,
                                  RandomSource& rng) const {
        TrgswCiphertext c;
        c.g = g;
        const size_t n = ring_n();
        TorusPoly zero(n);
        for (u32 part = 0; part < 2; ++part) {
            for (u32 j = 0; j < g.len; ++j) {
                TrlweCiphertext row = trlwe_encrypt_poly(zero, s_ring, params_.level3.alpha, rng);
                u64 gj = (g.base_bits * (j + 1) >= 64) ? 1 : (u64(1) << (64 - (j + 1) * g.base_bits));
                u64 add = static_cast<u64>(m) * gj;
                if (part == 0) {
                    row.a.c[0] += add;
                } else {
                    row.b.c[0] += add;
                }
                c.rows.push_back({TorusPolyNtt(row.a), TorusPolyNtt(row.b)});
            }
        }
        return c;
    }

    // ---- external product and CMUX ----

    // rotated = p·X^rot − p, into a reusable buffer
    void rotate_sub_into(const TorusPoly& p, size_t rot, TorusPoly& out) const {
        const size_t n = p.c.size();
        out.c.resize(n);
        rot %= 2 * n;
        for (size_t i = 0; i < n; ++i) {
            size_t j = i + rot;
            bool flip = false;
            if (j >= 2 * n) j -= 2 * n;
            if (j >= n) { j -= n; flip = true; }
            out.c[j] = (flip ? (~p.c[i] + 1) : p.c[i]);
        }
        for (size_t i = 0; i < n; ++i) out.c[i] -= p.c[i];
    }

    // Balanced signed digit decomposition of a torus polynomial under g.
    static void gadget_decompose(const TorusPoly& p, const GadgetSpec& g, std::vector<std::vector<i64>>& out) {
        const size_t n = p.c.size();
        if (out.size() != g.len || (g.len && out[0].size() != n)) out.assign(g.len, std::vector<i64>(n));
        const u64 base = u64(1) << g.base_bits;
        const u64 half_base = base >> 1;
        // rounding offset: 2^(63 - len*base) keeps the dropped tail centered
        const u32 tail = 64 - g.len * g.base_bits;
        const u64 round_off = tail > 0 ? (u64(1) << (tail - 1)) : 0;
        for (size_t k = 0; k < n; ++k) {
            u64 v = p.c[k] + round_off;
            u64 carry = 0;
            for (u32 j = g.len; j-- > 0;) {
                u64 shift = 64 - (j + 1) * g.base_bits;
                u64 digit = ((v >> shift) & (base - 1)) + carry;
                carry = 0;
                if (digit >= half_base) {
                    out[j][k] = static_cast<i64>(digit) - static_cast<i64>(base);
                    carry = 1;
                } else {
                    out[j][k] = static_cast<i64>(digit);
                }
            }
        }
    }

    // TRGSW ⊠ TRLWE external product.
    TrlweCiphertext external_product(const TrgswCiphertext& g, const TrlweCiphertext& c) const {
        const size_t n = ring_n();
        thread_local std::vector<std::vector<i64>> da, db;
        gadget_decompose(c.a, g.g, da);
        gadget_decompose(c.b, g.g, db);
        TorusConvAccumulator acc_a(n), acc_b(n);
        for (u32 j = 0; j < g.g.len; ++j) {
            acc_a.accumulate_pair(da[j], g.rows[j][0], acc_b, g.rows[j][1]);
            acc_a.accumulate_pair(db[j], g.rows[g.g.len + j][0], acc_b, g.rows[g.g.len + j][1]);
        }
        TrlweCiphertext r;
        r.a = acc_a.finish();
        r.b = acc_b.finish();
        return r;
    }

    // CMUX: selector TRGSW(bit): bit ? d1 : d0.
    TrlweCiphertext cmux(const TrgswCiphertext& sel, const TrlweCiphertext& d1, const TrlweCiphertext& d0) const {
        TrlweCiphertext diff{torus_sub(d1.a, d0.a), torus_sub(d1.b, d0.b)};
        TrlweCiphertext prod = external_product(sel, diff);
        return {torus_add(d0.a, prod.a), torus_add(d0.b, prod.b)};
    }

    // acc <- acc + sel ⊠ (acc·X^rot − acc), writing through scratch buffers.
    void cmux_rotate_inplace(TrlweCiphertext& acc, const TrgswCiphertext& sel, size_t rot) const {
        const size_t n = ring_n();
        thread_local TorusPoly diff_a, diff_b;
        rotate_sub_into(acc.a, rot, diff_a);
        rotate_sub_into(acc.b, rot, diff_b);
        thread_local std::vector<std::vector<i64>> da, db;
        gadget_decompose(diff_a, sel.g, da);
        gadget_decompose(diff_b, sel.g, db);
        thread_local std::unique_ptr<TorusConvAccumulator> acc_a, acc_b;
        if (!acc_a || acc_a->size() != n) {
            acc_a = std::make_unique<TorusConvAccumulator>(n);
            acc_b = std::make_unique<TorusConvAccumulator>(n);
        }
        acc_a->reset();
        acc_b->reset();
        for (u32 j = 0; j < sel.g.len; ++j) {
            acc_a->accumulate_pair(da[j], sel.rows[j][0], *acc_b, sel.rows[j][1]);
            acc_a->accumulate_pair(db[j], sel.rows[sel.g.len + j][0], *acc_b, sel.rows[sel.g.len + j][1]);
        }
        acc_a->finish_add(acc.a);
        acc_b->finish_add(acc.b);
    }

    // ---- blind rotation / bootstrapping ----

    // acc <- testv · X^{-phase·2N}; returns the extracted coefficient-0 LWE
    // under the ring key. Callers key-switch to their destination level.
    Tlwe blind_rotate_extract(const Tlwe& in, const TorusPoly& testv, const BootstrapKey& bsk) const {
        if (in.dim() != bsk.in_dim) throw ParameterError("bootstrap: input dimension does not match key");
        const size_t n = ring_n();
        const u64 two_n = 2 * n;
        auto switch_to_2n = [&](u64 w) {
            // round(w·2N / 2^64)
            return static_cast<u64>((static_cast<u128>(w) * two_n + (u128(1) << 63)) >> 64) % two_n;
        };
        u64 b_idx = switch_to_2n(in.b);
        TrlweCiphertext acc;
        acc.a = TorusPoly(n);
        acc.b = torus_mul_monomial(testv, two_n - b_idx);
        for (u32 i = 0; i < bsk.in_dim; ++i) {
            u64 ai = switch_to_2n(in.a[i]);
            if (ai == 0) continue;
            cmux_rotate_inplace(acc, bsk.rows[i], ai);
        }
        return sample_extract(acc, 0);
    }

    Tlwe sample_extract(const TrlweCiphertext& c, size_t index) const {
        const size_t n = ring_n();
        if (index >= n) throw ParameterError("sample_extract: index out of range");
        Tlwe t;
        t.a.resize(n);
        for (size_t k = 0; k <= index; ++k) t.a[k] = c.a.c[index - k];
        for (size_t k = index + 1; k < n; ++k) t.a[k] = ~c.a.c[n + index - k] + 1;
        t.b = c.b.c[index];
        return t;
    }

    Tlwe key_switch(const Tlwe& in, const LweKeySwitchKey& k) const {
        if (in.dim() != k.from_dim) throw ParameterError("key_switch: key dimension mismatch (params hash)");
        OpCounters::global().key_switches.fetch_add(1, std::memory_order_relaxed);
        Tlwe out = tlwe_trivial(in.b, k.to_dim);
        const u64 base = u64(1) << k.g.base_bits;
        const u32 total_bits = k.g.base_bits * k.g.len;
        for (u32 i = 0; i < k.from_dim; ++i) {
            // round a_i to the kept precision, then digit-decompose
            u64 v = in.a[i] + (total_bits < 64 ? (u64(1) << (63 - total_bits)) : 0);
            for (u32 j = 0; j < k.g.len; ++j) {
                u64 digit = (v >> (64 - (j + 1) * k.g.base_bits)) & (base - 1);
                if (digit == 0) continue;
                const Tlwe& row = k.rows[i][j];
                if (digit == 1) {
                    out = tlwe_sub(out, row);
                } else {
                    out = tlwe_sub(out, tlwe_scale(row, digit));
                }
            }
        }
        return out;
    }

    // Pack level-2 LWE values into TRLWE coefficients: value_i -> coeff pos_i.
    // Each input may carry its own negation flag (conjugate packing) and all
    // inputs land in one TRLWE.
    TrlweCiphertext pack_keyswitch(const std::vector<Tlwe>& ins, const std::vector<size_t>& positions,
                                   const std::vector<bool>& negate, const PackKeySwitchKey& k) const {
        const size_t n = ring_n();
        TrlweCiphertext acc{TorusPoly(n), TorusPoly(n)};
        const u64 base = u64(1) << k.g.base_bits;
        const u32 total_bits = k.g.base_bits * k.g.len;
        for (size_t idx = 0; idx < ins.size(); ++idx) {
            const Tlwe& in = ins[idx];
            if (in.dim() != k.from_dim) throw ParameterError("pack_keyswitch: dimension mismatch");
            OpCounters::global().key_switches.fetch_add(1, std::memory_order_relaxed);
            const size_t pos = positions[idx];
            const bool neg = negate[idx];
            u64 bword = neg ? (~in.b + 1) : in.b;
            acc.b.c[pos] += bword;
            for (u32 i = 0; i < k.from_dim; ++i) {
                u64 ai = neg ? (~in.a[i] + 1) : in.a[i];
                u64 v = ai + (total_bits < 64 ? (u64(1) << (63 - total_bits)) : 0);
                for (u32 j = 0; j < k.g.len; ++j) {
                    u64 digit = (v >> (64 - (j + 1) * k.g.base_bits)) & (base - 1);
                    if (digit == 0) continue;
                    const TrlweCiphertext& row = k.rows[i][j];
                    // acc -= digit · X^pos · row
                    TorusPoly ra = torus_mul_monomial(row.a, pos);
                    TorusPoly rb = torus_mul_monomial(row.b, pos);
                    for (size_t c = 0; c < n; ++c) {
                        acc.a.c[c] -= digit * ra.c[c];
                        acc.b.c[c] -= digit * rb.c[c];
                    }
                }
            }
        }
        return acc;
    }

    // ---- gate layer (level-1 bits, ±1/8 convention) ----

    Tlwe encrypt_gate_bit(bool bit, const TfheSecretKeys& sk, RandomSource& rng) const {
        return lwe_encrypt_raw(bit ? kGateTrue : kGateFalse, sk.s1, params_.level1.alpha, rng);
    }

    bool decrypt_gate_bit(const Tlwe& t, const TfheSecretKeys& sk) const {
        const std::vector<i8>& key = t.dim() == sk.s1.size() ? sk.s1 : (t.dim() == sk.s2.size() ? sk.s2 : sk.s3);
        u64 phase = lwe_phase(t, key);
        return phase < (u64(1) << 63);  // positive half of the torus
    }

    TorusPoly sign_test_poly() const {
        TorusPoly v(ring_n());
        for (auto& w : v.c) w = kGateEighth;
        return v;
    }

    // Bootstrapped NAND-family gates: linear combination then sign bootstrap.
    Tlwe gate_bootstrap(const Tlwe& combo, const TfheKeySet& keys) const {
        OpCounters::global().bootstraps.fetch_add(1, std::memory_order_relaxed);
        Tlwe raw = blind_rotate_extract(combo, sign_test_poly(), keys.bsk_gate);
        return key_switch(raw, keys.ksk_l1);
    }

    Tlwe gate_and(const Tlwe& x, const Tlwe& y, const TfheKeySet& keys) const {
        Tlwe c = tlwe_add(x, y);
        c.b -= kGateEighth;
        return gate_bootstrap(c, keys);
    }

    Tlwe gate_or(const Tlwe& x, const Tlwe& y, const TfheKeySet& keys) const {
        Tlwe c = tlwe_add(x, y);
        c.b += kGateEighth;
        return gate_bootstrap(c, keys);
    }

    Tlwe gate_nand(const Tlwe& x, const Tlwe& y, const TfheKeySet& keys) const {
        Tlwe c = tlwe_neg(tlwe_add(x, y));
        c.b += kGateEighth;
        return gate_bootstrap(c, keys);
    }

    Tlwe gate_xor(const Tlwe& x, const Tlwe& y, const TfheKeySet& keys) const {
        Tlwe c = tlwe_scale(tlwe_add(x, y), 2);
        c.b += 2 * kGateEighth;
        return gate_bootstrap(c, keys);
    }

    Tlwe gate_not(const Tlwe& x) const { return tlwe_neg(x); }

    // MUX: two bootstrapped gates on the critical path plus one key switch.
    Tlwe gate_mux(const Tlwe& sel, const Tlwe& x1, const Tlwe& x0, const TfheKeySet& keys) const {
        auto& ctr = OpCounters::global();
        ctr.bootstraps.fetch_add(2, std::memory_order_relaxed);
        Tlwe c1 = tlwe_add(sel, x1);
        c1.b -= kGateEighth;
        Tlwe u1 = blind_rotate_extract(c1, sign_test_poly(), keys.bsk_gate);
        Tlwe c0 = tlwe_add(tlwe_neg(sel), x0);
        c0.b -= kGateEighth;
        Tlwe u0 = blind_rotate_extract(c0, sign_test_poly(), keys.bsk_gate);
        Tlwe sum = tlwe_add(u1, u0);
        sum.b += kGateEighth;
        return key_switch(sum, keys.ksk_l1);
    }

    // ---- functional (programmable) bootstrapping ----

    // Builds the negacyclic test polynomial for a table over signed domain
    // [-D/2, D/2), input in spread convention phase = v/(2D).
    TorusPoly test_poly_from_table(const std::function<u64(i64)>& out, u64 domain) const {
        const size_t n = ring_n();
        if (domain > n) throw ParameterError("functional bootstrap: domain exceeds ring degree");
        if (!is_power_of_two(domain)) throw ParameterError("functional bootstrap: domain must be a power of two");
        const size_t band = n / domain;
        TorusPoly v(n);
        for (size_t j = 0; j < n; ++j) {
            u64 bucket = j / band;
            if (bucket < domain / 2) {
                v.c[j] = out(static_cast<i64>(bucket));
            } else {
                v.c[j] = ~out(static_cast<i64>(bucket) - static_cast<i64>(domain)) + 1;
            }
        }
        return v;
    }

    // Spread-convention input offset so value bands are centred on buckets.
    u64 spread_half_band(u64 domain) const { return (u64(1) << 62) / domain; }

    // in encodes v/(2D); returns extracted ring-level LWE of out(v).
    Tlwe functional_bootstrap(const Tlwe& in, const std::function<u64(i64)>& out, u64 domain,
                              const BootstrapKey& bsk) const {
        OpCounters::global().functional_bootstraps.fetch_add(1, std::memory_order_relaxed);
        Tlwe shifted = in;
        shifted.b += spread_half_band(domain);
        return blind_rotate_extract(shifted, test_poly_from_table(out, domain), bsk);
    }

    // Gate-convention input (±1/8): returns `high` where the phase is positive
    // and `low` otherwise, with the full 1/8 margin of the gate encoding.
    Tlwe sign_select_bootstrap(const Tlwe& in, u64 high, u64 low, const BootstrapKey& bsk) const {
        OpCounters::global().functional_bootstraps.fetch_add(1, std::memory_order_relaxed);
        const u64 half_diff = (high - low) / 2;
        TorusPoly v(ring_n());
        for (auto& w : v.c) w = half_diff;
        Tlwe r = blind_rotate_extract(in, v, bsk);
        r.b += low + half_diff + ((high - low) & 1);
        return r;
    }

    // spread encoding helpers
    static u64 spread_encode(i64 v, u64 domain) {
        // v/(2D) on the torus
        return static_cast<u64>(v) * ((u64(1) << 63) / domain);
    }

    static i64 spread_decode(u64 word, u64 domain) {
        u64 two_d = 2 * domain;
        u64 k = decode_torus(word, two_d);
        i64 v = static_cast<i64>(k);
        if (v >= static_cast<i64>(domain)) v -= static_cast<i64>(two_d);
        return v;
    }

  private:
    TfheParams params_;
    std::array<u8, 32> hash_{};
};

// ---- profiles ----

inline TfheParams tfhe_params_micro() {
    TfheParams p;
    p.level1 = {280, 6.10e-5, 80};
    p.level2 = {800, 3.29e-10, 128};
    p.level3 = {1024, 1.42e-10, 156};
    return p;
}

inline TfheParams tfhe_params_toy() {
    TfheParams p;
    p.level1 = {64, 3.0e-5, 0};
    p.level2 = {128, 1.0e-9, 0};
    p.level3 = {256, 1.0e-9, 0};
    p.ks_l1 = {1, 13};
    return p;
}

// ---- serialization ----

inline void serialize_tlwe(ByteWriter& w, const Tlwe& t) {
    w.u64s(t.a);
    w.u64v(t.b);
}

inline Tlwe deserialize_tlwe(ByteReader& r) {
    Tlwe t;
    t.a = r.u64s();
    t.b = r.u64v();
    return t;
}

inline std::vector<u8> serialize_tlwe_container(const TfheContext& ctx, const Tlwe& t) {
    ByteWriter w;
    write_container_header(w, SchemeTag::kTlwe, ctx.params_hash());
    serialize_tlwe(w, t);
    return w.data();
}

inline Tlwe deserialize_tlwe_container(const TfheContext& ctx, const std::vector<u8>& bytes) {
    ByteReader r(bytes);
    std::array<u8, 32> h;
    if (read_container_header(r, h) != SchemeTag::kTlwe) throw DataError("not a TLWE container");
    if (h != ctx.params_hash()) throw DataError("TLWE ciphertext from different parameters");
    return deserialize_tlwe(r);
}

inline std::vector<u8> serialize_trlwe_container(const TfheContext& ctx, const TrlweCiphertext& t) {
    ByteWriter w;
    write_container_header(w, SchemeTag::kTrlwe, ctx.params_hash());
    w.u64s(t.a.c);
    w.u64s(t.b.c);
    return w.data();
}

inline TrlweCiphertext deserialize_trlwe_container(const TfheContext& ctx, const std::vector<u8>& bytes) {
    ByteReader r(bytes);
    std::array<u8, 32> h;
    if (read_container_header(r, h) != SchemeTag::kTrlwe) throw DataError("not a TRLWE container");
    if (h != ctx.params_hash()) throw DataError("TRLWE ciphertext from different parameters");
    TrlweCiphertext t;
    t.a.c = r.u64s();
    t.b.c = r.u64s();
    return t;
}

}  // namespace glyph
