#pragma once

#include <gmp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>

#include "glyph/core/modpoly.hpp"
#include "glyph/core/serialize.hpp"
#include "glyph/core/toruspoly.hpp"
#include "glyph/profile/counters.hpp"

namespace glyph {

// ---- minimal RAII mpz wrapper ----
class Mpz {
  public:
    Mpz() { mpz_init(z_); }
    explicit Mpz(u64 v) { mpz_init_set_ui(z_, v); }
    Mpz(const Mpz& o) { mpz_init_set(z_, o.z_); }
    Mpz(Mpz&& o) noexcept { mpz_init(z_); mpz_swap(z_, o.z_); }
    Mpz& operator=(const Mpz& o) {
        if (this != &o) mpz_set(z_, o.z_);
        return *this;
    }
    Mpz& operator=(Mpz&& o) noexcept {
        mpz_swap(z_, o.z_);
        return *this;
    }
    ~Mpz() { mpz_clear(z_); }
    mpz_t& raw() { return z_; }
    const mpz_t& raw() const { return z_; }

  private:
    mutable mpz_t z_;
};

struct BgvParams {
    size_t degree_n = 0;          // ring degree N (power of two; slot_count == N)
    u64 plaintext_modulus = 0;    // t, prime with t ≡ 1 (mod 2N)
    std::vector<u64> modulus_chain;  // q_0..q_L, each ≡ 1 (mod 2N) and ≡ 1 (mod t)
    u32 noise_cbd_k = 20;         // centered binomial parameter (σ = sqrt(k/2))
    u32 declared_security_bits = 0;  // λ, recorded metadata only
    u32 depth = 0;                // calibrated usable MultCC depth
    double fresh_budget_bits = 0;  // calibrated fresh-ciphertext budget
    u32 relin_base_bits = 16;

    size_t slot_count() const { return degree_n; }

    void validate() const {
        if (!is_power_of_two(degree_n)) throw ParameterError("BGV: N must be a power of two");
        if (plaintext_modulus < 2 || (plaintext_modulus - 1) % (2 * degree_n) != 0)
            throw ParameterError("BGV: t must satisfy t ≡ 1 mod 2N (full slot splitting)");
        if (modulus_chain.empty()) throw ParameterError("BGV: empty modulus chain");
        for (u64 q : modulus_chain) {
            if ((q - 1) % (2 * degree_n) != 0) throw ParameterError("BGV: chain prime not NTT friendly");
            if ((q - 1) % plaintext_modulus != 0) throw ParameterError("BGV: chain prime not ≡ 1 mod t");
        }
    }

    std::array<u8, 32> hash() const {
        ByteWriter w;
        w.u64v(degree_n);
        w.u64v(plaintext_modulus);
        w.u64s(modulus_chain);
        w.u32v(noise_cbd_k);
        w.u32v(relin_base_bits);
        return Sha256::digest(w.data().data(), w.data().size());
    }
};

// Polynomial in RNS form over the first (level+1) chain primes.
struct RnsPoly {
    std::vector<ModPoly> res;  // res[i] over modulus_chain[i]

    size_t nprimes() const { return res.size(); }
};

class BgvContext;
using BgvContextPtr = std::shared_ptr<const BgvContext>;

struct BgvCiphertext {
    std::vector<RnsPoly> parts;  // 2 (normal) or 3 (pre-relinearization)
    u32 level = 0;               // index: primes 0..level are active
    double noise_budget_bits = 0;  // running estimate, not a measurement
    u32 mult_depth = 0;            // MultCC count along this ciphertext's history
    // Plaintext scale: 0 means the slot-layer scale Δ = (Q-1)/t; a nonzero
    // value p means the bridge scale Q/2^p (payload is an integer mod 2^p).
    // Bridge-born ciphertexts use power-of-two scales so every torus
    // conversion is an exact integer map.
    u32 scale_bits = 0;

    size_t size() const { return parts.size(); }
};

struct BgvSecretKey {
    ModPoly s_int;  // ternary secret lifted to integers {q-1,0,1} over a dummy modulus
    std::vector<i8> s;  // same secret as -1/0/1
};

struct BgvPublicKey {
    RnsPoly b, a;  // b = -(a·s) + t-free noise... (scale form: b = -(a·s) + e)
};

struct BgvEvalKey {
    // evk[j] encrypts 2^{j·w}·s² in raw form: b_j + a_j·s = 2^{jw} s² + e_j
    std::vector<std::pair<RnsPoly, RnsPoly>> rows;  // (b_j, a_j)
    u32 base_bits = 16;
};

struct SlotVector {
    std::vector<u64> values;  // length == slot_count, reduced mod t
};

class BgvContext : public std::enable_shared_from_this<BgvContext> {
  public:
    explicit BgvContext(BgvParams p) : params_(std::move(p)) {
        params_.validate();
        hash_ = params_.hash();
        const size_t L = params_.modulus_chain.size();
        // per-level CRT precomputation
        q_big_.resize(L);
        delta_mod_.resize(L);
        qhat_.resize(L);
        qhat_inv_.resize(L);
        half_q_.resize(L);
        Mpz Q(1);
        for (size_t l = 0; l < L; ++l) {
            mpz_mul_ui(Q.raw(), Q.raw(), params_.modulus_chain[l]);
            q_big_[l] = Q;
            mpz_fdiv_q_2exp(half_q_[l].raw(), Q.raw(), 1);
            // Δ_l = (Q_l - 1)/t  (exact: every prime ≡ 1 mod t)
            Mpz delta;
            mpz_sub_ui(delta.raw(), Q.raw(), 1);
            mpz_divexact_ui(delta.raw(), delta.raw(), params_.plaintext_modulus);
            delta_big_.push_back(delta);
            delta_mod_[l].resize(l + 1);
            for (size_t i = 0; i <= l; ++i)
                delta_mod_[l][i] = mpz_fdiv_ui(delta.raw(), params_.modulus_chain[i]);
            qhat_[l].resize(l + 1);
            qhat_inv_[l].resize(l + 1);
            for (size_t i = 0; i <= l; ++i) {
                Mpz qh;
                mpz_divexact_ui(qh.raw(), Q.raw(), params_.modulus_chain[i]);
                u64 qh_mod = mpz_fdiv_ui(qh.raw(), params_.modulus_chain[i]);
                qhat_[l][i] = qh;
                qhat_inv_[l][i] = inv_mod(qh_mod, params_.modulus_chain[i]);
            }
        }
        // Auxiliary basis for exact tensor products: product(aux) > 2N·Q_top.
        {
            Mpz need(2 * params_.degree_n);
            mpz_mul(need.raw(), need.raw(), q_big_[L - 1].raw());
            Mpz have(1);
            u64 aux = find_prime_congruent((u64(1) << 59), 2 * params_.degree_n);
            while (mpz_cmp(have.raw(), need.raw()) <= 0) {
                while (std::find(params_.modulus_chain.begin(), params_.modulus_chain.end(), aux) !=
                       params_.modulus_chain.end())
                    aux = find_prime_congruent(aux + 1, 2 * params_.degree_n);
                aux_primes_.push_back(aux);
                mpz_mul_ui(have.raw(), have.raw(), aux);
                aux = find_prime_congruent(aux + 1, 2 * params_.degree_n);
            }
        }
        // NTT tables warm-up
        for (u64 q : params_.modulus_chain) detail::ntt_tables_for(q, params_.degree_n);
        for (u64 q : aux_primes_) detail::ntt_tables_for(q, params_.degree_n);
        detail::ntt_tables_for(params_.plaintext_modulus, params_.degree_n);
    }

    const BgvParams& params() const { return params_; }
    const std::array<u8, 32>& params_hash() const { return hash_; }
    u32 top_level() const { return static_cast<u32>(params_.modulus_chain.size() - 1); }
    u64 t() const { return params_.plaintext_modulus; }
    size_t n() const { return params_.degree_n; }

    // ---- key generation ----
    struct KeySet {
        BgvSecretKey sk;
        BgvPublicKey pk;
        BgvEvalKey evk;
    };

    KeySet keygen(RandomSource& rng) const {
        KeySet ks;
        RandomSource r_s = rng.child(0x5b67);
        ks.sk.s.resize(n());
        for (auto& v : ks.sk.s) {
            u64 x = r_s.uniform_below(3);
            v = x == 2 ? -1 : static_cast<i8>(x);
        }
        RandomSource r_pk = rng.child(0x9021);
        ks.pk.a = sample_uniform_rns(r_pk, top_level());
        RnsPoly as = mul_by_secret(ks.pk.a, ks.sk, top_level());
        RnsPoly e = sample_noise_rns(r_pk, top_level());
        ks.pk.b = rns_sub(e, as);  // b = e - a·s  =>  b + a·s = e

        // relinearization key on 2^{jw}·s²
        ks.evk.base_bits = params_.relin_base_bits;
        std::vector<i64> s2 = secret_square(ks.sk);
        const size_t qbits = mpz_sizeinbase(q_big_[top_level()].raw(), 2);
        const size_t digits = ceil_div(qbits, ks.evk.base_bits);
        RandomSource r_evk = rng.child(0xe07a);
        for (size_t j = 0; j < digits; ++j) {
            RnsPoly aj = sample_uniform_rns(r_evk, top_level());
            RnsPoly ej = sample_noise_rns(r_evk, top_level());
            RnsPoly bj = rns_sub(ej, mul_by_secret(aj, ks.sk, top_level()));
            // += 2^{jw}·s² reduced per prime
            for (size_t i = 0; i <= top_level(); ++i) {
                const u64 q = params_.modulus_chain[i];
                Mpz pw;
                mpz_ui_pow_ui(pw.raw(), 2, j * ks.evk.base_bits);
                u64 scale = mpz_fdiv_ui(pw.raw(), q);
                for (size_t k = 0; k < n(); ++k) {
                    u64 s2k = mod_reduce_signed(s2[k], q);
                    bj.res[i].c[k] = add_mod(bj.res[i].c[k], mul_mod(scale, s2k, q), q);
                }
            }
            ks.evk.rows.emplace_back(std::move(bj), std::move(aj));
        }
        return ks;
    }

    // ---- encoding ----
    ModPoly slot_encode(const SlotVector& v) const {
        if (v.values.size() != slot_count_checked()) throw ParameterError("slot_encode: wrong length");
        ModPoly m(t(), n());
        for (size_t i = 0; i < n(); ++i) m.c[i] = v.values[i] % t();
        const auto& tables = detail::ntt_tables_for(t(), n());
        tables.inverse(m.c.data());
        return m;
    }

    SlotVector slot_decode(const ModPoly& m) const {
        if (m.q != t() || m.c.size() != n()) throw ParameterError("slot_decode: wrong plaintext ring");
        std::vector<u64> v = m.c;
        const auto& tables = detail::ntt_tables_for(t(), n());
        tables.forward(v.data());
        return SlotVector{std::move(v)};
    }

    // Batch-lane encoding: value v_j at coefficient X^j. The batch axis of all
    // training tensors. A constant-coefficient polynomial acts uniformly on
    // every lane under ring multiplication.
    ModPoly lane_encode(const std::vector<i64>& lanes) const {
        if (lanes.size() > n()) throw ParameterError("lane_encode: too many lanes");
        ModPoly m(t(), n());
        for (size_t i = 0; i < lanes.size(); ++i) m.c[i] = mod_reduce_signed(lanes[i], t());
        return m;
    }

    std::vector<i64> lane_decode(const ModPoly& m, size_t count) const {
        std::vector<i64> v(count);
        for (size_t i = 0; i < count; ++i) v[i] = center_mod(m.c[i], t());
        return v;
    }

    // Conjugate lane layout: (d · conj(δ)) coefficient 0 equals Σ_s d[s]·δ[s].
    ModPoly lane_encode_conjugate(const std::vector<i64>& lanes) const {
        ModPoly m(t(), n());
        if (lanes.empty()) return m;
        m.c[0] = mod_reduce_signed(lanes[0], t());
        for (size_t i = 1; i < lanes.size(); ++i) m.c[n() - i] = mod_reduce_signed(-lanes[i], t());
        return m;
    }

    // ---- encryption ----
    BgvCiphertext encrypt(const ModPoly& m, const BgvPublicKey& pk, RandomSource& rng) const {
        if (m.q != t() || m.c.size() != n()) throw ParameterError("encrypt: plaintext ring mismatch");
        const u32 lvl = top_level();
        RandomSource r = rng.child(0xe4c9);
        std::vector<i64> u(n());
        for (auto& x : u) {
            u64 v = r.uniform_below(3);
            x = v == 2 ? -1 : static_cast<i64>(v);
        }
        RnsPoly c0 = mul_by_int(pk.b, u, lvl);
        RnsPoly c1 = mul_by_int(pk.a, u, lvl);
        RnsPoly e1 = sample_noise_rns(r, lvl);
        RnsPoly e2 = sample_noise_rns(r, lvl);
        c0 = rns_add(c0, e1);
        c1 = rns_add(c1, e2);
        // += Δ·m
        for (size_t i = 0; i <= lvl; ++i) {
            const u64 q = params_.modulus_chain[i];
            const u64 dl = delta_mod_[lvl][i];
            for (size_t k = 0; k < n(); ++k)
                c0.res[i].c[k] = add_mod(c0.res[i].c[k], mul_mod(dl, m.c[k] % q, q), q);
        }
        BgvCiphertext ct;
        ct.parts = {std::move(c0), std::move(c1)};
        ct.level = lvl;
        ct.noise_budget_bits = params_.fresh_budget_bits;
        return ct;
    }

    // Raw-phase encryption: phase(ct) = P + e with P given in RNS (key material).
    BgvCiphertext encrypt_raw(const RnsPoly& P, const BgvSecretKey& sk, RandomSource& rng, u32 lvl) const {
        RandomSource r = rng.child(0x7a11);
        RnsPoly a = sample_uniform_rns(r, lvl);
        RnsPoly e = sample_noise_rns(r, lvl);
        RnsPoly b = rns_add(rns_sub(e, mul_by_secret(a, sk, lvl)), P);
        BgvCiphertext ct;
        ct.parts = {std::move(b), std::move(a)};
        ct.level = lvl;
        ct.noise_budget_bits = params_.fresh_budget_bits;
        return ct;
    }

    ModPoly decrypt(const BgvCiphertext& ct, const BgvSecretKey& sk) const {
        if (ct.noise_budget_bits <= 0)
            throw BudgetError("decrypt refused: estimated noise budget exhausted after depth " +
                              std::to_string(ct.mult_depth));
        if (ct.scale_bits != 0) throw ParameterError("decrypt: use decrypt_tagged for bridge-scale ciphertexts");
        std::vector<Mpz> phase = phase_big(ct, sk);
        ModPoly m(t(), n());
        const Mpz& Q = q_big_[ct.level];
        Mpz tmp, r;
        for (size_t k = 0; k < n(); ++k) {
            // m_k = round(t·phase/Q) mod t
            mpz_mul_ui(tmp.raw(), phase[k].raw(), t());
            mpz_fdiv_q_2exp(r.raw(), Q.raw(), 1);
            mpz_add(tmp.raw(), tmp.raw(), r.raw());
            mpz_fdiv_q(tmp.raw(), tmp.raw(), Q.raw());
            m.c[k] = mpz_fdiv_ui(tmp.raw(), t());
        }
        return m;
    }

    // ---- bridge-scale (power-of-two Δ' = Q/2^p) ciphertext layer ----

    // Trivial-plus-encryption of integer lanes at scale Q/2^p.
    BgvCiphertext encrypt_tagged(const std::vector<i64>& lanes, u32 p, const BgvPublicKey& pk,
                                 RandomSource& rng) const {
        ModPoly zero(t(), n());
        BgvCiphertext ct = encrypt(zero, pk, rng);
        ct.scale_bits = p;
        add_tagged_plain_inplace(ct, lanes, false);
        return ct;
    }

    // Centered payload lanes of a tagged ciphertext: round(phase·2^p/Q) mod 2^p.
    std::vector<i64> decrypt_tagged(const BgvCiphertext& ct, const BgvSecretKey& sk, size_t count) const {
        if (ct.scale_bits == 0) throw ParameterError("decrypt_tagged: ciphertext has the slot-layer scale");
        std::vector<Mpz> phase = phase_big(ct, sk);
        const Mpz& Q = q_big_[ct.level];
        Mpz tmp, half;
        mpz_fdiv_q_2exp(half.raw(), Q.raw(), 1);
        std::vector<i64> out(count);
        const u64 mod = u64(1) << ct.scale_bits;
        for (size_t k = 0; k < count; ++k) {
            mpz_mul_2exp(tmp.raw(), phase[k].raw(), ct.scale_bits);
            mpz_add(tmp.raw(), tmp.raw(), half.raw());
            mpz_fdiv_q(tmp.raw(), tmp.raw(), Q.raw());
            u64 v = mpz_fdiv_ui(tmp.raw(), mod);
            out[k] = v >= mod / 2 ? static_cast<i64>(v) - static_cast<i64>(mod) : static_cast<i64>(v);
        }
        return out;
    }

    // ct += lanes·Q/2^p (plaintext add in the tagged world; subtract for labels).
    void add_tagged_plain_inplace(BgvCiphertext& ct, const std::vector<i64>& lanes, bool negate) const {
        if (ct.scale_bits == 0) throw ParameterError("tagged plain add on a slot-scale ciphertext");
        const u32 lvl = ct.level;
        Mpz tmp, half;
        Mpz two_p;
        mpz_ui_pow_ui(two_p.raw(), 2, ct.scale_bits);
        mpz_fdiv_q_2exp(half.raw(), two_p.raw(), 1);
        for (size_t k = 0; k < lanes.size(); ++k) {
            if (lanes[k] == 0) continue;
            // round(v·Q/2^p)
            mpz_mul_si(tmp.raw(), q_big_[lvl].raw(), lanes[k]);
            mpz_add(tmp.raw(), tmp.raw(), half.raw());
            mpz_fdiv_q_2exp(tmp.raw(), tmp.raw(), ct.scale_bits);
            if (negate) mpz_neg(tmp.raw(), tmp.raw());
            for (size_t i = 0; i <= lvl; ++i) {
                const u64 q = params_.modulus_chain[i];
                u64 add = mpz_fdiv_ui(tmp.raw(), q);
                ct.parts[0].res[i].c[k] = add_mod(ct.parts[0].res[i].c[k], add, q);
            }
        }
    }

    // ---- homomorphic operations ----
    BgvCiphertext add_cc(const BgvCiphertext& x, const BgvCiphertext& y) const {
        require_compatible(x, y);
        if (x.scale_bits != y.scale_bits) throw ParameterError("add_cc: plaintext scale mismatch");
        OpCounters::global().add_cc.fetch_add(1, std::memory_order_relaxed);
        BgvCiphertext r;
        r.level = x.level;
        r.scale_bits = x.scale_bits;
        r.mult_depth = std::max(x.mult_depth, y.mult_depth);
        const size_t parts = std::max(x.size(), y.size());
        for (size_t p = 0; p < parts; ++p) {
            if (p < x.size() && p < y.size()) {
                r.parts.push_back(rns_add(x.parts[p], y.parts[p]));
            } else {
                r.parts.push_back(p < x.size() ? x.parts[p] : y.parts[p]);
            }
        }
        r.noise_budget_bits = std::min(x.noise_budget_bits, y.noise_budget_bits) - 1;
        return r;
    }

    BgvCiphertext negate(const BgvCiphertext& x) const {
        BgvCiphertext r = x;
        for (auto& part : r.parts)
            for (auto& rp : part.res) rp = poly_neg(rp);
        return r;
    }

    BgvCiphertext sub_cc(const BgvCiphertext& x, const BgvCiphertext& y) const { return add_cc(x, negate(y)); }

    BgvCiphertext add_cp(const BgvCiphertext& x, const ModPoly& m) const {
        if (m.q != t()) throw ParameterError("add_cp: plaintext modulus mismatch");
        BgvCiphertext r = x;
        for (size_t i = 0; i <= x.level; ++i) {
            const u64 q = params_.modulus_chain[i];
            const u64 dl = delta_mod_[x.level][i];
            for (size_t k = 0; k < n(); ++k)
                r.parts[0].res[i].c[k] = add_mod(r.parts[0].res[i].c[k], mul_mod(dl, m.c[k] % q, q), q);
        }
        r.noise_budget_bits = x.noise_budget_bits;
        return r;
    }

    BgvCiphertext mult_cp(const BgvCiphertext& x, const ModPoly& m) const {
        if (m.q != t()) throw ParameterError("mult_cp: plaintext modulus mismatch");
        OpCounters::global().mult_cp.fetch_add(1, std::memory_order_relaxed);
        BgvCiphertext r;
        r.level = x.level;
        r.scale_bits = x.scale_bits;
        r.mult_depth = x.mult_depth;
        // centered lift of m so small negative constants stay small
        std::vector<i64> mi(n());
        double maxabs = 1;
        for (size_t k = 0; k < n(); ++k) {
            mi[k] = center_mod(m.c[k], t());
            maxabs = std::max(maxabs, static_cast<double>(std::abs(mi[k])));
        }
        for (const auto& part : x.parts) r.parts.push_back(mul_by_int(part, mi, x.level));
        r.noise_budget_bits = x.noise_budget_bits - std::log2(maxabs) - 1;
        return r;
    }

    // Degree-2 product (no relinearization); decryptable with s². The tensor
    // is formed over the extended basis Q ∪ aux so the integer product is
    // exact before the rescale. The rescale divisor is x's scale numerator
    // (t for slot-layer operands, 2^p for bridge-scale ones); the product
    // inherits y's scale, so one multiplication never mixes conventions.
    BgvCiphertext mult_cc_raw(const BgvCiphertext& x, const BgvCiphertext& y) const {
        require_compatible(x, y);
        if (x.size() != 2 || y.size() != 2) throw ParameterError("mult_cc: operands must be 2-part");
        if (x.noise_budget_bits < mult_budget_cost() || y.noise_budget_bits < mult_budget_cost())
            throw BudgetError("MultCC refused: estimated budget too low (chain depth " +
                              std::to_string(std::max(x.mult_depth, y.mult_depth)) + ")");
        const u32 lvl = x.level;
        // basis: chain primes 0..lvl followed by all aux primes
        std::vector<u64> basis(params_.modulus_chain.begin(), params_.modulus_chain.begin() + lvl + 1);
        basis.insert(basis.end(), aux_primes_.begin(), aux_primes_.end());
        auto extend = [&](const RnsPoly& p) {
            std::vector<Mpz> lifted = lift_poly(p, lvl);
            std::vector<ModPoly> out;
            out.reserve(basis.size());
            for (u64 q : basis) {
                ModPoly m(q, n());
                for (size_t k = 0; k < n(); ++k) m.c[k] = mpz_fdiv_ui(lifted[k].raw(), q);
                out.push_back(std::move(m));
            }
            return out;
        };
        auto x0 = extend(x.parts[0]), x1 = extend(x.parts[1]);
        auto y0 = extend(y.parts[0]), y1 = extend(y.parts[1]);
        const size_t nb = basis.size();
        std::vector<std::vector<ModPoly>> d(3);
        for (size_t i = 0; i < nb; ++i) {
            d[0].push_back(poly_mul_negacyclic(x0[i], y0[i]));
            d[1].push_back(poly_add(poly_mul_negacyclic(x0[i], y1[i]), poly_mul_negacyclic(x1[i], y0[i])));
            d[2].push_back(poly_mul_negacyclic(x1[i], y1[i]));
        }
        Mpz num;
        if (x.scale_bits == 0) {
            mpz_set_ui(num.raw(), t());
        } else {
            mpz_ui_pow_ui(num.raw(), 2, x.scale_bits);
        }
        BgvCiphertext r;
        r.level = lvl;
        r.scale_bits = y.scale_bits;
        for (int part = 0; part < 3; ++part) r.parts.push_back(rescale_from_basis(d[part], basis, lvl, num));
        r.noise_budget_bits = std::min(x.noise_budget_bits, y.noise_budget_bits) - mult_budget_cost();
        r.mult_depth = std::max(x.mult_depth, y.mult_depth) + 1;
        return r;
    }

    BgvCiphertext relinearize(const BgvCiphertext& x, const BgvEvalKey& evk) const {
        if (x.size() != 3) throw ParameterError("relinearize: expected 3-part ciphertext");
        const u32 lvl = x.level;
        // digit-decompose d2 over base 2^w (positional, via CRT lift)
        std::vector<Mpz> lifted = lift_poly(x.parts[2], lvl);
        const size_t qbits = mpz_sizeinbase(q_big_[lvl].raw(), 2);
        const size_t digits = std::min(evk.rows.size(), ceil_div(qbits, evk.base_bits));
        BgvCiphertext r;
        r.level = lvl;
        r.mult_depth = x.mult_depth;
        r.parts = {x.parts[0], x.parts[1]};
        std::vector<i64> dig(n());
        std::vector<Mpz> rem = std::move(lifted);
        for (size_t j = 0; j < digits; ++j) {
            for (size_t k = 0; k < n(); ++k) {
                dig[k] = static_cast<i64>(mpz_fdiv_ui(rem[k].raw(), u64(1) << evk.base_bits));
                mpz_fdiv_q_2exp(rem[k].raw(), rem[k].raw(), evk.base_bits);
            }
            RnsPoly tb = mul_by_int(truncate_level(evk.rows[j].first, lvl), dig, lvl);
            RnsPoly ta = mul_by_int(truncate_level(evk.rows[j].second, lvl), dig, lvl);
            r.parts[0] = rns_add(r.parts[0], tb);
            r.parts[1] = rns_add(r.parts[1], ta);
        }
        r.noise_budget_bits = x.noise_budget_bits - 1;
        return r;
    }

    // MultCC per the spec contract: tensor, relinearize, consume one level.
    BgvCiphertext mult_cc(const BgvCiphertext& x, const BgvCiphertext& y, const BgvEvalKey& evk) const {
        OpCounters::global().mult_cc.fetch_add(1, std::memory_order_relaxed);
        BgvCiphertext r = relinearize(mult_cc_raw(x, y), evk);
        return mod_switch(r);
    }

    // Scale-preserving multiplication by a small integer constant (the tagged
    // world's ciphertext-by-plaintext product).
    BgvCiphertext mult_scalar(const BgvCiphertext& x, i64 c) const {
        OpCounters::global().mult_cp.fetch_add(1, std::memory_order_relaxed);
        BgvCiphertext r;
        r.level = x.level;
        r.scale_bits = x.scale_bits;
        r.mult_depth = x.mult_depth;
        std::vector<i64> cp(n(), 0);
        cp[0] = c;
        for (const auto& part : x.parts) r.parts.push_back(mul_by_int(part, cp, x.level));
        r.noise_budget_bits = x.noise_budget_bits - std::log2(std::max<double>(2.0, std::abs(double(c))));
        return r;
    }

    BgvCiphertext mod_switch(const BgvCiphertext& x) const {
        OpCounters::global().mod_switches.fetch_add(1, std::memory_order_relaxed);
        if (x.level == 0)
            throw BudgetError("mod_switch: already at the bottom of the modulus chain (depth " +
                              std::to_string(x.mult_depth) + ")");
        const u64 ql = params_.modulus_chain[x.level];
        const u64 half = ql / 2;
        BgvCiphertext r;
        r.level = x.level - 1;
        r.scale_bits = x.scale_bits;
        r.mult_depth = x.mult_depth;
        r.noise_budget_bits = x.noise_budget_bits;  // relative margin is preserved
        for (const auto& part : x.parts) {
            RnsPoly np;
            np.res.reserve(x.level);
            const ModPoly& last = part.res[x.level];
            for (size_t i = 0; i < x.level; ++i) {
                const u64 qi = params_.modulus_chain[i];
                const u64 ql_inv = inv_mod(ql % qi, qi);
                ModPoly rp(qi, n());
                for (size_t k = 0; k < n(); ++k) {
                    // round(v/ql): subtract centered residue then exact-divide
                    u64 vl = last.c[k];
                    u64 vl_c = vl > half ? vl + qi - (ql % qi) : vl;  // centered rep mod qi
                    u64 num = sub_mod(part.res[i].c[k], vl_c % qi, qi);
                    rp.c[k] = mul_mod(num, ql_inv, qi);
                }
                np.res.push_back(std::move(rp));
            }
            r.parts.push_back(std::move(np));
        }
        return r;
    }

    // ---- measurement (secret-key oracles, test/tooling only) ----
    double noise_budget(const BgvCiphertext& ct, const BgvSecretKey& sk) const {
        // Distance of the phase to the nearest scale-grid point: the margin
        // before the rounding in decryption corrupts the plaintext digit. For
        // tagged ciphertexts the grid is the rational Q/2^p, measured as
        // phase·2^p mod Q.
        std::vector<Mpz> phase = phase_big(ct, sk);
        Mpz e, half_d, maxe, delta;
        if (ct.scale_bits == 0) {
            mpz_set(delta.raw(), delta_big_[ct.level].raw());
        } else {
            mpz_set(delta.raw(), q_big_[ct.level].raw());
        }
        mpz_fdiv_q_2exp(half_d.raw(), delta.raw(), 1);
        mpz_set_ui(maxe.raw(), 0);
        Mpz scaled;
        for (size_t k = 0; k < n(); ++k) {
            if (ct.scale_bits == 0) {
                mpz_mod(e.raw(), phase[k].raw(), delta.raw());
            } else {
                mpz_mul_2exp(scaled.raw(), phase[k].raw(), ct.scale_bits);
                mpz_mod(e.raw(), scaled.raw(), delta.raw());
            }
            if (mpz_cmp(e.raw(), half_d.raw()) > 0) mpz_sub(e.raw(), e.raw(), delta.raw());
            mpz_abs(e.raw(), e.raw());
            if (mpz_cmp(e.raw(), maxe.raw()) > 0) mpz_set(maxe.raw(), e.raw());
        }
        if (mpz_cmp_ui(maxe.raw(), 0) == 0) return static_cast<double>(mpz_sizeinbase(delta.raw(), 2));
        long exp_d, exp_e;
        double dd = mpz_get_d_2exp(&exp_d, delta.raw());
        double de = mpz_get_d_2exp(&exp_e, maxe.raw());
        return (std::log2(dd) + exp_d) - (std::log2(de) + exp_e) - 1.0;
    }

    double mult_budget_cost() const { return 4.0; }

    // Exact phase words for the bridge: word_k ≈ 2^64·lift(p_k)/Q.
    std::vector<u64> phase_words(const RnsPoly& p, u32 lvl) const {
        std::vector<Mpz> lifted = lift_poly(p, lvl);
        std::vector<u64> words(n());
        const Mpz& Q = q_big_[lvl];
        Mpz tmp, half;
        mpz_fdiv_q_2exp(half.raw(), Q.raw(), 1);
        for (size_t k = 0; k < n(); ++k) {
            mpz_mul_2exp(tmp.raw(), lifted[k].raw(), 64);
            mpz_add(tmp.raw(), tmp.raw(), half.raw());
            mpz_fdiv_q(tmp.raw(), tmp.raw(), Q.raw());
            words[k] = mpz_get_ui(tmp.raw());
        }
        return words;
    }

    // Rescale a ciphertext's coefficients by num/den with rounding (used by the
    // bridge to land torus-scaled phases on the Δ grid).
    BgvCiphertext scale_round(const BgvCiphertext& ct, const Mpz& num, const Mpz& den) const {
        BgvCiphertext r;
        r.level = ct.level;
        r.mult_depth = ct.mult_depth;
        r.noise_budget_bits = ct.noise_budget_bits;
        Mpz tmp, half, centered;
        const Mpz& Q = q_big_[ct.level];
        Mpz half_q;
        mpz_fdiv_q_2exp(half_q.raw(), Q.raw(), 1);
        mpz_fdiv_q_2exp(half.raw(), den.raw(), 1);
        for (const auto& part : ct.parts) {
            std::vector<Mpz> lifted = lift_poly(part, ct.level);
            RnsPoly np;
            for (size_t i = 0; i <= ct.level; ++i) np.res.emplace_back(params_.modulus_chain[i], n());
            for (size_t k = 0; k < n(); ++k) {
                mpz_set(centered.raw(), lifted[k].raw());
                if (mpz_cmp(centered.raw(), half_q.raw()) > 0) mpz_sub(centered.raw(), centered.raw(), Q.raw());
                mpz_mul(tmp.raw(), centered.raw(), num.raw());
                mpz_add(tmp.raw(), tmp.raw(), half.raw());
                mpz_fdiv_q(tmp.raw(), tmp.raw(), den.raw());
                for (size_t i = 0; i <= ct.level; ++i) np.res[i].c[k] = mpz_fdiv_ui(tmp.raw(), params_.modulus_chain[i]);
            }
            r.parts.push_back(std::move(np));
        }
        return r;
    }

    const Mpz& big_modulus(u32 lvl) const { return q_big_[lvl]; }
    const Mpz& delta(u32 lvl) const { return delta_big_[lvl]; }

    // Build an RNS poly from torus words: coeff_k = round(word·Q/2^64).
    RnsPoly poly_from_words(const std::vector<u64>& words, u32 lvl) const {
        RnsPoly p;
        Mpz tmp;
        for (size_t i = 0; i <= lvl; ++i) p.res.emplace_back(params_.modulus_chain[i], n());
        for (size_t k = 0; k < n(); ++k) {
            mpz_mul_ui(tmp.raw(), q_big_[lvl].raw(), words[k]);
            mpz_add(tmp.raw(), tmp.raw(), Mpz(u64(1) << 63).raw());
            mpz_fdiv_q_2exp(tmp.raw(), tmp.raw(), 64);
            for (size_t i = 0; i <= lvl; ++i) p.res[i].c[k] = mpz_fdiv_ui(tmp.raw(), params_.modulus_chain[i]);
        }
        return p;
    }

    // ---- RNS helpers (public: the bridge composes them) ----
    RnsPoly rns_add(const RnsPoly& a, const RnsPoly& b) const {
        RnsPoly r;
        for (size_t i = 0; i < std::min(a.nprimes(), b.nprimes()); ++i) r.res.push_back(poly_add(a.res[i], b.res[i]));
        return r;
    }

    RnsPoly rns_sub(const RnsPoly& a, const RnsPoly& b) const {
        RnsPoly r;
        for (size_t i = 0; i < std::min(a.nprimes(), b.nprimes()); ++i) r.res.push_back(poly_sub(a.res[i], b.res[i]));
        return r;
    }

    RnsPoly rns_mul(const RnsPoly& a, const RnsPoly& b) const {
        RnsPoly r;
        for (size_t i = 0; i < std::min(a.nprimes(), b.nprimes()); ++i)
            r.res.push_back(poly_mul_negacyclic(a.res[i], b.res[i]));
        return r;
    }

    RnsPoly mul_by_int(const RnsPoly& a, const std::vector<i64>& m, u32 lvl) const {
        RnsPoly r;
        for (size_t i = 0; i <= lvl; ++i) {
            const u64 q = params_.modulus_chain[i];
            ModPoly mi(q, n());
            for (size_t k = 0; k < n(); ++k) mi.c[k] = mod_reduce_signed(m[k], q);
            r.res.push_back(poly_mul_negacyclic(a.res[i], mi));
        }
        return r;
    }

    RnsPoly truncate_level(const RnsPoly& a, u32 lvl) const {
        RnsPoly r;
        for (size_t i = 0; i <= lvl; ++i) r.res.push_back(a.res[i]);
        return r;
    }

    RnsPoly sample_uniform_rns(RandomSource& rng, u32 lvl) const {
        // One integer stream, reduced into every prime, so RNS residues are consistent.
        RnsPoly p;
        for (size_t i = 0; i <= lvl; ++i) p.res.emplace_back(params_.modulus_chain[i], n());
        for (size_t k = 0; k < n(); ++k) {
            // uniform over Q via per-prime uniform CRT components
            for (size_t i = 0; i <= lvl; ++i) p.res[i].c[k] = rng.uniform_below(params_.modulus_chain[i]);
        }
        return p;
    }

    RnsPoly sample_noise_rns(RandomSource& rng, u32 lvl) const {
        RnsPoly p;
        for (size_t i = 0; i <= lvl; ++i) p.res.emplace_back(params_.modulus_chain[i], n());
        for (size_t k = 0; k < n(); ++k) {
            i64 e = rng.cbd(params_.noise_cbd_k);
            for (size_t i = 0; i <= lvl; ++i) p.res[i].c[k] = mod_reduce_signed(e, params_.modulus_chain[i]);
        }
        return p;
    }

    RnsPoly mul_by_secret(const RnsPoly& a, const BgvSecretKey& sk, u32 lvl) const {
        std::vector<i64> s(n());
        for (size_t k = 0; k < n(); ++k) s[k] = sk.s[k];
        return mul_by_int(a, s, lvl);
    }

    std::vector<Mpz> lift_poly(const RnsPoly& p, u32 lvl) const {
        std::vector<Mpz> out(n());
        Mpz term;
        for (size_t k = 0; k < n(); ++k) {
            mpz_set_ui(out[k].raw(), 0);
            for (size_t i = 0; i <= lvl; ++i) {
                const u64 qi = params_.modulus_chain[i];
                u64 coef = mul_mod(p.res[i].c[k], qhat_inv_[lvl][i], qi);
                mpz_mul_ui(term.raw(), qhat_[lvl][i].raw(), coef);
                mpz_add(out[k].raw(), out[k].raw(), term.raw());
            }
            mpz_mod(out[k].raw(), out[k].raw(), q_big_[lvl].raw());
        }
        return out;
    }

    ModPoly decrypt_noguard(const BgvCiphertext& ct, const BgvSecretKey& sk) const {
        std::vector<Mpz> phase = phase_big(ct, sk);
        ModPoly m(t(), n());
        Mpz tmp, half;
        const Mpz& Q = q_big_[ct.level];
        mpz_fdiv_q_2exp(half.raw(), Q.raw(), 1);
        for (size_t k = 0; k < n(); ++k) {
            mpz_mul_ui(tmp.raw(), phase[k].raw(), t());
            mpz_add(tmp.raw(), tmp.raw(), half.raw());
            mpz_fdiv_q(tmp.raw(), tmp.raw(), Q.raw());
            m.c[k] = mpz_fdiv_ui(tmp.raw(), t());
        }
        return m;
    }

  private:
    size_t slot_count_checked() const { return params_.slot_count(); }

    std::vector<Mpz> phase_big(const BgvCiphertext& ct, const BgvSecretKey& sk) const {
        const u32 lvl = ct.level;
        RnsPoly acc = ct.parts[0];
        RnsPoly spow = ct.parts.size() > 1 ? mul_by_secret(ct.parts[1], sk, lvl) : RnsPoly{};
        if (ct.parts.size() > 1) acc = rns_add(acc, spow);
        if (ct.parts.size() > 2) {
            std::vector<i64> s2 = secret_square(sk);
            acc = rns_add(acc, mul_by_int(ct.parts[2], s2, lvl));
        }
        return lift_poly(acc, lvl);
    }

    std::vector<i64> secret_square(const BgvSecretKey& sk) const {
        // s² as small integers (negacyclic square of a ternary poly)
        const size_t N = n();
        std::vector<i64> s2(N, 0);
        for (size_t i = 0; i < N; ++i) {
            if (sk.s[i] == 0) continue;
            for (size_t j = 0; j < N; ++j) {
                if (sk.s[j] == 0) continue;
                i64 p = static_cast<i64>(sk.s[i]) * sk.s[j];
                size_t k = i + j;
                if (k < N) {
                    s2[k] += p;
                } else {
                    s2[k - N] -= p;
                }
            }
        }
        return s2;
    }

    // Exact CRT lift from an arbitrary prime basis, then round(num·v/Q_lvl),
    // then reduce back into the chain primes of the level.
    RnsPoly rescale_from_basis(const std::vector<ModPoly>& res, const std::vector<u64>& basis, u32 lvl,
                               const Mpz& num) const {
        const size_t nb = basis.size();
        Mpz big(1);
        for (u64 q : basis) mpz_mul_ui(big.raw(), big.raw(), q);
        std::vector<Mpz> qhat(nb);
        std::vector<u64> qhat_inv(nb);
        for (size_t i = 0; i < nb; ++i) {
            mpz_divexact_ui(qhat[i].raw(), big.raw(), basis[i]);
            qhat_inv[i] = inv_mod(mpz_fdiv_ui(qhat[i].raw(), basis[i]), basis[i]);
        }
        RnsPoly out;
        for (size_t i = 0; i <= lvl; ++i) out.res.emplace_back(params_.modulus_chain[i], n());
        const Mpz& Q = q_big_[lvl];
        Mpz v, term, tmp, half_big, half;
        mpz_fdiv_q_2exp(half.raw(), Q.raw(), 1);
        mpz_fdiv_q_2exp(half_big.raw(), big.raw(), 1);
        for (size_t k = 0; k < n(); ++k) {
            mpz_set_ui(v.raw(), 0);
            for (size_t i = 0; i < nb; ++i) {
                u64 coef = mul_mod(res[i].c[k], qhat_inv[i], basis[i]);
                mpz_mul_ui(term.raw(), qhat[i].raw(), coef);
                mpz_add(v.raw(), v.raw(), term.raw());
            }
            mpz_mod(v.raw(), v.raw(), big.raw());
            // negacyclic products go negative: take the centered representative
            if (mpz_cmp(v.raw(), half_big.raw()) > 0) mpz_sub(v.raw(), v.raw(), big.raw());
            mpz_mul(tmp.raw(), v.raw(), num.raw());
            mpz_add(tmp.raw(), tmp.raw(), half.raw());
            mpz_fdiv_q(tmp.raw(), tmp.raw(), Q.raw());
            for (size_t i = 0; i <= lvl; ++i) out.res[i].c[k] = mpz_fdiv_ui(tmp.raw(), params_.modulus_chain[i]);
        }
        return out;
    }

    void require_compatible(const BgvCiphertext& x, const BgvCiphertext& y) const {
        if (x.level != y.level)
            throw ParameterError("ciphertext level mismatch: " + std::to_string(x.level) + " vs " +
                                 std::to_string(y.level));
    }

    BgvParams params_;
    std::array<u8, 32> hash_{};
    std::vector<u64> aux_primes_;
    std::vector<Mpz> q_big_, half_q_;
    std::vector<Mpz> delta_big_;
    std::vector<std::vector<u64>> delta_mod_;
    std::vector<std::vector<Mpz>> qhat_;
    std::vector<std::vector<u64>> qhat_inv_;
};

// ---- test-only refresh (decrypt-recrypt behind an explicit trust flag) ----
class RefreshOracle {
  public:
    RefreshOracle(BgvContextPtr ctx, BgvSecretKey sk, BgvPublicKey pk, bool test_mode, RandomSource rng)
        : ctx_(std::move(ctx)), sk_(std::move(sk)), pk_(std::move(pk)), test_mode_(test_mode), rng_(rng) {}

    BgvCiphertext refresh(const BgvCiphertext& ct) {
        if (!test_mode_)
            throw ModeError("bgv_refresh invoked in production mode; the refresh oracle is test/simulation only");
        if (ct.scale_bits != 0) {
            std::vector<i64> lanes = ctx_->decrypt_tagged(ct, sk_, ctx_->n());
            return ctx_->encrypt_tagged(lanes, ct.scale_bits, pk_, rng_);
        }
        ModPoly m = ctx_->decrypt_noguard(ct, sk_);
        return ctx_->encrypt(m, pk_, rng_);
    }

    bool test_mode() const { return test_mode_; }

  private:
    BgvContextPtr ctx_;
    BgvSecretKey sk_;
    BgvPublicKey pk_;
    bool test_mode_;
    RandomSource rng_;
};

// ---- serialization ----
inline void serialize_rns_poly(ByteWriter& w, const RnsPoly& p) {
    w.u8v(static_cast<u8>(p.nprimes()));
    for (const auto& r : p.res) {
        w.u64v(r.q);
        w.u64s(r.c);
    }
}

inline RnsPoly deserialize_rns_poly(ByteReader& r) {
    RnsPoly p;
    u8 np = r.u8v();
    for (u8 i = 0; i < np; ++i) {
        u64 q = r.u64v();
        ModPoly m(q, 0);
        m.c = r.u64s();
        p.res.push_back(std::move(m));
    }
    return p;
}

inline std::vector<u8> serialize_bgv_ciphertext(const BgvContext& ctx, const BgvCiphertext& ct) {
    ByteWriter w;
    write_container_header(w, SchemeTag::kBgv, ctx.params_hash());
    w.u16v(static_cast<u16>(ct.level));
    w.u8v(static_cast<u8>(ct.parts.size()));
    w.u32v(ct.mult_depth);
    w.u32v(ct.scale_bits);
    w.u64v(static_cast<u64>(ct.noise_budget_bits * 1024.0));
    for (const auto& p : ct.parts) serialize_rns_poly(w, p);
    return w.data();
}

inline BgvCiphertext deserialize_bgv_ciphertext(const BgvContext& ctx, const std::vector<u8>& bytes) {
    ByteReader r(bytes);
    std::array<u8, 32> h;
    if (read_container_header(r, h) != SchemeTag::kBgv) throw DataError("not a BGV ciphertext container");
    if (h != ctx.params_hash()) throw DataError("BGV ciphertext was produced under different parameters");
    BgvCiphertext ct;
    ct.level = r.u16v();
    u8 parts = r.u8v();
    ct.mult_depth = r.u32v();
    ct.scale_bits = r.u32v();
    ct.noise_budget_bits = static_cast<double>(r.u64v()) / 1024.0;
    for (u8 i = 0; i < parts; ++i) ct.parts.push_back(deserialize_rns_poly(r));
    return ct;
}

}  // namespace glyph
