#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "glyph/core/ntt.hpp"
#include "glyph/core/rng.hpp"

namespace glyph {

// Element of Z_q[X]/(X^N+1). Coefficients always reduced to [0, q).
struct ModPoly {
    u64 q = 0;
    std::vector<u64> c;

    ModPoly() = default;
    ModPoly(u64 modulus, size_t n) : q(modulus), c(n, 0) {}

    size_t degree_n() const { return c.size(); }

    static ModPoly zero(u64 q, size_t n) { return ModPoly(q, n); }

    static ModPoly one(u64 q, size_t n) {
        ModPoly p(q, n);
        p.c[0] = 1 % q;
        return p;
    }

    bool operator==(const ModPoly& o) const { return q == o.q && c == o.c; }
};

inline void require_same_ring(const ModPoly& a, const ModPoly& b) {
    if (a.q != b.q || a.c.size() != b.c.size())
        throw ParameterError("polynomial ring mismatch (modulus or degree)");
}

inline ModPoly poly_add(const ModPoly& a, const ModPoly& b) {
    require_same_ring(a, b);
    ModPoly r(a.q, a.c.size());
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = add_mod(a.c[i], b.c[i], a.q);
    return r;
}

inline ModPoly poly_sub(const ModPoly& a, const ModPoly& b) {
    require_same_ring(a, b);
    ModPoly r(a.q, a.c.size());
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = sub_mod(a.c[i], b.c[i], a.q);
    return r;
}

inline ModPoly poly_neg(const ModPoly& a) {
    ModPoly r(a.q, a.c.size());
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = a.c[i] == 0 ? 0 : a.q - a.c[i];
    return r;
}

inline ModPoly poly_scalar_mul(const ModPoly& a, u64 s) {
    ModPoly r(a.q, a.c.size());
    s %= a.q;
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = mul_mod(a.c[i], s, a.q);
    return r;
}

// Multiply by X^k (negacyclic), k in [0, 2N).
inline ModPoly poly_mul_monomial(const ModPoly& a, size_t k) {
    const size_t n = a.c.size();
    ModPoly r(a.q, n);
    k %= 2 * n;
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + k;
        bool flip = false;
        if (j >= 2 * n) j -= 2 * n;
        if (j >= n) { j -= n; flip = true; }
        r.c[j] = flip ? (a.c[i] == 0 ? 0 : a.q - a.c[i]) : a.c[i];
    }
    return r;
}

// Schoolbook negacyclic product; the reference path every fast path must match.
inline ModPoly poly_mul_schoolbook(const ModPoly& a, const ModPoly& b) {
    require_same_ring(a, b);
    const size_t n = a.c.size();
    const u64 q = a.q;
    ModPoly r(q, n);
    for (size_t i = 0; i < n; ++i) {
        if (a.c[i] == 0) continue;
        for (size_t j = 0; j < n; ++j) {
            u64 p = mul_mod(a.c[i], b.c[j], q);
            size_t k = i + j;
            if (k < n) {
                r.c[k] = add_mod(r.c[k], p, q);
            } else {
                r.c[k - n] = sub_mod(r.c[k - n], p, q);
            }
        }
    }
    return r;
}

namespace detail {
// Process-wide NTT table cache keyed by (q, n).
inline const NttTables& ntt_tables_for(u64 q, size_t n) {
    static std::map<std::pair<u64, size_t>, std::unique_ptr<NttTables>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(q, n);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_unique<NttTables>(q, n)).first;
    return *it->second;
}
}  // namespace detail

inline bool ntt_applicable(const ModPoly& a) {
    return is_power_of_two(a.c.size()) && (a.q - 1) % (2 * a.c.size()) == 0;
}

inline ModPoly poly_mul_ntt(const ModPoly& a, const ModPoly& b) {
    require_same_ring(a, b);
    if (!ntt_applicable(a)) throw ParameterError("NTT path needs q ≡ 1 mod 2N");
    const auto& tables = detail::ntt_tables_for(a.q, a.c.size());
    std::vector<u64> fa = a.c, fb = b.c;
    tables.forward(fa.data());
    tables.forward(fb.data());
    for (size_t i = 0; i < fa.size(); ++i) fa[i] = mul_mod(fa[i], fb[i], a.q);
    tables.inverse(fa.data());
    ModPoly r(a.q, a.c.size());
    r.c = std::move(fa);
    return r;
}

// Fast path when available, schoolbook otherwise. Both are exact mod q, so the
// results are bit-identical by construction; tests assert it anyway.
inline ModPoly poly_mul_negacyclic(const ModPoly& a, const ModPoly& b) {
    if (ntt_applicable(a) && a.c.size() >= 32) return poly_mul_ntt(a, b);
    return poly_mul_schoolbook(a, b);
}

inline ModPoly sample_uniform(RandomSource& rng, u64 q, size_t n) {
    ModPoly p(q, n);
    for (auto& x : p.c) x = rng.uniform_below(q);
    return p;
}

// Zero-mean noise from a centered binomial with variance k/2 (σ = sqrt(k/2)).
inline ModPoly sample_cbd(RandomSource& rng, u32 k, u64 q, size_t n) {
    if (k == 0) throw ParameterError("sample_cbd: k must be positive");
    ModPoly p(q, n);
    for (auto& x : p.c) x = mod_reduce_signed(rng.cbd(k), q);
    return p;
}

inline ModPoly sample_ternary(RandomSource& rng, u64 q, size_t n) {
    ModPoly p(q, n);
    for (auto& x : p.c) {
        u64 v = rng.uniform_below(3);  // 0,1,2 -> 0,1,-1
        x = v == 2 ? q - 1 : v;
    }
    return p;
}

}  // namespace glyph
