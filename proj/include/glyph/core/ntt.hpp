#pragma once

#include <vector>

#include "glyph/core/common.hpp"

namespace glyph {

inline u64 mul_mod(u64 a, u64 b, u64 q) { return static_cast<u64>((static_cast<u128>(a) * b) % q); }

inline u64 add_mod(u64 a, u64 b, u64 q) {
    u64 s = a + b;
    if (s >= q || s < a) s -= q;
    return s;
}

inline u64 sub_mod(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

inline u64 pow_mod(u64 base, u64 exp, u64 q) {
    u64 r = 1 % q;
    base %= q;
    while (exp) {
        if (exp & 1) r = mul_mod(r, base, q);
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    return r;
}

inline u64 inv_mod(u64 a, u64 q) { return pow_mod(a, q - 2, q); }  // q prime

inline bool is_prime_u64(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) { d >>= 1; ++s; }
    for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        u64 x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool witness = true;
        for (int r = 1; r < s; ++r) {
            x = mul_mod(x, x, n);
            if (x == n - 1) { witness = false; break; }
        }
        if (witness) return false;
    }
    return true;
}

// Smallest prime p >= start with p ≡ 1 (mod m).
inline u64 find_prime_congruent(u64 start, u64 m) {
    u64 p = start + ((m + 1 - start % m) % m);
    if (p < start) p += m;
    while (!is_prime_u64(p) || p % m != 1) p += m;
    return p;
}

// Shoup pre-scaled multiplication: returns a*b mod q given bShoup = floor(b*2^64/q).
inline u64 mul_mod_shoup(u64 a, u64 b, u64 b_shoup, u64 q) {
    u64 hi = static_cast<u64>((static_cast<u128>(a) * b_shoup) >> 64);
    u64 r = a * b - hi * q;
    if (r >= q) r -= q;
    return r;
}

inline u64 shoup_precompute(u64 b, u64 q) { return static_cast<u64>((static_cast<u128>(b) << 64) / q); }

// Negacyclic NTT over Z_q[X]/(X^n+1), q prime with q ≡ 1 (mod 2n).
// Bit-reversed Cooley-Tukey with Harvey-style lazy butterflies.
class NttTables {
  public:
    NttTables() = default;

    NttTables(u64 q, size_t n) : q_(q), n_(n) {
        if (!is_power_of_two(n)) throw ParameterError("NTT size must be a power of two");
        if ((q - 1) % (2 * n) != 0) throw ParameterError("NTT prime must satisfy q ≡ 1 mod 2n");
        // 2n-th primitive root: g^((q-1)/2n) for a generator-ish g. Search deterministically.
        u64 psi = 0;
        for (u64 g = 2;; ++g) {
            u64 cand = pow_mod(g, (q - 1) / (2 * n), q);
            if (pow_mod(cand, n, q) == q - 1) { psi = cand; break; }
        }
        const u32 logn = log2_exact(n);
        roots_.resize(n);
        roots_shoup_.resize(n);
        iroots_.resize(n);
        iroots_shoup_.resize(n);
        u64 ipsi = inv_mod(psi, q);
        // powers of psi in bit-reversed order (standard layout for in-place CT/GS).
        std::vector<u64> pow_psi(n), pow_ipsi(n);
        pow_psi[0] = 1;
        pow_ipsi[0] = 1;
        for (size_t i = 1; i < n; ++i) {
            pow_psi[i] = mul_mod(pow_psi[i - 1], psi, q);
            pow_ipsi[i] = mul_mod(pow_ipsi[i - 1], ipsi, q);
        }
        for (size_t i = 0; i < n; ++i) {
            size_t r = 0;
            for (u32 b = 0; b < logn; ++b) r |= ((i >> b) & 1) << (logn - 1 - b);
            roots_[i] = pow_psi[r];
            iroots_[i] = pow_ipsi[r];
            roots_shoup_[i] = shoup_precompute(roots_[i], q);
            iroots_shoup_[i] = shoup_precompute(iroots_[i], q);
        }
        n_inv_ = inv_mod(static_cast<u64>(n), q);
        n_inv_shoup_ = shoup_precompute(n_inv_, q);
    }

    u64 modulus() const { return q_; }
    size_t size() const { return n_; }

    void forward(u64* a) const {
        const u64 q = q_, two_q = 2 * q_;
        size_t t = n_;
        for (size_t m = 1; m < n_; m <<= 1) {
            t >>= 1;
            for (size_t i = 0; i < m; ++i) {
                const u64 w = roots_[m + i], ws = roots_shoup_[m + i];
                u64* lo = a + 2 * i * t;
                u64* hi = lo + t;
                for (size_t j = 0; j < t; ++j) {
                    u64 u = lo[j];
                    if (u >= two_q) u -= two_q;
                    u64 v = mul_mod_shoup_lazy(hi[j], w, ws, q);
                    lo[j] = u + v;
                    hi[j] = u + two_q - v;
                }
            }
        }
        for (size_t i = 0; i < n_; ++i) {
            if (a[i] >= two_q) a[i] -= two_q;
            if (a[i] >= q) a[i] -= q;
        }
    }

    void inverse(u64* a) const {
        const u64 q = q_, two_q = 2 * q_;
        size_t t = 1;
        for (size_t m = n_ >> 1; m >= 1; m >>= 1) {
            for (size_t i = 0; i < m; ++i) {
                const u64 w = iroots_[m + i], ws = iroots_shoup_[m + i];
                u64* lo = a + 2 * i * t;
                u64* hi = lo + t;
                for (size_t j = 0; j < t; ++j) {
                    u64 u = lo[j], v = hi[j];
                    u64 s = u + v;
                    if (s >= two_q) s -= two_q;
                    lo[j] = s;
                    hi[j] = mul_mod_shoup_lazy(u + two_q - v, w, ws, q);
                }
            }
            t <<= 1;
        }
        for (size_t i = 0; i < n_; ++i) {
            u64 x = a[i];
            if (x >= two_q) x -= two_q;
            if (x >= q) x -= q;
            a[i] = mul_mod_shoup(x, n_inv_, n_inv_shoup_, q);
        }
    }

  private:
    // lazy variant: inputs < 2q, output < 2q
    static u64 mul_mod_shoup_lazy(u64 a, u64 b, u64 b_shoup, u64 q) {
        u64 hi = static_cast<u64>((static_cast<u128>(a) * b_shoup) >> 64);
        return a * b - hi * q;  // < 2q
    }

    u64 q_ = 0;
    size_t n_ = 0;
    u64 n_inv_ = 0, n_inv_shoup_ = 0;
    std::vector<u64> roots_, roots_shoup_, iroots_, iroots_shoup_;
};

}  // namespace glyph
