#pragma once

#include "glyph/core/modpoly.hpp"

namespace glyph {

// Element of T_N[X]: coefficients are torus values in [0,1) stored as 64-bit
// words (x = word / 2^64). Addition is native wraparound; multiplication only
// exists against integer polynomials.
struct TorusPoly {
    std::vector<u64> c;

    TorusPoly() = default;
    explicit TorusPoly(size_t n) : c(n, 0) {}

    size_t degree_n() const { return c.size(); }
    bool operator==(const TorusPoly& o) const { return c == o.c; }
};

inline TorusPoly torus_add(const TorusPoly& a, const TorusPoly& b) {
    if (a.c.size() != b.c.size()) throw ParameterError("torus poly size mismatch");
    TorusPoly r(a.c.size());
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
}

inline TorusPoly torus_sub(const TorusPoly& a, const TorusPoly& b) {
    if (a.c.size() != b.c.size()) throw ParameterError("torus poly size mismatch");
    TorusPoly r(a.c.size());
    for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
}

inline void torus_add_inplace(TorusPoly& a, const TorusPoly& b) {
    for (size_t i = 0; i < a.c.size(); ++i) a.c[i] += b.c[i];
}

inline void torus_sub_inplace(TorusPoly& a, const TorusPoly& b) {
    for (size_t i = 0; i < a.c.size(); ++i) a.c[i] -= b.c[i];
}

// Multiply by X^k (negacyclic), k in [0, 2N); exact mod-2^64 arithmetic.
inline TorusPoly torus_mul_monomial(const TorusPoly& a, size_t k) {
    const size_t n = a.c.size();
    TorusPoly r(n);
    k %= 2 * n;
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + k;
        bool flip = false;
        if (j >= 2 * n) j -= 2 * n;
        if (j >= n) { j -= n; flip = true; }
        r.c[j] = flip ? (~a.c[i] + 1) : a.c[i];
    }
    return r;
}

// Negacyclic product of a small signed integer polynomial with a torus
// polynomial, exact modulo 2^64 (native wraparound). Schoolbook reference.
inline TorusPoly torus_mul_int_schoolbook(const std::vector<i64>& ints, const TorusPoly& t) {
    const size_t n = t.c.size();
    if (ints.size() != n) throw ParameterError("torus mul: size mismatch");
    TorusPoly r(n);
    for (size_t i = 0; i < n; ++i) {
        if (ints[i] == 0) continue;
        const u64 d = static_cast<u64>(ints[i]);  // two's complement, exact mod 2^64
        for (size_t j = 0; j < n; ++j) {
            u64 p = d * t.c[j];
            size_t k = i + j;
            if (k < n) {
                r.c[k] += p;
            } else {
                r.c[k - n] -= p;
            }
        }
    }
    return r;
}

namespace detail {

// Exact NTT-based negacyclic product of a small-integer polynomial and a torus
// polynomial, modulo 2^64. The torus words are split into 32-bit halves so all
// per-prime convolution values stay below a single 62-bit NTT prime; the exact
// integer convolutions of the halves recombine as hi*2^32 + lo mod 2^64.
// Bit-identical to torus_mul_int_schoolbook (both are exact).
inline constexpr u64 kConvPrimeBase = u64(1) << 59;

inline u64 conv_prime_for(size_t n) {
    static std::map<size_t, u64> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, find_prime_congruent(kConvPrimeBase, 2 * n)).first;
    return it->second;
}

}  // namespace detail

// Pre-transformed torus polynomial halves for repeated products (TRGSW rows).
// Shoup companions make the hot pointwise multiply division-free.
struct TorusPolyNtt {
    u64 q = 0;
    std::vector<u64> lo, hi;            // NTT(lo half), NTT(hi half)
    std::vector<u64> lo_shoup, hi_shoup;

    TorusPolyNtt() = default;

    explicit TorusPolyNtt(const TorusPoly& t) {
        const size_t n = t.c.size();
        q = detail::conv_prime_for(n);
        const auto& tables = detail::ntt_tables_for(q, n);
        lo.resize(n);
        hi.resize(n);
        for (size_t i = 0; i < n; ++i) {
            lo[i] = t.c[i] & 0xFFFFFFFFULL;
            hi[i] = t.c[i] >> 32;
        }
        tables.forward(lo.data());
        tables.forward(hi.data());
        lo_shoup.resize(n);
        hi_shoup.resize(n);
        for (size_t i = 0; i < n; ++i) {
            lo_shoup[i] = shoup_precompute(lo[i], q);
            hi_shoup[i] = shoup_precompute(hi[i], q);
        }
    }
};

// Accumulator for sums of int-poly x torus-poly products in the NTT domain.
// Partial sums stay unreduced (q < 2^60, so up to 16 terms fit a u64); one
// reduction happens in finish().
class TorusConvAccumulator {
  public:
    explicit TorusConvAccumulator(size_t n)
        : n_(n), q_(detail::conv_prime_for(n)), acc_lo_(n, 0), acc_hi_(n, 0) {}

    // acc += ints * t, where ints coefficients are in (-2^15, 2^15).
    void accumulate(const std::vector<i64>& ints, const TorusPolyNtt& t) {
        check_capacity(1);
        std::vector<u64> d = transform_digits(ints);
        for (size_t i = 0; i < n_; ++i) {
            acc_lo_[i] += mul_mod_shoup(d[i], t.lo[i], t.lo_shoup[i], q_);
            acc_hi_[i] += mul_mod_shoup(d[i], t.hi[i], t.hi_shoup[i], q_);
        }
    }

    // Same digit polynomial against a second torus operand without re-transforming.
    void accumulate_pair(const std::vector<i64>& ints, const TorusPolyNtt& ta, TorusConvAccumulator& other,
                         const TorusPolyNtt& tb) {
        check_capacity(1);
        other.check_capacity(1);
        std::vector<u64> d = transform_digits(ints);
        const u64* __restrict dl = d.data();
        u64* __restrict al = acc_lo_.data();
        u64* __restrict ah = acc_hi_.data();
        u64* __restrict bl = other.acc_lo_.data();
        u64* __restrict bh = other.acc_hi_.data();
        for (size_t i = 0; i < n_; ++i) {
            u64 x = dl[i];
            al[i] += mul_mod_shoup(x, ta.lo[i], ta.lo_shoup[i], q_);
            ah[i] += mul_mod_shoup(x, ta.hi[i], ta.hi_shoup[i], q_);
            bl[i] += mul_mod_shoup(x, tb.lo[i], tb.lo_shoup[i], q_);
            bh[i] += mul_mod_shoup(x, tb.hi[i], tb.hi_shoup[i], q_);
        }
    }

    // Recover the exact mod-2^64 torus polynomial of the accumulated sum.
    TorusPoly finish() const {
        TorusPoly r(n_);
        finish_into(r, false);
        return r;
    }

    // out += recovered polynomial (avoids an intermediate allocation).
    void finish_add(TorusPoly& out) const { finish_into(out, true); }

    void finish_into(TorusPoly& out, bool add) const {
        const auto& tables = detail::ntt_tables_for(q_, n_);
        thread_local std::vector<u64> lo, hi;
        lo = acc_lo_;
        hi = acc_hi_;
        for (size_t i = 0; i < n_; ++i) {
            lo[i] %= q_;
            hi[i] %= q_;
        }
        tables.inverse(lo.data());
        tables.inverse(hi.data());
        if (out.c.size() != n_) out.c.assign(n_, 0);
        for (size_t i = 0; i < n_; ++i) {
            // centered exact integers (|value| < q/2 guaranteed by operand bounds)
            u64 l = static_cast<u64>(center_mod(lo[i], q_));
            u64 h = static_cast<u64>(center_mod(hi[i], q_));
            u64 v = l + (h << 32);
            out.c[i] = add ? out.c[i] + v : v;
        }
    }

    size_t size() const { return n_; }

    void reset() {
        std::fill(acc_lo_.begin(), acc_lo_.end(), 0);
        std::fill(acc_hi_.begin(), acc_hi_.end(), 0);
        terms_ = 0;
    }

  private:
    const std::vector<u64>& transform_digits(const std::vector<i64>& ints) {
        thread_local std::vector<u64> d;
        d.resize(n_);
        const i64 q_signed = static_cast<i64>(q_);
        for (size_t i = 0; i < n_; ++i) {
            i64 v = ints[i];
            d[i] = static_cast<u64>(v < 0 ? v + q_signed : v);
        }
        detail::ntt_tables_for(q_, n_).forward(d.data());
        return d;
    }

    void check_capacity(size_t add) {
        terms_ += add;
        if (terms_ > 16) throw ParameterError("torus accumulator overflow: too many unreduced terms");
    }

    size_t n_;
    u64 q_;
    size_t terms_ = 0;
    std::vector<u64> acc_lo_, acc_hi_;
};

inline TorusPoly torus_mul_int_ntt(const std::vector<i64>& ints, const TorusPoly& t) {
    TorusConvAccumulator acc(t.c.size());
    acc.accumulate(ints, TorusPolyNtt(t));
    return acc.finish();
}

// ---- scalar torus codec ----

// encode_torus: x = numer/denom in [0,1) as a torus word, round to nearest.
inline u64 encode_torus(u64 numer, u64 denom) {
    if (denom == 0 || numer >= denom) throw ParameterError("encode_torus: need 0 <= numer < denom");
    u128 scaled = (static_cast<u128>(numer) << 64) + denom / 2;
    return static_cast<u64>(scaled / denom);
}

// decode_torus: nearest multiple of 1/domain_size; requires margin headroom so
// round-trips are exact (domain_size <= 2^62).
inline u64 decode_torus(u64 word, u64 domain_size) {
    if (domain_size == 0 || domain_size > (u64(1) << 62))
        throw ParameterError("decode_torus: domain too large for torus precision");
    u128 scaled = static_cast<u128>(word) * domain_size + (static_cast<u128>(1) << 63);
    return static_cast<u64>(scaled >> 64) % domain_size;
}

}  // namespace glyph
