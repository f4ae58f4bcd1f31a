#include <gtest/gtest.h>

#include <cmath>

#include "glyph/core/modpoly.hpp"
#include "glyph/core/serialize.hpp"
#include "glyph/core/toruspoly.hpp"

using namespace glyph;

TEST(RandomSource, DeterministicAcrossRuns) {
    RandomSource a(RandomSource::Seed{1, 2, 3, 4});
    RandomSource b(RandomSource::Seed{1, 2, 3, 4});
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomSource, ChildStreamsIndependent) {
    RandomSource root(42);
    RandomSource c1 = root.child(1);
    RandomSource c2 = root.child(2);
    RandomSource c1b = RandomSource(42).child(1);
    int equal = 0;
    for (int i = 0; i < 64; ++i) {
        u64 x = c1.next_u64();
        if (x == c2.next_u64()) ++equal;
        EXPECT_EQ(x, c1b.next_u64());
    }
    EXPECT_LT(equal, 2);
}

TEST(RandomSource, CbdMeanWithinBound) {
    // 10^6 draws of CBD(20): σ = sqrt(10); require |mean| < 5σ/sqrt(n)
    RandomSource rng(7);
    const int n = 1000000;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.cbd(20));
    double sigma = std::sqrt(10.0);
    EXPECT_LT(std::abs(sum / n), 5.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST(RandomSource, UniformChiSquare) {
    // q=17 buckets, 102400 draws; chi-square should pass at p > 0.001
    // (df=16, critical value 39.25).
    RandomSource rng(11);
    const u64 q = 17;
    const int draws = 1024 * 100;
    std::vector<int> counts(q, 0);
    for (int i = 0; i < draws; ++i) counts[rng.uniform_below(q)]++;
    double expected = static_cast<double>(draws) / q;
    double chi2 = 0;
    for (u64 b = 0; b < q; ++b) {
        double d = counts[b] - expected;
        chi2 += d * d / expected;
    }
    EXPECT_LT(chi2, 39.25);
}

TEST(PolyAdd, SmallCases) {
    ModPoly a(5, 2), b(5, 2);
    a.c = {1, 2};
    b.c = {3, 4};
    ModPoly r = poly_add(a, b);
    EXPECT_EQ(r.c, (std::vector<u64>{4, 1}));
    ModPoly z = ModPoly::zero(5, 2);
    EXPECT_EQ(poly_add(a, z), a);
}

TEST(PolyAdd, MatchesScalarLoopOracle) {
    RandomSource rng(3);
    const u64 q = 65537;
    ModPoly a = sample_uniform(rng, q, 1024);
    ModPoly b = sample_uniform(rng, q, 1024);
    ModPoly r = poly_add(a, b);
    for (size_t i = 0; i < 1024; ++i) EXPECT_EQ(r.c[i], (a.c[i] + b.c[i]) % q);
}

TEST(PolyAdd, MismatchedParamsThrow) {
    ModPoly a(5, 2), b(7, 2), c(5, 4);
    EXPECT_THROW(poly_add(a, b), ParameterError);
    EXPECT_THROW(poly_add(a, c), ParameterError);
}

TEST(PolyMul, HandReduction) {
    // (1+X)^2 = 1 + 2X + X^2 ≡ 2X over X^2+1
    ModPoly a(17, 2);
    a.c = {1, 1};
    ModPoly r = poly_mul_schoolbook(a, a);
    EXPECT_EQ(r.c, (std::vector<u64>{0, 2}));
}

TEST(PolyMul, IdentityElement) {
    RandomSource rng(5);
    ModPoly a = sample_uniform(rng, 97, 16);
    EXPECT_EQ(poly_mul_schoolbook(a, ModPoly::one(97, 16)), a);
}

TEST(PolyMul, NttMatchesSchoolbook) {
    RandomSource rng(9);
    const u64 q = find_prime_congruent(u64(1) << 30, 2 * 64);
    for (int rep = 0; rep < 25; ++rep) {
        ModPoly a = sample_uniform(rng, q, 64);
        ModPoly b = sample_uniform(rng, q, 64);
        EXPECT_EQ(poly_mul_ntt(a, b), poly_mul_schoolbook(a, b));
    }
}

TEST(PolyMul, RingAxiomsRandomTriples) {
    RandomSource rng(13);
    for (size_t n : {size_t(8), size_t(64)}) {
        const u64 q = find_prime_congruent(12289, 2 * n);
        for (int rep = 0; rep < 500; ++rep) {
            ModPoly a = sample_uniform(rng, q, n);
            ModPoly b = sample_uniform(rng, q, n);
            ModPoly c = sample_uniform(rng, q, n);
            ASSERT_EQ(poly_mul_negacyclic(a, b), poly_mul_negacyclic(b, a));
            ASSERT_EQ(poly_mul_negacyclic(poly_mul_negacyclic(a, b), c),
                      poly_mul_negacyclic(a, poly_mul_negacyclic(b, c)));
            ASSERT_EQ(poly_mul_negacyclic(a, poly_add(b, c)),
                      poly_add(poly_mul_negacyclic(a, b), poly_mul_negacyclic(a, c)));
        }
    }
}

TEST(PolyMul, MonomialMatchesFullProduct) {
    RandomSource rng(17);
    const u64 q = 12289;
    ModPoly a = sample_uniform(rng, q, 64);
    for (size_t k = 0; k < 128; k += 7) {
        ModPoly mono(q, 64);
        ModPoly expect = a;
        if (k < 64) {
            mono.c[k] = 1;
            expect = poly_mul_schoolbook(a, mono);
        } else {
            mono.c[k - 64] = q - 1;
            expect = poly_mul_schoolbook(a, mono);
        }
        EXPECT_EQ(poly_mul_monomial(a, k), expect) << "k=" << k;
    }
}

TEST(TorusMul, NttMatchesSchoolbookExactly) {
    RandomSource rng(19);
    for (size_t n : {size_t(64), size_t(1024)}) {
        TorusPoly t(n);
        for (auto& w : t.c) w = rng.next_u64();
        std::vector<i64> d(n);
        for (auto& x : d) x = static_cast<i64>(rng.uniform_below(64)) - 32;
        EXPECT_EQ(torus_mul_int_ntt(d, t), torus_mul_int_schoolbook(d, t));
    }
}

TEST(TorusMul, MonomialShiftWraps) {
    TorusPoly t(4);
    t.c = {10, 20, 30, 40};
    TorusPoly r = torus_mul_monomial(t, 1);
    EXPECT_EQ(r.c, (std::vector<u64>{static_cast<u64>(-40LL), 10, 20, 30}));
    TorusPoly r2 = torus_mul_monomial(t, 4);  // X^N == -1
    EXPECT_EQ(r2.c, (std::vector<u64>{static_cast<u64>(-10LL), static_cast<u64>(-20LL),
                                      static_cast<u64>(-30LL), static_cast<u64>(-40LL)}));
}

TEST(TorusCodec, ExactMultiples) {
    u64 w = encode_torus(3, 8);
    EXPECT_EQ(decode_torus(w, 8), 3u);
    EXPECT_EQ(encode_torus(0, 8), 0u);
    EXPECT_EQ(decode_torus(0, 8), 0u);
}

TEST(TorusCodec, RoundTripAllValues) {
    for (u64 d : {8ULL, 16ULL, 255ULL, 4096ULL}) {
        for (u64 k = 0; k < d; ++k) EXPECT_EQ(decode_torus(encode_torus(k, d), d), k);
    }
}

TEST(TorusCodec, PerturbationBelowHalfUlpKeepsValue) {
    const u64 domain = 16;
    // grid of perturbations strictly below 1/(2·domain) of the torus
    const u64 half_ulp = (u64(1) << 63) / domain - 1;
    for (u64 k = 0; k < domain; ++k) {
        u64 w = encode_torus(k, domain);
        for (u64 d = 0; d <= half_ulp; d += half_ulp / 7 + 1) {
            EXPECT_EQ(decode_torus(w + d, domain), k);
            EXPECT_EQ(decode_torus(w - d, domain), k);
        }
    }
}

TEST(TorusCodec, DomainTooLargeThrows) {
    EXPECT_THROW(encode_torus(1, 0), ParameterError);
    EXPECT_THROW(decode_torus(0, u64(1) << 63), ParameterError);
}

TEST(Sha256, KnownVector) {
    auto d = Sha256::digest("abc", 3);
    EXPECT_EQ(hex_string(d), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Serialize, RoundTripPrimitives) {
    ByteWriter w;
    w.u8v(7);
    w.u32v(123456);
    w.u64s({1, 2, 3});
    ByteReader r(w.data());
    EXPECT_EQ(r.u8v(), 7);
    EXPECT_EQ(r.u32v(), 123456u);
    EXPECT_EQ(r.u64s(), (std::vector<u64>{1, 2, 3}));
    EXPECT_TRUE(r.done());
}

TEST(Serialize, TruncationNamesOffset) {
    ByteWriter w;
    w.u32v(9);
    ByteReader r(w.data());
    r.u16v();
    try {
        r.u64v();
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
}
