#include <gtest/gtest.h>

#include "glyph/bgv/bgv.hpp"

using namespace glyph;

namespace {

// Toy profile: N=16, t=97, 3-level chain. Algebra tests only.
BgvContextPtr toy_context() {
    BgvParams p;
    p.degree_n = 16;
    p.plaintext_modulus = 97;  // 97 ≡ 1 (mod 32)
    u64 m = 2 * 16 * 97;
    u64 q = find_prime_congruent(u64(1) << 30, m);
    p.modulus_chain = {q};
    for (int i = 0; i < 2; ++i) {
        q = find_prime_congruent(q + 1, m);
        p.modulus_chain.push_back(q);
    }
    p.noise_cbd_k = 20;
    p.depth = 2;
    p.fresh_budget_bits = 20;
    p.relin_base_bits = 12;
    return std::make_shared<BgvContext>(std::move(p));
}

SlotVector random_slots(RandomSource& rng, const BgvContext& ctx) {
    SlotVector v;
    v.values.resize(ctx.n());
    for (auto& x : v.values) x = rng.uniform_below(ctx.t());
    return v;
}

}  // namespace

TEST(BgvKeygen, RoundTripHundredRandom) {
    auto ctx = toy_context();
    RandomSource rng(101);
    auto keys = ctx->keygen(rng);
    for (int i = 0; i < 100; ++i) {
        SlotVector v = random_slots(rng, *ctx);
        auto ct = ctx->encrypt(ctx->slot_encode(v), keys.pk, rng);
        EXPECT_EQ(ctx->slot_decode(ctx->decrypt(ct, keys.sk)).values, v.values);
    }
}

TEST(BgvKeygen, ZeroDecryptsToZeroSlots) {
    auto ctx = toy_context();
    RandomSource rng(102);
    auto keys = ctx->keygen(rng);
    SlotVector zero;
    zero.values.assign(ctx->n(), 0);
    auto ct = ctx->encrypt(ctx->slot_encode(zero), keys.pk, rng);
    EXPECT_EQ(ctx->slot_decode(ctx->decrypt(ct, keys.sk)).values, zero.values);
}

TEST(BgvKeygen, DeterministicUnderSeed) {
    auto ctx = toy_context();
    RandomSource r1(103), r2(103);
    auto k1 = ctx->keygen(r1);
    auto k2 = ctx->keygen(r2);
    EXPECT_EQ(k1.sk.s, k2.sk.s);
    EXPECT_EQ(k1.pk.a.res[0], k2.pk.a.res[0]);
    EXPECT_EQ(k1.pk.b.res[2], k2.pk.b.res[2]);
}

TEST(BgvKeygen, BadPlaintextModulusRejected) {
    BgvParams p;
    p.degree_n = 16;
    p.plaintext_modulus = 101;  // 101 mod 32 != 1
    p.modulus_chain = {find_prime_congruent(u64(1) << 30, 32)};
    EXPECT_THROW(BgvContext{p}, ParameterError);
}

TEST(BgvSlots, EncodeDecodeIdentity) {
    auto ctx = toy_context();
    SlotVector v;
    for (u64 i = 1; i <= ctx->n(); ++i) v.values.push_back(i % ctx->t());
    EXPECT_EQ(ctx->slot_decode(ctx->slot_encode(v)).values, v.values);
}

TEST(BgvSlots, AllOnesIsMultiplicativeIdentityOnSlots) {
    auto ctx = toy_context();
    RandomSource rng(104);
    SlotVector ones;
    ones.values.assign(ctx->n(), 1);
    SlotVector a = random_slots(rng, *ctx);
    ModPoly prod = poly_mul_negacyclic(ctx->slot_encode(a), ctx->slot_encode(ones));
    EXPECT_EQ(ctx->slot_decode(prod).values, a.values);
}

TEST(BgvSlots, SlotwiseProductViaCrt) {
    auto ctx = toy_context();
    RandomSource rng(105);
    for (int rep = 0; rep < 20; ++rep) {
        SlotVector a = random_slots(rng, *ctx);
        SlotVector b = random_slots(rng, *ctx);
        ModPoly prod = poly_mul_negacyclic(ctx->slot_encode(a), ctx->slot_encode(b));
        SlotVector d = ctx->slot_decode(prod);
        for (size_t i = 0; i < ctx->n(); ++i)
            ASSERT_EQ(d.values[i], mul_mod(a.values[i], b.values[i], ctx->t()));
    }
}

TEST(BgvSlots, WrongLengthRejected) {
    auto ctx = toy_context();
    SlotVector bad;
    bad.values = {1, 2};
    EXPECT_THROW(ctx->slot_encode(bad), ParameterError);
}

TEST(BgvAdd, SlotwiseSumAndIdentity) {
    auto ctx = toy_context();
    RandomSource rng(106);
    auto keys = ctx->keygen(rng);
    SlotVector a, b;
    a.values.assign(ctx->n(), 0);
    b.values.assign(ctx->n(), 0);
    a.values[0] = 1; a.values[1] = 2;
    b.values[0] = 3; b.values[1] = 4;
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
    auto sum = ctx->slot_decode(ctx->decrypt(ctx->add_cc(ca, cb), keys.sk));
    EXPECT_EQ(sum.values[0], 4u);
    EXPECT_EQ(sum.values[1], 6u);

    SlotVector zero;
    zero.values.assign(ctx->n(), 0);
    auto cz = ctx->encrypt(ctx->slot_encode(zero), keys.pk, rng);
    auto same = ctx->slot_decode(ctx->decrypt(ctx->add_cc(ca, cz), keys.sk));
    EXPECT_EQ(same.values, a.values);
}

TEST(BgvAdd, ThousandRandomPairsMatchOracle) {
    auto ctx = toy_context();
    RandomSource rng(107);
    auto keys = ctx->keygen(rng);
    for (int rep = 0; rep < 1000; ++rep) {
        SlotVector a = random_slots(rng, *ctx);
        SlotVector b = random_slots(rng, *ctx);
        auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
        auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
        SlotVector d = ctx->slot_decode(ctx->decrypt(ctx->add_cc(ca, cb), keys.sk));
        for (size_t i = 0; i < ctx->n(); ++i)
            ASSERT_EQ(d.values[i], add_mod(a.values[i], b.values[i], ctx->t()));
    }
}

TEST(BgvAdd, LevelMismatchRejected) {
    auto ctx = toy_context();
    RandomSource rng(108);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto dropped = ctx->mod_switch(ca);
    EXPECT_THROW(ctx->add_cc(ca, dropped), ParameterError);
}

TEST(BgvMult, SlotwiseProductSmallCase) {
    auto ctx = toy_context();
    RandomSource rng(109);
    auto keys = ctx->keygen(rng);
    SlotVector a, b;
    a.values.assign(ctx->n(), 0);
    b.values.assign(ctx->n(), 0);
    a.values[0] = 2; a.values[1] = 3;
    b.values[0] = 5; b.values[1] = 7;
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
    auto d = ctx->slot_decode(ctx->decrypt(ctx->mult_cc(ca, cb, keys.evk), keys.sk));
    EXPECT_EQ(d.values[0], 10u);
    EXPECT_EQ(d.values[1], 21u);
}

TEST(BgvMult, PlaintextAllOnesIsIdentity) {
    auto ctx = toy_context();
    RandomSource rng(110);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    SlotVector ones;
    ones.values.assign(ctx->n(), 1);
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto d = ctx->slot_decode(ctx->decrypt(ctx->mult_cp(ca, ctx->slot_encode(ones)), keys.sk));
    EXPECT_EQ(d.values, a.values);
}

TEST(BgvMult, ThousandRandomPairsMatchOracle) {
    auto ctx = toy_context();
    RandomSource rng(111);
    auto keys = ctx->keygen(rng);
    for (int rep = 0; rep < 1000; ++rep) {
        SlotVector a = random_slots(rng, *ctx);
        SlotVector b = random_slots(rng, *ctx);
        auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
        auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
        SlotVector d = ctx->slot_decode(ctx->decrypt(ctx->mult_cc(ca, cb, keys.evk), keys.sk));
        for (size_t i = 0; i < ctx->n(); ++i)
            ASSERT_EQ(d.values[i], mul_mod(a.values[i], b.values[i], ctx->t()));
    }
}

TEST(BgvMult, RelinearizationSoundness) {
    auto ctx = toy_context();
    RandomSource rng(112);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    SlotVector b = random_slots(rng, *ctx);
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
    auto raw = ctx->mult_cc_raw(ca, cb);        // 3-part
    auto rel = ctx->relinearize(raw, keys.evk);  // 2-part
    EXPECT_EQ(raw.parts.size(), 3u);
    EXPECT_EQ(rel.parts.size(), 2u);
    EXPECT_EQ(ctx->decrypt(raw, keys.sk), ctx->decrypt(rel, keys.sk));
}

TEST(BgvMult, DepthCalibrationSucceedsThenFails) {
    auto ctx = toy_context();
    RandomSource rng(113);
    auto keys = ctx->keygen(rng);
    SlotVector ones;
    ones.values.assign(ctx->n(), 1);
    SlotVector a = random_slots(rng, *ctx);
    auto acc = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    // depth = chain length - 1 MultCC levels available
    for (u32 d = 0; d < ctx->params().depth; ++d) {
        auto ones_ct = ctx->encrypt(ctx->slot_encode(ones), keys.pk, rng);
        while (ones_ct.level > acc.level) ones_ct = ctx->mod_switch(ones_ct);
        acc = ctx->mult_cc(acc, ones_ct, keys.evk);
        EXPECT_EQ(ctx->slot_decode(ctx->decrypt(acc, keys.sk)).values, a.values) << "depth " << d;
    }
    auto ones_ct = ctx->encrypt(ctx->slot_encode(ones), keys.pk, rng);
    while (ones_ct.level > acc.level) ones_ct = ctx->mod_switch(ones_ct);
    EXPECT_THROW(ctx->mult_cc(acc, ones_ct, keys.evk), BudgetError);
}

TEST(BgvModSwitch, PlaintextInvariant) {
    auto ctx = toy_context();
    RandomSource rng(114);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto before = ctx->slot_decode(ctx->decrypt(ct, keys.sk));
    auto switched = ctx->mod_switch(ct);
    EXPECT_EQ(switched.level, ct.level - 1);
    EXPECT_EQ(ctx->slot_decode(ctx->decrypt(switched, keys.sk)).values, before.values);
}

TEST(BgvModSwitch, BottomOfChainRejected) {
    auto ctx = toy_context();
    RandomSource rng(115);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    ct = ctx->mod_switch(ctx->mod_switch(ct));
    EXPECT_THROW(ctx->mod_switch(ct), BudgetError);
}

TEST(BgvNoise, BudgetDecreasesAcrossMult) {
    auto ctx = toy_context();
    RandomSource rng(116);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    SlotVector b = random_slots(rng, *ctx);
    auto ca = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto cb = ctx->encrypt(ctx->slot_encode(b), keys.pk, rng);
    double before = ctx->noise_budget(ca, keys.sk);
    auto prod = ctx->mult_cc(ca, cb, keys.evk);
    double after = ctx->noise_budget(prod, keys.sk);
    EXPECT_LT(after, before);
    EXPECT_GT(after, 0);
}

TEST(BgvNoise, FreshBudgetAtLeastProfileConstant) {
    auto ctx = toy_context();
    RandomSource rng(117);
    auto keys = ctx->keygen(rng);
    for (int i = 0; i < 5; ++i) {
        SlotVector a = random_slots(rng, *ctx);
        auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
        EXPECT_GE(ctx->noise_budget(ct, keys.sk), ctx->params().fresh_budget_bits);
    }
}

TEST(BgvNoise, EstimateNeverIncreasesExceptRefresh) {
    auto ctx = toy_context();
    RandomSource rng(118);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    double fresh = ct.noise_budget_bits;
    auto sum = ctx->add_cc(ct, ct);
    EXPECT_LE(sum.noise_budget_bits, fresh);
    auto prod = ctx->mult_cc(ct, ct, keys.evk);
    EXPECT_LE(prod.noise_budget_bits, sum.noise_budget_bits);
    RefreshOracle oracle(ctx, keys.sk, keys.pk, /*test_mode=*/true, rng.child(1));
    auto refreshed = oracle.refresh(prod);
    EXPECT_GT(refreshed.noise_budget_bits, prod.noise_budget_bits);
}

TEST(BgvRefresh, DeepCiphertextDecryptsIdentically) {
    auto ctx = toy_context();
    RandomSource rng(119);
    auto keys = ctx->keygen(rng);
    RefreshOracle oracle(ctx, keys.sk, keys.pk, true, rng.child(2));
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto deep = ctx->mult_cc(ct, ct, keys.evk);
    auto refreshed = oracle.refresh(deep);
    EXPECT_EQ(refreshed.level, ctx->top_level());
    SlotVector want;
    for (u64 v : a.values) want.values.push_back(mul_mod(v, v, ctx->t()));
    EXPECT_EQ(ctx->slot_decode(ctx->decrypt(refreshed, keys.sk)).values, want.values);
}

TEST(BgvRefresh, ProductionModeHardError) {
    auto ctx = toy_context();
    RandomSource rng(120);
    auto keys = ctx->keygen(rng);
    RefreshOracle oracle(ctx, keys.sk, keys.pk, /*test_mode=*/false, rng.child(3));
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    EXPECT_THROW(oracle.refresh(ct), ModeError);
}

TEST(BgvLanes, EncodeDecodeAndConjugateInnerProduct) {
    auto ctx = toy_context();
    RandomSource rng(121);
    auto keys = ctx->keygen(rng);
    std::vector<i64> d = {5, -3, 7, 2};
    std::vector<i64> e = {-1, 4, 2, -6};
    auto cd = ctx->encrypt(ctx->lane_encode(d), keys.pk, rng);
    auto ce = ctx->encrypt(ctx->lane_encode_conjugate(e), keys.pk, rng);
    auto prod = ctx->mult_cc(cd, ce, keys.evk);
    auto m = ctx->decrypt(prod, keys.sk);
    i64 want = 0;
    for (size_t i = 0; i < d.size(); ++i) want += d[i] * e[i];
    EXPECT_EQ(ctx->lane_decode(m, 1)[0], ((want % 97) + 97) % 97 > 48 ? ((want % 97) + 97) % 97 - 97 : ((want % 97) + 97) % 97);
}

TEST(BgvLanes, BroadcastConstantActsLaneWise) {
    auto ctx = toy_context();
    RandomSource rng(122);
    auto keys = ctx->keygen(rng);
    std::vector<i64> d = {5, -3, 7, 2, 1, 0, -8, 9};
    std::vector<i64> w = {4};  // constant-coefficient broadcast
    auto cd = ctx->encrypt(ctx->lane_encode(d), keys.pk, rng);
    auto cw = ctx->encrypt(ctx->lane_encode(w), keys.pk, rng);
    auto prod = ctx->mult_cc(cd, cw, keys.evk);
    auto lanes = ctx->lane_decode(ctx->decrypt(prod, keys.sk), d.size());
    for (size_t i = 0; i < d.size(); ++i) EXPECT_EQ(lanes[i], 4 * d[i]);
}

TEST(BgvSerialize, BitExactRoundTrip) {
    auto ctx = toy_context();
    RandomSource rng(123);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto ct = ctx->encrypt(ctx->slot_encode(a), keys.pk, rng);
    auto bytes = serialize_bgv_ciphertext(*ctx, ct);
    auto back = deserialize_bgv_ciphertext(*ctx, bytes);
    EXPECT_EQ(serialize_bgv_ciphertext(*ctx, back), bytes);
    EXPECT_EQ(ctx->slot_decode(ctx->decrypt(back, keys.sk)).values, a.values);
    // header sanity: magic + scheme tag
    EXPECT_EQ(bytes[0], 'G');
    EXPECT_EQ(bytes[4], static_cast<u8>(SchemeTag::kBgv));
}

TEST(BgvSerialize, WrongParamsRejected) {
    auto ctx = toy_context();
    RandomSource rng(124);
    auto keys = ctx->keygen(rng);
    SlotVector a = random_slots(rng, *ctx);
    auto bytes = serialize_bgv_ciphertext(*ctx, ctx->encrypt(ctx->slot_encode(a), keys.pk, rng));
    BgvParams p2 = ctx->params();
    p2.plaintext_modulus = find_prime_congruent(193, 32);
    u64 m = 2 * 16 * p2.plaintext_modulus;
    p2.modulus_chain.clear();
    u64 q = find_prime_congruent(u64(1) << 30, m);
    p2.modulus_chain = {q, find_prime_congruent(q + 1, m), find_prime_congruent(q + 1000000, m)};
    auto ctx2 = std::make_shared<BgvContext>(p2);
    EXPECT_THROW(deserialize_bgv_ciphertext(*ctx2, bytes), DataError);
}
