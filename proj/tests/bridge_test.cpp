#include <gtest/gtest.h>

#include "glyph/bridge/bridge.hpp"

using namespace glyph;

namespace {

// Micro-profile fixture shared across bridge tests (keygen is expensive).
struct MicroFixture {
    BgvContextPtr bgv;
    TfheContextPtr tfhe;
    BgvContext::KeySet bgv_keys;
    TfheKeySet tfhe_keys;
    std::unique_ptr<SchemeBridge> bridge16;   // word domain 16 (M=4 configs)
    std::unique_ptr<SchemeBridge> bridge256;  // word domain 256 (M=8 configs)

    static MicroFixture& get() {
        static MicroFixture f;
        return f;
    }

  private:
    MicroFixture() {
        BgvParams p;
        p.degree_n = 1024;
        p.plaintext_modulus = find_prime_congruent(u64(1) << 26, 2 * 1024);
        u64 m = 2 * 1024 * p.plaintext_modulus;
        u64 q = find_prime_congruent(u64(1) << 55, m);
        for (int i = 0; i < 8; ++i) {
            p.modulus_chain.push_back(q);
            q = find_prime_congruent(q + 1, m);
        }
        p.depth = 6;
        p.fresh_budget_bits = 40;
        bgv = std::make_shared<BgvContext>(std::move(p));
        tfhe = std::make_shared<TfheContext>(tfhe_params_micro());
        RandomSource rng(90210);
        bgv_keys = bgv->keygen(rng);
        tfhe_keys = tfhe->keygen(rng);
        bridge16 = std::make_unique<SchemeBridge>(
            bgv, tfhe, &tfhe_keys,
            SchemeBridge::make_keys(*bgv, bgv_keys.sk, *tfhe, tfhe_keys, rng.child(7), 16));
        bridge256 = std::make_unique<SchemeBridge>(
            bgv, tfhe, &tfhe_keys,
            SchemeBridge::make_keys(*bgv, bgv_keys.sk, *tfhe, tfhe_keys, rng.child(8), 256));
    }
};

}  // namespace

TEST(Bridge, ExtractedLanesDecodeSlotValues) {
    auto& f = MicroFixture::get();
    RandomSource rng(1);
    std::vector<i64> lanes = {0, 1, 2, 3, 7, 15, 200, 255};
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
    auto e = f.bridge256->extract_words(ct);
    for (size_t j = 0; j < lanes.size(); ++j) {
        Tlwe fine = f.bridge256->extract_lane_fine(e, j);
        u64 phase = f.tfhe->lwe_phase(fine, f.bgv_keys.sk.s);
        EXPECT_EQ(decode_torus(phase, f.bgv->t()), static_cast<u64>(lanes[j])) << "lane " << j;
    }
}

TEST(Bridge, BgvToTlweSixteenValues) {
    auto& f = MicroFixture::get();
    RandomSource rng(2);
    std::vector<i64> lanes;
    for (i64 v = 0; v < 16; ++v) lanes.push_back(v);
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
    auto tlwes = f.bridge16->bgv_to_tlwe(ct, 16);
    for (i64 v = 0; v < 16; ++v) {
        u64 phase = f.tfhe->lwe_phase(tlwes[v], f.tfhe_keys.sk.s2);
        EXPECT_EQ(decode_torus(phase, 32), static_cast<u64>(v)) << "value " << v;
    }
}

TEST(Bridge, AllZeroSlotsGiveZeroTlwes) {
    auto& f = MicroFixture::get();
    RandomSource rng(3);
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(std::vector<i64>(16, 0)), f.bgv_keys.pk, rng);
    auto tlwes = f.bridge16->bgv_to_tlwe(ct, 16);
    for (auto& t : tlwes) EXPECT_EQ(decode_torus(f.tfhe->lwe_phase(t, f.tfhe_keys.sk.s2), 32), 0u);
}

TEST(Bridge, RoundTripIdentityExhaustive8Bit) {
    auto& f = MicroFixture::get();
    RandomSource rng(4);
    // all 256 domain values across two packed ciphertexts of 128 lanes
    for (int half = 0; half < 2; ++half) {
        std::vector<i64> lanes;
        for (i64 v = 0; v < 128; ++v) lanes.push_back(128 * half + v);
        auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
        auto tlwes = f.bridge256->bgv_to_tlwe(ct, lanes.size());
        auto back = f.bridge256->tlwe_to_bgv(tlwes, SchemeBridge::PackLayout::kLanes, 9);
        auto decoded = f.bgv->decrypt_tagged(back, f.bgv_keys.sk, lanes.size());
        for (size_t j = 0; j < lanes.size(); ++j) {
            i64 got = ((decoded[j] % 512) + 512) % 512;
            ASSERT_EQ(got, lanes[j]) << "value " << lanes[j];
        }
    }
}

TEST(Bridge, RoundTripRandomVectors) {
    auto& f = MicroFixture::get();
    RandomSource rng(5);
    const size_t K = 16;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<i64> lanes;
        for (size_t j = 0; j < K; ++j) lanes.push_back(static_cast<i64>(rng.uniform_below(256)));
        auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
        auto back = f.bridge256->tlwe_to_bgv(f.bridge256->bgv_to_tlwe(ct, K), SchemeBridge::PackLayout::kLanes, 9);
        auto decoded = f.bgv->decrypt_tagged(back, f.bgv_keys.sk, K);
        for (size_t j = 0; j < K; ++j) {
            i64 got = ((decoded[j] % 512) + 512) % 512;
            ASSERT_EQ(got, lanes[j]) << "rep " << rep << " lane " << j;
        }
    }
}

TEST(Bridge, DecomposeMatchesPlaintextBitsExhaustiveM4) {
    auto& f = MicroFixture::get();
    RandomSource rng(6);
    std::vector<i64> lanes;
    for (i64 v = 0; v < 16; ++v) lanes.push_back(v);
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
    auto before = CounterSnapshot::take();
    auto tlwes = f.bridge16->bgv_to_tlwe(ct, 16);
    for (i64 v = 0; v < 16; ++v) {
        EncryptedWord w = f.bridge16->decompose_bits(tlwes[v], 4);
        for (u32 j = 0; j < 4; ++j) {
            bool bit = f.tfhe->decrypt_gate_bit(w.bits[j], f.tfhe_keys.sk);
            ASSERT_EQ(bit, ((v >> j) & 1) != 0) << "v=" << v << " bit " << j;
        }
    }
    // switch + decompose registers exactly K·M functional bootstraps
    auto d = CounterSnapshot::take().diff(before);
    EXPECT_EQ(d.functional_bootstraps, 16u * 4u);
    EXPECT_EQ(d.switch_b2t_words, 16u);
}

TEST(Bridge, DecomposeValueFiveM3) {
    auto& f = MicroFixture::get();
    RandomSource rng(7);
    // value 5, M=3 -> bits (1,0,1) LSB-first
    SchemeBridge bridge8(f.bgv, f.tfhe, &f.tfhe_keys,
                         SchemeBridge::make_keys(*f.bgv, f.bgv_keys.sk, *f.tfhe, f.tfhe_keys,
                                                 RandomSource(42), 8));
    auto ct = f.bgv->encrypt(f.bgv->lane_encode({5, 0}), f.bgv_keys.pk, rng);
    auto tlwes = bridge8.bgv_to_tlwe(ct, 2);
    EncryptedWord w5 = bridge8.decompose_bits(tlwes[0], 3);
    EXPECT_TRUE(f.tfhe->decrypt_gate_bit(w5.bits[0], f.tfhe_keys.sk));
    EXPECT_FALSE(f.tfhe->decrypt_gate_bit(w5.bits[1], f.tfhe_keys.sk));
    EXPECT_TRUE(f.tfhe->decrypt_gate_bit(w5.bits[2], f.tfhe_keys.sk));
    EncryptedWord w0 = bridge8.decompose_bits(tlwes[1], 3);
    for (u32 j = 0; j < 3; ++j) EXPECT_FALSE(f.tfhe->decrypt_gate_bit(w0.bits[j], f.tfhe_keys.sk));
}

TEST(Bridge, DecomposeRecomposeIdentityExhaustiveM4) {
    auto& f = MicroFixture::get();
    RandomSource rng(8);
    std::vector<i64> lanes;
    for (i64 v = 0; v < 16; ++v) lanes.push_back(v);
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
    auto tlwes = f.bridge16->bgv_to_tlwe(ct, 16);
    std::vector<Tlwe> values;
    for (i64 v = 0; v < 16; ++v) {
        EncryptedWord w = f.bridge16->decompose_bits(tlwes[v], 4);
        auto nib = f.bridge16->recompose_nibbles(w, 5);
        ASSERT_EQ(nib.size(), 1u);
        values.push_back(std::move(nib[0]));
    }
    // pack back to BGV and compare mod 16
    auto back = f.bridge16->tlwe_to_bgv(values, SchemeBridge::PackLayout::kLanes, 5);
    auto decoded = f.bgv->decrypt_tagged(back, f.bgv_keys.sk, 16);
    for (i64 v = 0; v < 16; ++v) {
        ASSERT_EQ(((decoded[v] % 16) + 16) % 16, v) << "value " << v;
    }
}

TEST(Bridge, RequantWordMatchesRoundHalfUp) {
    auto& f = MicroFixture::get();
    RandomSource rng(9);
    // accumulators requantized by shift 6 into 8-bit words
    const u64 shift = 6;
    std::vector<i64> accs = {0, 63, 64, 65, -64, -63, 1000, -1000, 4032, -4032, 8100, -8100, 31, 32, 95, 96};
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(accs), f.bgv_keys.pk, rng);
    auto e = f.bridge256->extract_words(ct);
    for (size_t j = 0; j < accs.size(); ++j) {
        Tlwe fine = f.bridge256->extract_lane_fine(e, j);
        EncryptedWord w = f.bridge256->requant_word(fine, 0, shift, 8);
        i64 expect = (accs[j] + (1 << (shift - 1))) >> shift;  // round half up
        u64 expect_bits = static_cast<u64>(expect) & 0xFF;
        u64 got = 0;
        for (u32 b = 0; b < 8; ++b)
            got |= static_cast<u64>(f.tfhe->decrypt_gate_bit(w.bits[b], f.tfhe_keys.sk)) << b;
        ASSERT_EQ(got, expect_bits) << "acc " << accs[j];
    }
}

TEST(Bridge, RequantValueNibblesMatchPlaintext) {
    auto& f = MicroFixture::get();
    RandomSource rng(10);
    const u64 shift = 4;
    std::vector<i64> accs = {0, 17, -17, 300, -300, 1023, -1024, 2000};
    auto ct = f.bgv->encrypt(f.bgv->lane_encode(accs), f.bgv_keys.pk, rng);
    auto e = f.bridge256->extract_words(ct);
    for (size_t j = 0; j < accs.size(); ++j) {
        Tlwe fine = f.bridge256->extract_lane_fine(e, j);
        auto nibs = f.bridge256->requant_value_nibbles(fine, 0, shift, 8, 5);
        ASSERT_EQ(nibs.size(), 2u);
        i64 w = ((accs[j] + (1 << (shift - 1))) >> shift) & 0xFF;
        i64 hi = ((w >> 4) & 15);
        i64 signed_hi = hi >= 8 ? hi - 16 : hi;
        u64 hi_phase = f.tfhe->lwe_phase(nibs[0], f.tfhe_keys.sk.s3);
        u64 lo_phase = f.tfhe->lwe_phase(nibs[1], f.tfhe_keys.sk.s3);
        EXPECT_EQ(TfheContext::spread_decode(hi_phase, 16), signed_hi) << "acc " << accs[j];
        EXPECT_EQ(static_cast<i64>(decode_torus(lo_phase, 32)), w & 15) << "acc " << accs[j];
    }
}

TEST(Bridge, NoiseAfterSwitchIndependentOfInputNoise) {
    auto& f = MicroFixture::get();
    RandomSource rng(11);
    // a fresh ciphertext and a mod-switched deeper one carry different noise;
    // post-bootstrap (requant) outputs should have statistically similar
    // amplitudes since the bootstrap refreshes noise.
    auto measure = [&](const BgvCiphertext& ct) {
        auto e = f.bridge256->extract_words(ct);
        Tlwe fine = f.bridge256->extract_lane_fine(e, 0);
        auto nibs = f.bridge256->requant_value_nibbles(fine, 0, 4, 8, 5);
        u64 phase = f.tfhe->lwe_phase(nibs[1], f.tfhe_keys.sk.s3);
        u64 nominal = encode_torus(decode_torus(phase, 32), 32);
        i64 d = static_cast<i64>(phase - nominal);
        return std::abs(static_cast<double>(d)) / std::pow(2.0, 64);
    };
    std::vector<i64> lanes = {100};
    auto fresh = f.bgv->encrypt(f.bgv->lane_encode(lanes), f.bgv_keys.pk, rng);
    auto deep = f.bgv->mod_switch(f.bgv->mod_switch(fresh));
    double e_fresh = 0, e_deep = 0;
    e_fresh = measure(fresh);
    e_deep = measure(deep);
    // both are bootstrap-fresh: within an order of magnitude of each other
    EXPECT_LT(e_fresh, 1e-4);
    EXPECT_LT(e_deep, 1e-4);
}

TEST(Bridge, BudgetRefusalBelowThreshold) {
    auto& f = MicroFixture::get();
    RandomSource rng(12);
    auto ct = f.bgv->encrypt(f.bgv->lane_encode({1, 2, 3}), f.bgv_keys.pk, rng);
    ct.noise_budget_bits = 3.0;  // below the 4-bit switch threshold
    EXPECT_THROW(f.bridge256->bgv_to_tlwe(ct, 3), BudgetError);
}

TEST(Bridge, MismatchedKeysRejected) {
    auto& f = MicroFixture::get();
    BridgeKeys k;
    k.bgv_hash = f.bgv->params_hash();
    k.tfhe_hash = f.tfhe->params_hash();
    k.bgv_hash[0] ^= 1;
    EXPECT_THROW(SchemeBridge(f.bgv, f.tfhe, &f.tfhe_keys, std::move(k)), ParameterError);
}

TEST(Bridge, ConjugatePackGivesInnerProductLane) {
    auto& f = MicroFixture::get();
    RandomSource rng(13);
    // d lanes packed normally, delta lanes packed conjugate: coefficient 0 of
    // the product is the batch inner product.
    std::vector<i64> d = {3, 5, 2, 7};
    std::vector<i64> delta = {2, 1, 6, 3};
    std::vector<Tlwe> d_vals, g_vals;
    for (size_t i = 0; i < d.size(); ++i) {
        d_vals.push_back(f.tfhe->lwe_encrypt_raw(static_cast<u64>(d[i]) << (64 - 12), f.tfhe_keys.sk.s2,
                                                 f.tfhe->params().level2.alpha, rng));
        g_vals.push_back(f.tfhe->lwe_encrypt_raw(static_cast<u64>(delta[i]) << (64 - 12), f.tfhe_keys.sk.s2,
                                                 f.tfhe->params().level2.alpha, rng));
    }
    auto cd = f.bridge256->tlwe_to_bgv(d_vals, SchemeBridge::PackLayout::kLanes, 12);
    auto cg = f.bridge256->tlwe_to_bgv(g_vals, SchemeBridge::PackLayout::kConjugateLanes, 12);
    auto prod = f.bgv->mult_cc(cd, cg, f.bgv_keys.evk);
    auto lanes = f.bgv->decrypt_tagged(prod, f.bgv_keys.sk, 1);
    i64 want = 0;
    for (size_t i = 0; i < d.size(); ++i) want += d[i] * delta[i];
    EXPECT_EQ(lanes[0], want);
}

TEST(Bridge, BroadcastPackFillsLanes) {
    auto& f = MicroFixture::get();
    RandomSource rng(14);
    Tlwe v = f.tfhe->lwe_encrypt_raw(static_cast<u64>(9) << (64 - 9), f.tfhe_keys.sk.s2,
                                     f.tfhe->params().level2.alpha, rng);
    auto ct = f.bridge256->tlwe_to_bgv({v}, SchemeBridge::PackLayout::kBroadcast, 9, 6);
    auto lanes = f.bgv->decrypt_tagged(ct, f.bgv_keys.sk, 8);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(lanes[i], 9) << "lane " << i;
    EXPECT_EQ(lanes[6], 0);
}
