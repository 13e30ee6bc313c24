#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "odcast/rng.hpp"
#include "odcast/temporal.hpp"

using namespace odcast;

namespace {

Tensor2 random_tensor(int rows, int cols, Rng& rng) {
    Tensor2 t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
    return t;
}

AttentionTriple random_triple(int zp, Rng& rng) {
    return {random_tensor(zp, zp, rng), random_tensor(zp, zp, rng), random_tensor(zp, zp, rng)};
}

}  // namespace

TEST_CASE("gather slots per channel") {
    TemporalWindowSpec spec;
    spec.n_days = 5;
    spec.h_hours = 6;
    spec.granularity_min = 15;

    SUBCASE("linear picks the same slot on previous days, most recent first") {
        const auto slots = gather_channel_slots({5, 48}, spec, Channel::Linear);
        REQUIRE(slots.size() == 5);
        for (int k = 0; k < 5; ++k) {
            CHECK(slots[k].day == 4 - k);
            CHECK(slots[k].slot == 48);
        }
    }
    SUBCASE("stpp shifts one hour earlier") {
        const auto slots = gather_channel_slots({5, 48}, spec, Channel::Stpp);
        REQUIRE(slots.size() == 5);
        for (const auto& s : slots) CHECK(s.slot == 44);
        CHECK(slots.front().day == 4);
        CHECK(slots.back().day == 0);
    }
    SUBCASE("stpm shifts one hour later and drops on day overflow") {
        const auto slots = gather_channel_slots({5, 48}, spec, Channel::Stpm);
        REQUIRE(slots.size() == 5);
        for (const auto& s : slots) CHECK(s.slot == 52);
        CHECK(gather_channel_slots({5, 95}, spec, Channel::Stpm).empty());
        CHECK(gather_channel_slots({5, 1}, spec, Channel::Stpp).empty());
    }
    SUBCASE("nonlinear truncates at the day start") {
        const auto slots = gather_channel_slots({0, 2}, spec, Channel::Nonlinear);
        REQUIRE(slots.size() == 2);
        CHECK(slots[0] == SlotIndex{0, 1});
        CHECK(slots[1] == SlotIndex{0, 0});
    }
    SUBCASE("early days truncate day-based channels") {
        CHECK(gather_channel_slots({0, 10}, spec, Channel::Linear).empty());
        CHECK(gather_channel_slots({2, 10}, spec, Channel::Linear).size() == 2);
    }
    SUBCASE("coarse granularity keeps at least one slot of hour offset") {
        TemporalWindowSpec coarse = spec;
        coarse.granularity_min = 120;
        CHECK(coarse.hour_offset_slots() == 1);
        CHECK(coarse.nonlinear_window_slots() == 3);
        const auto slots = gather_channel_slots({3, 5}, coarse, Channel::Stpp);
        REQUIRE(slots.size() == 3);
        CHECK(slots[0].slot == 4);
    }
}

TEST_CASE("scaled dot attention") {
    Rng rng(97);
    const int zp = 6;
    SUBCASE("single node output is its value projection") {
        const AttentionTriple w = random_triple(zp, rng);
        const Tensor2 eq = random_tensor(1, zp, rng);
        const Tensor2 ekv = random_tensor(1, zp, rng);
        const Tensor2 out = scaled_dot_attention(eq, ekv, w);
        const Tensor2 expected = matmul(ekv, transpose(w.W_v));
        for (int c = 0; c < zp; ++c) CHECK(out.at(0, c) == doctest::Approx(expected.at(0, c)).epsilon(1e-12));
    }
    SUBCASE("identical keys make uniform weights and a mean of values") {
        const AttentionTriple w = random_triple(zp, rng);
        Tensor2 ekv(4, zp);
        const Tensor2 proto = random_tensor(1, zp, rng);
        for (int i = 0; i < 4; ++i)
            for (int c = 0; c < zp; ++c) ekv.at(i, c) = proto.at(0, c);
        const Tensor2 eq = random_tensor(4, zp, rng);
        const Tensor2 out = scaled_dot_attention(eq, ekv, w);
        const Tensor2 values = matmul(ekv, transpose(w.W_v));
        for (int i = 0; i < 4; ++i)
            for (int c = 0; c < zp; ++c) {
                double mean = 0.0;
                for (int j = 0; j < 4; ++j) mean += values.at(j, c) / 4.0;
                CHECK(out.at(i, c) == doctest::Approx(mean).epsilon(1e-10));
            }
    }
    SUBCASE("n=3 random instance matches the unrolled formula") {
        for (int trial = 0; trial < 100; ++trial) {
            const AttentionTriple w = random_triple(zp, rng);
            const Tensor2 eq = random_tensor(3, zp, rng);
            const Tensor2 ekv = random_tensor(3, zp, rng);
            const Tensor2 out = scaled_dot_attention(eq, ekv, w);
            const Tensor2 q = matmul(eq, transpose(w.W_q));
            const Tensor2 k = matmul(ekv, transpose(w.W_k));
            const Tensor2 v = matmul(ekv, transpose(w.W_v));
            for (int i = 0; i < 3; ++i) {
                std::vector<double> scores(3);
                for (int j = 0; j < 3; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < zp; ++c) s += q.at(i, c) * k.at(j, c);
                    scores[j] = s / std::sqrt(static_cast<double>(zp));
                }
                const auto weights = softmax(scores);
                for (int c = 0; c < zp; ++c) {
                    double expected = 0.0;
                    for (int j = 0; j < 3; ++j) expected += weights[j] * v.at(j, c);
                    CHECK(out.at(i, c) == doctest::Approx(expected).epsilon(1e-11));
                }
            }
        }
    }
}

TEST_CASE("channel embedding averages attention outputs") {
    Rng rng(101);
    const int zp = 5;
    const AttentionTriple w = random_triple(zp, rng);
    const Tensor2 eq = random_tensor(4, zp, rng);

    SUBCASE("no gathered slots give a zero embedding") {
        const Tensor2 out = channel_embed(eq, {}, w);
        CHECK(out.rows() == 4);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
    }
    SUBCASE("single slot equals that slot's attention output") {
        const Tensor2 past = random_tensor(4, zp, rng);
        const Tensor2 out = channel_embed(eq, {past}, w);
        const Tensor2 expected = scaled_dot_attention(eq, past, w);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
    SUBCASE("identical gathered slots collapse to the single-slot output") {
        const Tensor2 past = random_tensor(4, zp, rng);
        const Tensor2 out = channel_embed(eq, {past, past, past}, w);
        const Tensor2 expected = scaled_dot_attention(eq, past, w);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-11));
    }
    SUBCASE("two slots match the hand-computed mean") {
        const Tensor2 p1 = random_tensor(4, zp, rng);
        const Tensor2 p2 = random_tensor(4, zp, rng);
        const Tensor2 out = channel_embed(eq, {p1, p2}, w);
        const Tensor2 a1 = scaled_dot_attention(eq, p1, w);
        const Tensor2 a2 = scaled_dot_attention(eq, p2, w);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(0.5 * (a1.data()[i] + a2.data()[i])).epsilon(1e-11));
    }
    SUBCASE("averaging order does not matter") {
        std::vector<Tensor2> gathered;
        for (int k = 0; k < 5; ++k) gathered.push_back(random_tensor(4, zp, rng));
        const Tensor2 forward_order = channel_embed(eq, gathered, w);
        std::reverse(gathered.begin(), gathered.end());
        const Tensor2 reverse_order = channel_embed(eq, gathered, w);
        for (std::size_t i = 0; i < forward_order.size(); ++i)
            CHECK(forward_order.data()[i] == doctest::Approx(reverse_order.data()[i]).epsilon(1e-9));
    }
}

TEST_CASE("channel fusion") {
    Rng rng(103);
    const int zp = 5;
    const AttentionTriple fusion = random_triple(zp, rng);

    SUBCASE("single channel reduces to its value projection") {
        const Tensor2 c1 = random_tensor(3, zp, rng);
        const Tensor2 out = fuse_channels({c1}, fusion);
        const Tensor2 expected = matmul(c1, transpose(fusion.W_v));
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
    SUBCASE("identical channels reduce to the common projection") {
        const Tensor2 c1 = random_tensor(3, zp, rng);
        const Tensor2 out = fuse_channels({c1, c1, c1}, fusion);
        const Tensor2 expected = matmul(c1, transpose(fusion.W_v));
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-10));
    }
    SUBCASE("two random channels match the unrolled oracle") {
        for (int trial = 0; trial < 50; ++trial) {
            const AttentionTriple f = random_triple(zp, rng);
            const Tensor2 c1 = random_tensor(3, zp, rng);
            const Tensor2 c2 = random_tensor(3, zp, rng);
            const Tensor2 out = fuse_channels({c1, c2}, f);
            const Tensor2 q1 = matmul(c1, transpose(f.W_q)), q2 = matmul(c2, transpose(f.W_q));
            const Tensor2 k1 = matmul(c1, transpose(f.W_k)), k2 = matmul(c2, transpose(f.W_k));
            const Tensor2 v1 = matmul(c1, transpose(f.W_v)), v2 = matmul(c2, transpose(f.W_v));
            for (int i = 0; i < 3; ++i) {
                auto dot = [&](const Tensor2& a, const Tensor2& b) {
                    double s = 0.0;
                    for (int c = 0; c < zp; ++c) s += a.at(i, c) * b.at(i, c);
                    return s / std::sqrt(static_cast<double>(zp));
                };
                const auto w1 = softmax({dot(q1, k1), dot(q1, k2)});
                const auto w2 = softmax({dot(q2, k1), dot(q2, k2)});
                for (int c = 0; c < zp; ++c) {
                    const double o1 = w1[0] * v1.at(i, c) + w1[1] * v2.at(i, c);
                    const double o2 = w2[0] * v1.at(i, c) + w2[1] * v2.at(i, c);
                    CHECK(out.at(i, c) == doctest::Approx(0.5 * (o1 + o2)).epsilon(1e-10));
                }
            }
        }
    }
}

TEST_CASE("tape temporal ops equal the plain implementations") {
    Rng rng(107);
    const int zp = 6;
    for (int trial = 0; trial < 10; ++trial) {
        const AttentionTriple w = random_triple(zp, rng);
        const AttentionTriple f = random_triple(zp, rng);
        const Tensor2 eq = random_tensor(5, zp, rng);
        const Tensor2 p1 = random_tensor(5, zp, rng);
        const Tensor2 p2 = random_tensor(5, zp, rng);

        const Tensor2 ch_plain = channel_embed(eq, {p1, p2}, w);
        const Tensor2 ch2_plain = channel_embed(eq, {p2}, w);
        const Tensor2 fused_plain = fuse_channels({ch_plain, ch2_plain}, f);

        Tape tape;
        const std::array<int, 3> wid{tape.leaf(w.W_q), tape.leaf(w.W_k), tape.leaf(w.W_v)};
        const std::array<int, 3> fid{tape.leaf(f.W_q), tape.leaf(f.W_k), tape.leaf(f.W_v)};
        const int q = tape.constant(eq);
        const int ch = channel_embed_t(tape, q, {tape.constant(p1), tape.constant(p2)}, wid, 5, zp);
        const int ch2 = channel_embed_t(tape, q, {tape.constant(p2)}, wid, 5, zp);
        const int fused = fuse_channels_t(tape, {ch, ch2}, fid, zp);

        const Tensor2& got = tape.value(fused);
        for (std::size_t i = 0; i < fused_plain.size(); ++i)
            CHECK(got.data()[i] == doctest::Approx(fused_plain.data()[i]).epsilon(1e-10));
        const Tensor2& ch_got = tape.value(ch);
        for (std::size_t i = 0; i < ch_plain.size(); ++i)
            CHECK(ch_got.data()[i] == doctest::Approx(ch_plain.data()[i]).epsilon(1e-10));
    }
}
