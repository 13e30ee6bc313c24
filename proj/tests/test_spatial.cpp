#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "odcast/errors.hpp"
#include "odcast/rng.hpp"
#include "odcast/spatial.hpp"

using namespace odcast;

namespace {

GridSpec grid3x3() {
    GridSpec g;
    g.origin_lat = 30.0;
    g.origin_lon = 120.0;
    g.cell_length_km = 2.0;
    g.rows = 3;
    g.cols = 3;
    return g;
}

SlotODMatrix random_od(int n, Rng& rng, double density = 0.3, int max_count = 9) {
    SlotODMatrix od;
    od.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rng.uniform() < density)
                od.entries.push_back({i, j, 1 + static_cast<int>(rng.uniform_int(max_count))});
    return od;
}

Tensor2 random_tensor(int rows, int cols, Rng& rng) {
    Tensor2 t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
    return t;
}

ModelParams random_params(int z, int zp, int heads, std::uint64_t seed) {
    ModelDims dims;
    dims.z = z;
    dims.z_prime = zp;
    dims.heads = heads;
    return ModelParams::init(dims, seed);
}

}  // namespace

TEST_CASE("neighbor sets from OD and distance") {
    const DistanceGraph dist(build_grid(grid3x3()));
    SUBCASE("zero OD leaves semantic sets empty, geo untouched") {
        SlotODMatrix od;
        od.n = 9;
        const auto sets = neighbor_sets(od, dist, 4.0);
        for (int i = 0; i < 9; ++i) {
            CHECK(sets.fwd[i].empty());
            CHECK(sets.bwd[i].empty());
            CHECK(sets.geo[i] == geo_neighbors(i, dist, 4.0));
        }
    }
    SUBCASE("single entry creates one forward and one backward link") {
        SlotODMatrix od;
        od.n = 9;
        od.entries.push_back({1, 2, 5});
        const auto sets = neighbor_sets(od, dist, 4.0);
        CHECK(sets.fwd[1] == std::vector<int>{2});
        CHECK(sets.bwd[2] == std::vector<int>{1});
        for (int i = 0; i < 9; ++i) {
            if (i != 1) CHECK(sets.fwd[i].empty());
            if (i != 2) CHECK(sets.bwd[i].empty());
        }
    }
    SUBCASE("random sparse matrices match a brute-force scan") {
        Rng rng(61);
        GridSpec g6 = grid3x3();
        g6.rows = 2;
        g6.cols = 3;
        const DistanceGraph d6(build_grid(g6));
        for (int trial = 0; trial < 100; ++trial) {
            const SlotODMatrix od = random_od(6, rng);
            const Tensor2 dense = od.dense();
            const auto sets = neighbor_sets(od, d6, 3.0);
            for (int i = 0; i < 6; ++i) {
                std::vector<int> fwd, bwd;
                for (int j = 0; j < 6; ++j) {
                    if (dense.at(i, j) > 0) fwd.push_back(j);
                    if (dense.at(j, i) > 0) bwd.push_back(j);
                }
                CHECK(sets.fwd[i] == fwd);
                CHECK(sets.bwd[i] == bwd);
            }
        }
    }
}

TEST_CASE("pre-weights: request intensity and inverse distance") {
    const DistanceGraph dist(build_grid(grid3x3()));
    SUBCASE("single forward neighbor saturates to ~1") {
        SlotODMatrix od;
        od.n = 9;
        od.entries.push_back({0, 1, 4});
        const auto sets = neighbor_sets(od, dist, 4.0);
        const auto w = pre_weights(0, sets, od, dist, 1e-6);
        REQUIRE(w.fwd.size() == 1);
        CHECK(w.fwd[0] == doctest::Approx(4.0 / (4.0 + 1e-6)));
    }
    SUBCASE("two forward neighbors split 1:3") {
        SlotODMatrix od;
        od.n = 9;
        od.entries.push_back({0, 1, 1});
        od.entries.push_back({0, 2, 3});
        const auto sets = neighbor_sets(od, dist, 4.0);
        const auto w = pre_weights(0, sets, od, dist, 1e-6);
        REQUIRE(w.fwd.size() == 2);
        CHECK(w.fwd[0] == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(w.fwd[1] == doctest::Approx(0.75).epsilon(1e-6));
    }
    SUBCASE("geo neighbors at 1 km and 3 km weigh 0.75 / 0.25") {
        std::vector<GridCell> cells(3);
        cells[0] = {0, 0, 0, 0.0, 0.0};
        cells[1] = {1, 0, 1, 0.0, 1.0 / 111.195};
        cells[2] = {2, 0, 2, 0.0, 3.0 / 111.195};
        const DistanceGraph line(cells);
        SlotODMatrix od;
        od.n = 3;
        NeighborSets sets;
        sets.fwd.assign(3, {});
        sets.bwd.assign(3, {});
        sets.geo.assign(3, {});
        sets.geo[0] = {1, 2};
        const auto w = pre_weights(0, sets, od, line, 1e-6);
        REQUIRE(w.geo.size() == 2);
        CHECK(w.geo[0] == doctest::Approx(0.75).epsilon(1e-9));
        CHECK(w.geo[1] == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(w.geo[0] + w.geo[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("backward weights follow incoming counts") {
        SlotODMatrix od;
        od.n = 9;
        od.entries.push_back({3, 0, 2});
        od.entries.push_back({5, 0, 6});
        const auto sets = neighbor_sets(od, dist, 4.0);
        const auto w = pre_weights(0, sets, od, dist, 1e-6);
        REQUIRE(w.bwd.size() == 2);
        CHECK(w.bwd[0] == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(w.bwd[1] == doctest::Approx(0.75).epsilon(1e-6));
    }
}

TEST_CASE("attention score formula") {
    Rng rng(67);
    const int z = 5, zp = 7;
    SUBCASE("zero attention vector gives zero score") {
        const Tensor2 W_c = random_tensor(zp, z, rng);
        const Tensor2 a(2 * zp, 1);
        const Tensor2 e = random_tensor(2, z, rng);
        CHECK(attention_score(e.row(0), e.row(1), 0.7, W_c, a, 0.2) == 0.0);
    }
    SUBCASE("zero prior erases the neighbor half") {
        const Tensor2 W_c = random_tensor(zp, z, rng);
        const Tensor2 a = random_tensor(2 * zp, 1, rng);
        const Tensor2 e = random_tensor(3, z, rng);
        const double s1 = attention_score(e.row(0), e.row(1), 0.0, W_c, a, 0.2);
        const double s2 = attention_score(e.row(0), e.row(2), 0.0, W_c, a, 0.2);
        CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    }
    SUBCASE("random instances match the step-by-step oracle") {
        for (int trial = 0; trial < 100; ++trial) {
            const Tensor2 W_c = random_tensor(zp, z, rng);
            const Tensor2 a = random_tensor(2 * zp, 1, rng);
            const Tensor2 e = random_tensor(2, z, rng);
            const double prior = rng.uniform(0.0, 1.0);
            // oracle: transform, scale, concat, dot, LeakyReLU, one step at a time
            std::vector<double> ui(zp, 0.0), uj(zp, 0.0);
            for (int r = 0; r < zp; ++r)
                for (int c = 0; c < z; ++c) {
                    ui[r] += W_c.at(r, c) * e.at(0, c);
                    uj[r] += W_c.at(r, c) * e.at(1, c);
                }
            for (double& v : uj) v *= prior;
            double dot = 0.0;
            for (int r = 0; r < zp; ++r) dot += a.at(r, 0) * ui[r] + a.at(zp + r, 0) * uj[r];
            const double expected = dot >= 0 ? dot : 0.2 * dot;
            CHECK(attention_score(e.row(0), e.row(1), prior, W_c, a, 0.2) ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("normalize_scores per type") {
    CHECK(normalize_scores({1.5, 1.5}) == std::vector<double>{0.5, 0.5});
    CHECK(normalize_scores({}).empty());
    const auto s = normalize_scores({1.0, 2.0, 3.0});
    const double zsum = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(s[i] - std::exp(1.0 + i) / zsum) < 1e-12);
}

TEST_CASE("aggregate blocks") {
    Rng rng(71);
    const int z = 4, zp = 6;
    const Tensor2 W_s = random_tensor(zp, z, rng);
    const Tensor2 e = random_tensor(5, z, rng);
    NeighborSets sets;
    sets.fwd.assign(5, {});
    sets.bwd.assign(5, {});
    sets.geo.assign(5, {});

    SUBCASE("isolated node only keeps its own block") {
        const Tensor2 out = aggregate(e, 2, sets, {}, {}, {}, W_s);
        REQUIRE(out.cols() == 4 * zp);
        for (int r = 0; r < zp; ++r) {
            double own = 0.0;
            for (int c = 0; c < z; ++c) own += W_s.at(r, c) * e.at(2, c);
            CHECK(out.at(0, r) == doctest::Approx(own).epsilon(1e-12));
        }
        for (int c = zp; c < 4 * zp; ++c) CHECK(out.at(0, c) == 0.0);
    }
    SUBCASE("single forward neighbor with weight one copies its transform") {
        sets.fwd[0] = {3};
        const Tensor2 out = aggregate(e, 0, sets, {1.0}, {}, {}, W_s);
        for (int r = 0; r < zp; ++r) {
            double tj = 0.0;
            for (int c = 0; c < z; ++c) tj += W_s.at(r, c) * e.at(3, c);
            CHECK(out.at(0, zp + r) == doctest::Approx(tj).epsilon(1e-12));
        }
    }
    SUBCASE("random instance matches a naive summation oracle") {
        for (int trial = 0; trial < 50; ++trial) {
            NeighborSets s2;
            s2.fwd.assign(5, {});
            s2.bwd.assign(5, {});
            s2.geo.assign(5, {});
            std::vector<double> wf, wb, wq;
            for (int j = 0; j < 5; ++j) {
                if (rng.uniform() < 0.5) s2.fwd[1].push_back(j);
                if (rng.uniform() < 0.5) s2.bwd[1].push_back(j);
                if (rng.uniform() < 0.5 && j != 1) s2.geo[1].push_back(j);
            }
            for (std::size_t k = 0; k < s2.fwd[1].size(); ++k) wf.push_back(rng.uniform(0.0, 1.0));
            for (std::size_t k = 0; k < s2.bwd[1].size(); ++k) wb.push_back(rng.uniform(0.0, 1.0));
            for (std::size_t k = 0; k < s2.geo[1].size(); ++k) wq.push_back(rng.uniform(0.0, 1.0));
            const Tensor2 out = aggregate(e, 1, s2, wf, wb, wq, W_s);
            auto transform = [&](int j, int r) {
                double v = 0.0;
                for (int c = 0; c < z; ++c) v += W_s.at(r, c) * e.at(j, c);
                return v;
            };
            for (int r = 0; r < zp; ++r) {
                double bf = 0.0, bb = 0.0, bq = 0.0;
                for (std::size_t k = 0; k < s2.fwd[1].size(); ++k) bf += wf[k] * transform(s2.fwd[1][k], r);
                for (std::size_t k = 0; k < s2.bwd[1].size(); ++k) bb += wb[k] * transform(s2.bwd[1][k], r);
                for (std::size_t k = 0; k < s2.geo[1].size(); ++k) bq += wq[k] * transform(s2.geo[1][k], r);
                CHECK(out.at(0, zp + r) == doctest::Approx(bf).epsilon(1e-10));
                CHECK(out.at(0, 2 * zp + r) == doctest::Approx(bb).epsilon(1e-10));
                CHECK(out.at(0, 3 * zp + r) == doctest::Approx(bq).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("multi-head gating behaviors") {
    Rng rng(73);
    const DistanceGraph dist(build_grid(grid3x3()));
    const SlotODMatrix od = random_od(9, rng);
    const SpatialContext ctx = build_spatial_context(od, dist, 4.0, 1e-6);
    const Tensor2 e = random_tensor(9, 6, rng);

    SUBCASE("K=1 with forced-high gate bias reduces to the projected head") {
        ModelParams p = random_params(6, 8, 1, 7);
        p.gate_b.at(0, 0) = 60.0;  // sigmoid saturates at 1
        const Tensor2 out = multi_head_spatial(e, ctx, p, 0.2);
        // oracle: single head output projected by out_proj
        Tensor2 head(9, 4 * 8);
        for (int i = 0; i < 9; ++i) {
            auto weights = [&](const std::vector<int>& nb, const std::vector<double>& priors, const Tensor2& a) {
                std::vector<double> scores;
                for (std::size_t k = 0; k < nb.size(); ++k)
                    scores.push_back(attention_score(e.row(i), e.row(nb[k]), priors[k], p.spatial[0].W_c, a, 0.2));
                return normalize_scores(scores);
            };
            const Tensor2 agg = aggregate(e, i, ctx.sets, weights(ctx.sets.fwd[i], ctx.pre[i].fwd, p.spatial[0].a_fwd),
                                          weights(ctx.sets.bwd[i], ctx.pre[i].bwd, p.spatial[0].a_bwd),
                                          weights(ctx.sets.geo[i], ctx.pre[i].geo, p.spatial[0].a_geo),
                                          p.spatial[0].W_s);
            for (int c = 0; c < 4 * 8; ++c) head.at(i, c) = agg.at(0, c);
        }
        const Tensor2 projected = matmul(head, transpose(p.out_proj));
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(projected.data()[i]).epsilon(1e-9));
    }

    SUBCASE("identical heads scale the common projection by the gate sum") {
        ModelParams p = random_params(6, 8, 2, 11);
        p.spatial[1] = p.spatial[0];
        const Tensor2 out = multi_head_spatial(e, ctx, p, 0.2);

        ModelParams single = random_params(6, 8, 1, 11);
        single.spatial[0] = p.spatial[0];
        single.out_proj = p.out_proj;
        single.gate_w = Tensor2(1, 4 * 8);
        single.gate_b = Tensor2(1, 1);
        single.gate_b.at(0, 0) = 60.0;  // gate ~= 1 -> plain projected head
        const Tensor2 base = multi_head_spatial(e, ctx, single, 0.2);

        // per-node gate sum from the shared pooled head output
        for (int i = 0; i < 9; ++i) {
            Tensor2 head_row(1, 4 * 8);
            {
                auto weights = [&](const std::vector<int>& nb, const std::vector<double>& priors, const Tensor2& a) {
                    std::vector<double> scores;
                    for (std::size_t k = 0; k < nb.size(); ++k)
                        scores.push_back(attention_score(e.row(i), e.row(nb[k]), priors[k], p.spatial[0].W_c, a, 0.2));
                    return normalize_scores(scores);
                };
                head_row = aggregate(e, i, ctx.sets, weights(ctx.sets.fwd[i], ctx.pre[i].fwd, p.spatial[0].a_fwd),
                                     weights(ctx.sets.bwd[i], ctx.pre[i].bwd, p.spatial[0].a_bwd),
                                     weights(ctx.sets.geo[i], ctx.pre[i].geo, p.spatial[0].a_geo), p.spatial[0].W_s);
            }
            double gate_sum = 0.0;
            for (int h = 0; h < 2; ++h) {
                double lin = p.gate_b.at(h, 0);
                for (int c = 0; c < 4 * 8; ++c) lin += p.gate_w.at(h, c) * head_row.at(0, c);
                gate_sum += sigmoid(lin);
            }
            for (int r = 0; r < 8; ++r) CHECK(out.at(i, r) == doctest::Approx(gate_sum * base.at(i, r)).epsilon(1e-9));
        }
    }

    SUBCASE("tape forward equals the plain implementation") {
        for (int trial = 0; trial < 10; ++trial) {
            const SlotODMatrix od2 = random_od(9, rng);
            const SpatialContext ctx2 = build_spatial_context(od2, dist, 4.0, 1e-6);
            const Tensor2 e2 = random_tensor(9, 6, rng);
            const ModelParams p = random_params(6, 8, 2, 100 + trial);
            const Tensor2 plain = multi_head_spatial(e2, ctx2, p, 0.2);
            Tape tape;
            const BoundParams bound = bind_params(tape, p);
            const int out = spatial_forward(tape, tape.constant(e2), ctx2, bound, p.dims, 0.2);
            const Tensor2& taped = tape.value(out);
            REQUIRE(taped.rows() == plain.rows());
            REQUIRE(taped.cols() == plain.cols());
            for (std::size_t i = 0; i < plain.size(); ++i)
                CHECK(taped.data()[i] == doctest::Approx(plain.data()[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("attention weights sum to one per nonempty type") {
    Rng rng(79);
    const DistanceGraph dist(build_grid(grid3x3()));
    for (int trial = 0; trial < 100; ++trial) {
        const SlotODMatrix od = random_od(9, rng, 0.25);
        const SpatialContext ctx = build_spatial_context(od, dist, 4.0, 1e-6);
        const ModelParams p = random_params(6, 8, 1, 1000 + trial);
        const Tensor2 e = random_tensor(9, 6, rng);
        for (int i = 0; i < 9; ++i) {
            auto check_type = [&](const std::vector<int>& nb, const std::vector<double>& priors, const Tensor2& a) {
                std::vector<double> scores;
                for (std::size_t k = 0; k < nb.size(); ++k)
                    scores.push_back(attention_score(e.row(i), e.row(nb[k]), priors[k], p.spatial[0].W_c, a, 0.2));
                const auto w = normalize_scores(scores);
                if (nb.empty()) {
                    CHECK(w.empty());
                } else {
                    double sum = 0.0;
                    for (double v : w) sum += v;
                    CHECK(std::abs(sum - 1.0) < 1e-9);
                }
            };
            check_type(ctx.sets.fwd[i], ctx.pre[i].fwd, p.spatial[0].a_fwd);
            check_type(ctx.sets.bwd[i], ctx.pre[i].bwd, p.spatial[0].a_bwd);
            check_type(ctx.sets.geo[i], ctx.pre[i].geo, p.spatial[0].a_geo);
        }
    }
}

TEST_CASE("argmax of forward weights is shift invariant") {
    Rng rng(83);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 2 + static_cast<int>(rng.uniform_int(5));
        std::vector<double> scores(m);
        for (double& s : scores) s = rng.uniform(-3.0, 3.0);
        const auto w1 = normalize_scores(scores);
        std::vector<double> shifted = scores;
        const double c = rng.uniform(-10.0, 10.0);
        for (double& s : shifted) s += c;
        const auto w2 = normalize_scores(shifted);
        const auto arg1 = std::max_element(w1.begin(), w1.end()) - w1.begin();
        const auto arg2 = std::max_element(w2.begin(), w2.end()) - w2.begin();
        CHECK(arg1 == arg2);
    }
}

TEST_CASE("isolated node still gets a finite embedding") {
    Rng rng(89);
    // no orders at all and a threshold below the grid spacing
    GridSpec g = grid3x3();
    g.geo_threshold_km = 0.5;
    const DistanceGraph dist(build_grid(g));
    SlotODMatrix od;
    od.n = 9;
    const SpatialContext ctx = build_spatial_context(od, dist, g.threshold_km(), 1e-6);
    for (int i = 0; i < 9; ++i) {
        CHECK(ctx.sets.fwd[i].empty());
        CHECK(ctx.sets.geo[i].empty());
    }
    const ModelParams p = random_params(6, 8, 2, 17);
    const Tensor2 e = random_tensor(9, 6, rng);
    const Tensor2 out = multi_head_spatial(e, ctx, p, 0.2);
    CHECK(out.all_finite());
}
