#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "odcast/baselines.hpp"
#include "odcast/errors.hpp"
#include "odcast/rng.hpp"

using namespace odcast;

namespace {

Corpus periodic_corpus(int days, const std::vector<int>& per_slot_counts) {
    // every day repeats the same per-slot pattern: orders 0 -> 1
    Corpus corpus;
    corpus.grid.origin_lat = 30.0;
    corpus.grid.origin_lon = 120.0;
    corpus.grid.cell_length_km = 2.0;
    corpus.grid.rows = 2;
    corpus.grid.cols = 2;
    corpus.granularity_min = 1440 / static_cast<int>(per_slot_counts.size());
    corpus.days = days;
    corpus.start_days = days_from_civil(2024, 3, 4);
    const int spd = corpus.slots_per_day();
    corpus.slots.resize(static_cast<std::size_t>(days) * spd);
    for (int d = 0; d < days; ++d)
        for (int s = 0; s < spd; ++s) {
            auto& m = corpus.at(d, s);
            m.day = d;
            m.slot = s;
            m.n = 4;
            if (per_slot_counts[static_cast<std::size_t>(s)] > 0)
                m.entries.push_back({0, 1, per_slot_counts[static_cast<std::size_t>(s)]});
        }
    return corpus;
}

}  // namespace

TEST_CASE("historical average predictor") {
    SUBCASE("constant corpus predicts the constant") {
        const Corpus corpus = periodic_corpus(4, {3, 3, 3, 3, 3, 3});
        const HistoryStats h = history_stats(corpus, 0, 3);
        const auto pred = historical_average_predict(h, {3, 2});
        CHECK(pred.demand[0] == doctest::Approx(3.0));
        CHECK(pred.od.at(0, 1) == doctest::Approx(3.0));
    }
    SUBCASE("two days averaging 2 and 4 predicts 3") {
        Corpus corpus = periodic_corpus(2, {0, 0, 0, 0, 0, 0});
        corpus.at(0, 2).entries.push_back({0, 1, 2});
        corpus.at(1, 2).entries.push_back({0, 1, 4});
        const HistoryStats h = history_stats(corpus, 0, 2);
        const auto pred = historical_average_predict(h, {2, 2});
        CHECK(pred.demand[0] == doctest::Approx(3.0));
    }
    SUBCASE("random corpus matches a brute-force slot-of-day mean") {
        Rng rng(173);
        Corpus corpus = periodic_corpus(5, {0, 0, 0, 0, 0, 0});
        for (int d = 0; d < 5; ++d)
            for (int s = 0; s < 6; ++s)
                if (rng.uniform() < 0.7)
                    corpus.at(d, s).entries.push_back({0, 2, 1 + static_cast<int>(rng.uniform_int(5))});
        const HistoryStats h = history_stats(corpus, 0, 4);
        for (int s = 0; s < 6; ++s) {
            double mean = 0.0;
            for (int d = 0; d < 4; ++d) mean += corpus.at(d, s).demand()[0] / 4.0;
            const auto pred = historical_average_predict(h, {4, s});
            CHECK(pred.demand[0] == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("ar_fit closed-form cases") {
    SUBCASE("constant series is absorbed by the intercept") {
        const std::vector<double> series(20, 7.5);
        const ARModel model = ar_fit(series, 2);
        const std::vector<double> window{7.5, 7.5};
        CHECK(ar_predict(model, window) == doctest::Approx(7.5).epsilon(1e-9));
    }
    SUBCASE("doubling series recovers coefficient 2") {
        std::vector<double> series;
        double x = 0.5;
        for (int i = 0; i < 16; ++i) {
            series.push_back(x);
            x *= 2.0;
        }
        const ARModel model = ar_fit(series, 1);
        CHECK(model.coeffs[0] == doctest::Approx(2.0).epsilon(1e-6));
        const std::vector<double> window{8.0};
        CHECK(ar_predict(model, window) == doctest::Approx(16.0).epsilon(1e-5));
    }
    SUBCASE("alternating series matches the hand-solved normal equations") {
        // x = 0,1,0,1,... with p=1: design [1, x_{t-1}], targets x_t
        // For 12 samples starting at t=1: rows split evenly between
        // (1,0)->1 and (1,1)->0; OLS gives intercept 1, slope -1.
        std::vector<double> series;
        for (int i = 0; i < 13; ++i) series.push_back(i % 2 == 0 ? 0.0 : 1.0);
        const ARModel model = ar_fit(series, 1);
        CHECK(model.intercept == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(model.coeffs[0] == doctest::Approx(-1.0).epsilon(1e-9));
        const std::vector<double> window{1.0};
        CHECK(ar_predict(model, window) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("length guard") {
        const std::vector<double> series{1.0, 2.0, 3.0};
        CHECK_THROWS_AS(ar_fit(series, 2), InternalError);
    }
    SUBCASE("singular design falls back to ridge and flags it") {
        // identical lag columns (all zeros): rank-deficient
        const std::vector<double> series(12, 0.0);
        const ARModel model = ar_fit(series, 2);
        CHECK(model.ridge_fallback);
        const std::vector<double> window{0.0, 0.0};
        CHECK(ar_predict(model, window) == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("ar_predict clamps and uses the intercept") {
    ARModel model;
    model.p = 2;
    model.coeffs = {0.0, 0.0};
    model.intercept = 7.0;
    const std::vector<double> window{3.0, 4.0};
    CHECK(ar_predict(model, window) == 7.0);
    model.intercept = -5.0;
    CHECK(ar_predict(model, window) == 0.0);  // clamped
}

TEST_CASE("ar in-sample residual mean is ~0 with intercept") {
    Rng rng(179);
    std::vector<double> series;
    double x = 2.0;
    for (int i = 0; i < 60; ++i) {
        x = 0.6 * x + rng.uniform(0.0, 2.0);
        series.push_back(x);
    }
    const int p = 3;
    const ARModel model = ar_fit(series, p);
    double mean_resid = 0.0;
    int count = 0;
    for (std::size_t t = p; t < series.size(); ++t) {
        double pred = model.intercept;
        for (int j = 1; j <= p; ++j) pred += model.coeffs[j - 1] * series[t - j];
        mean_resid += series[t] - pred;  // unclamped in-sample fit
        ++count;
    }
    mean_resid /= count;
    CHECK(std::abs(mean_resid) < 1e-8);
}

TEST_CASE("historical average is exact on a perfectly periodic corpus") {
    const Corpus corpus = periodic_corpus(6, {1, 4, 0, 2, 5, 3});
    const HistoryStats h = history_stats(corpus, 0, 4);
    std::vector<SlotIndex> targets;
    for (int s = 0; s < 6; ++s) targets.push_back({5, s});
    const auto result = evaluate(corpus, havg_predictor(h), targets, h, 1.0, "fp");
    CHECK(result.demand.raw.mape[0] == 0.0);
    CHECK(result.od.raw.mape[0] == 0.0);
}

TEST_CASE("ar baseline predictor wires windows from the corpus") {
    const Corpus corpus = periodic_corpus(8, {1, 2, 3, 4, 3, 2});
    const HistoryStats h = history_stats(corpus, 0, 6);
    const ARBaseline baseline = fit_ar_baseline(corpus, 0, 6, 3);
    CHECK(baseline.per_node.size() == 4);
    const auto pred = ar_predictor(corpus, baseline, h)({6, 3});
    // node 0 carries all demand; prediction from the true previous 3 slots
    const std::vector<double> window{3.0, 2.0, 1.0};
    CHECK(pred.demand[0] == doctest::Approx(ar_predict(baseline.per_node[0], window)).epsilon(1e-9));
    CHECK(pred.demand[1] == doctest::Approx(ar_predict(baseline.per_node[1], std::vector<double>{0, 0, 0})));
    CHECK(pred.od.at(0, 1) == doctest::Approx(h.od[3].at(0, 1)));
}
