#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "odcast/errors.hpp"
#include "odcast/geo.hpp"
#include "odcast/rng.hpp"

using namespace odcast;

TEST_CASE("degenerate 1x1 grid") {
    GridSpec spec;
    spec.rows = 1;
    spec.cols = 1;
    const auto cells = build_grid(spec);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].id == 0);
    CHECK(cells[0].center_lat == doctest::Approx(spec.origin_lat + 0.5 * spec.lat_step_deg()));
    CHECK(cells[0].center_lon == doctest::Approx(spec.origin_lon + 0.5 * spec.lon_step_deg()));
}

TEST_CASE("row-major cell ids") {
    GridSpec spec;
    spec.rows = 2;
    spec.cols = 3;
    const auto cells = build_grid(spec);
    REQUIRE(cells.size() == 6);
    for (const auto& c : cells) CHECK(c.id == c.row * 3 + c.col);
    CHECK(cells[5].row == 1);
    CHECK(cells[5].col == 2);
}

TEST_CASE("adjacent centers sit one cell length apart at the equator") {
    GridSpec spec;
    spec.origin_lat = 0.0;
    spec.origin_lon = 0.0;
    spec.cell_length_km = 2.5;
    spec.rows = 2;
    spec.cols = 2;
    const auto cells = build_grid(spec);
    // independent great-circle expectation: longitude offsets on the equator
    // cover exactly (radians * R) km
    const double d01 = haversine_km(cells[0].center_lat, cells[0].center_lon, cells[1].center_lat,
                                    cells[1].center_lon);
    CHECK(std::abs(d01 - 2.5) / 2.5 < 0.01);
    const double d02 = haversine_km(cells[0].center_lat, cells[0].center_lon, cells[2].center_lat,
                                    cells[2].center_lon);
    CHECK(std::abs(d02 - 2.5) / 2.5 < 0.01);
}

TEST_CASE("build_grid rejects empty dimensions") {
    GridSpec spec;
    spec.rows = 0;
    spec.cols = 3;
    CHECK_THROWS_AS(build_grid(spec), UserError);
    spec.rows = 3;
    spec.cols = 0;
    CHECK_THROWS_AS(build_grid(spec), UserError);
}

TEST_CASE("haversine basics") {
    CHECK(haversine_km(10.0, 20.0, 10.0, 20.0) == 0.0);
    // one degree of longitude along the equator
    CHECK(haversine_km(0.0, 0.0, 0.0, 1.0) == doctest::Approx(111.195).epsilon(1e-4));
    CHECK_THROWS_AS(haversine_km(91.0, 0.0, 0.0, 0.0), InternalError);
    CHECK_THROWS_AS(haversine_km(0.0, 181.0, 0.0, 0.0), InternalError);
}

TEST_CASE("haversine symmetry on random pairs") {
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const double lat1 = rng.uniform(-80.0, 80.0), lon1 = rng.uniform(-179.0, 179.0);
        const double lat2 = rng.uniform(-80.0, 80.0), lon2 = rng.uniform(-179.0, 179.0);
        CHECK(haversine_km(lat1, lon1, lat2, lon2) == haversine_km(lat2, lon2, lat1, lon1));
    }
}

TEST_CASE("geo neighbors by threshold") {
    GridSpec spec;
    spec.origin_lat = 40.0;
    spec.origin_lon = -3.0;
    spec.cell_length_km = 2.0;
    spec.rows = 3;
    spec.cols = 3;
    const DistanceGraph dist(build_grid(spec));

    SUBCASE("threshold below spacing leaves every cell isolated") {
        for (int i = 0; i < 9; ++i) CHECK(geo_neighbors(i, dist, 0.5).empty());
    }
    SUBCASE("infinite threshold connects everything but self") {
        const auto all = geo_neighbors(4, dist, 1e18);
        CHECK(all.size() == 8);
    }
    SUBCASE("center cell at 1.5 cell lengths reaches the full 8-neighborhood") {
        const auto got = geo_neighbors(4, dist, 1.5 * spec.cell_length_km);
        // brute-force scan oracle
        std::vector<int> expected;
        for (int j = 0; j < 9; ++j)
            if (j != 4 && dist.at(4, j) <= 1.5 * spec.cell_length_km) expected.push_back(j);
        CHECK(got == expected);
        CHECK(got.size() == 8);
    }
}

TEST_CASE("geo neighborhood is symmetric and self-free on random grids") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        GridSpec spec;
        spec.origin_lat = rng.uniform(-50.0, 50.0);
        spec.origin_lon = rng.uniform(-100.0, 100.0);
        spec.cell_length_km = rng.uniform(0.5, 4.0);
        spec.rows = 2 + static_cast<int>(rng.uniform_int(3));
        spec.cols = 2 + static_cast<int>(rng.uniform_int(3));
        const DistanceGraph dist(build_grid(spec));
        const double threshold = rng.uniform(0.5, 3.0) * spec.cell_length_km;
        const int n = spec.cell_count();
        for (int i = 0; i < n; ++i) {
            const auto ni = geo_neighbors(i, dist, threshold);
            CHECK(std::find(ni.begin(), ni.end(), i) == ni.end());
            for (int j : ni) {
                const auto nj = geo_neighbors(j, dist, threshold);
                CHECK(std::find(nj.begin(), nj.end(), i) != nj.end());
            }
        }
    }
}

TEST_CASE("distance graph obeys the triangle inequality") {
    GridSpec spec;
    spec.origin_lat = 31.1;
    spec.origin_lon = 121.3;
    spec.cell_length_km = 2.5;
    spec.rows = 4;
    spec.cols = 4;
    const DistanceGraph dist(build_grid(spec));
    Rng rng(41);
    for (int trial = 0; trial < 500; ++trial) {
        const int a = static_cast<int>(rng.uniform_int(16));
        const int b = static_cast<int>(rng.uniform_int(16));
        const int c = static_cast<int>(rng.uniform_int(16));
        CHECK(dist.at(a, c) <= dist.at(a, b) + dist.at(b, c) + 1e-6);
    }
    for (int i = 0; i < 16; ++i) {
        CHECK(dist.at(i, i) == 0.0);
        for (int j = 0; j < 16; ++j) CHECK(dist.at(i, j) == dist.at(j, i));
    }
}
