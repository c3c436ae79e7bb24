#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "trapscore/error.hpp"
#include "trapscore/pooled.hpp"

using namespace trapscore;
using namespace trapscore::pooled;

TEST_SUITE("pooled") {

TEST_CASE("equal-size groups match the closed form") {
    std::mt19937_64 g(1);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(g() % 50);
        const int m = 1 + static_cast<int>(g() % 30);
        const int k = static_cast<int>(g() % (m + 1));
        PoolGroup grp;
        for (int i = 0; i < m; ++i) {
            grp.pool_sizes.push_back(n);
            grp.positives.push_back(i < k);
        }
        const double expect = 1.0 - std::pow(1.0 - static_cast<double>(k) / m, 1.0 / n);
        CHECK(std::abs(mle_prevalence(grp) - expect) <= 1e-8);
    }
}

TEST_CASE("mixed-size groups match the grid-search likelihood oracle") {
    std::mt19937_64 g(2);
    int checked = 0;
    for (int rep = 0; rep < 60; ++rep) {
        PoolGroup grp;
        const int m = 2 + static_cast<int>(g() % 10);
        for (int i = 0; i < m; ++i) {
            grp.pool_sizes.push_back(1 + static_cast<int>(g() % 50));
            grp.positives.push_back(g() % 3 == 0);
        }
        grp.positives[0] = true;
        grp.positives[1] = false;
        const double got = mle_prevalence(grp);
        CHECK(std::abs(got - oracle::pooled_grid_mle(grp.pool_sizes, grp.positives)) <= 1e-6);
        CHECK(std::abs(score_function(grp, got)) < 1e-3 * grp.pool_sizes.size() * 50);
        ++checked;
    }
    CHECK(checked == 60);
}

TEST_CASE("boundary groups") {
    CHECK(mle_prevalence({{10, 20}, {false, false}}) == 0.0);
    const auto all = mle_prevalence_detail({{10, 20}, {true, true}});
    CHECK(all.prevalence == 1.0);
    CHECK(all.all_positive);
    CHECK(mle_prevalence({{1}, {false}}) == 0.0);
}

TEST_CASE("invalid groups are rejected") {
    CHECK_THROWS_AS(mle_prevalence({{}, {}}), DomainError);
    CHECK_THROWS_AS(mle_prevalence({{0}, {true}}), DomainError);
    CHECK_THROWS_AS(mle_prevalence({{5, 5}, {true}}), DomainError);
}

TEST_CASE("vector index") {
    CHECK(vector_index(100.0, 2, 0.01) == doctest::Approx(0.002));
    CHECK(vector_index(100.0, 1, 0.0) == 0.0);
    CHECK_THROWS_AS(vector_index(-1.0, 1, 0.1), DomainError);
    CHECK_THROWS_AS(vector_index(1.0, 0, 0.1), DomainError);
    CHECK_THROWS_AS(vector_index(1.0, 1, 1.5), DomainError);
}

TEST_CASE("annotate_risk groups by trap-week and summarizes all-positive groups once") {
    Dataset ds;
    ds.sites = {{"A", 41.0, -87.0, {}}, {"B", 41.1, -87.1, {}}};
    auto pool = [](std::string id, int week, int day, int size, bool pos, int count, int piw, int pod) {
        PoolObservation p;
        p.trap_id = std::move(id);
        p.year = 2015;
        p.week = week;
        p.day_of_week = day;
        p.pool_size = size;
        p.test_positive = pos;
        p.mosquito_count_week = count;
        p.pools_in_week = piw;
        p.pools_on_day = pod;
        return p;
    };
    ds.pools = {pool("A", 20, 1, 10, true, 100, 2, 1), pool("A", 20, 3, 10, false, 100, 2, 1),
                pool("B", 20, 1, 20, true, 40, 1, 1), pool("B", 21, 1, 20, false, 40, 1, 1)};
    std::vector<std::string> warnings;
    const auto out = annotate_risk(ds, Grouping::trap_week, [&](std::string_view w) { warnings.emplace_back(w); });
    const double p = 1.0 - std::pow(0.5, 0.1);
    CHECK(out.pools[0].risk == doctest::Approx(50.0 * 1 * p / 1000.0));
    CHECK(out.pools[1].risk == out.pools[0].risk);
    CHECK(out.pools[2].risk == doctest::Approx(40.0 / 1000.0));
    CHECK(out.pools[3].risk == 0.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("1 of 3") != std::string::npos);

    // Per-day grouping separates the two A pools.
    const auto daily = annotate_risk(ds, Grouping::trap_day);
    CHECK(daily.pools[0].risk == doctest::Approx(50.0 / 1000.0));
    CHECK(daily.pools[1].risk == 0.0);

    ds.pools[1].mosquito_count_week = 99;
    CHECK_THROWS_AS(annotate_risk(ds), ValidationError);
}

}  // TEST_SUITE
