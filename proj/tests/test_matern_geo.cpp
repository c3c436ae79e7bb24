#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "trapscore/error.hpp"
#include "trapscore/geo.hpp"
#include "trapscore/matern.hpp"

using namespace trapscore;

TEST_SUITE("matern") {

TEST_CASE("nu = 0.5 is the exponential kernel") {
    for (int i = 0; i <= 1000; ++i) {
        const double d = i * 0.01;
        CHECK(std::abs(matern_correlation(d, 0.5) - std::exp(-d)) <= 1e-10);
    }
}

TEST_CASE("half-integer closed forms and general orders match the Bessel quadrature oracle") {
    for (double nu : {0.5, 0.8, 1.5, 2.5, 3.2}) {
        CAPTURE(nu);
        CHECK(matern_correlation(0.0, nu) == 1.0);
        for (double d : {1e-3, 0.05, 0.3, 1.0, 2.0, 4.5, 10.0}) {
            CAPTURE(d);
            CHECK(std::abs(matern_correlation(d, nu) - oracle::matern(d, nu)) <= 1e-9);
        }
    }
    CHECK(matern_correlation(2.0, 1.5) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(matern_correlation(2.0, 1.5) == doctest::Approx(0.406006).epsilon(1e-6));
}

TEST_CASE("correlation decreases strictly with distance") {
    for (double nu : {0.5, 1.5, 2.5}) {
        double prev = matern_correlation(0.0, nu);
        for (int i = 1; i <= 2000; ++i) {
            const double c = matern_correlation(i * 0.005, nu);
            CHECK(c < prev);
            CHECK(c > 0.0);
            prev = c;
        }
    }
}

TEST_CASE("exponential kernel is Markov along a line") {
    const double c12 = matern_correlation(0.7, 0.5), c23 = matern_correlation(1.1, 0.5),
                 c13 = matern_correlation(1.8, 0.5);
    CHECK(std::abs(c13 - c12 * c23) < 1e-14);
}

TEST_CASE("covariance construction and conditioning") {
    const std::vector<geo::LatLon> pts{{41.0, -87.0}, {41.05, -87.0}, {41.0, -87.08}};
    const auto cov = build_correlation_matrix(pts, MaternParams{0.5, 5.0, 2.0, 1e-6});
    CHECK(cov.sigma(0, 0) == doctest::Approx(2.0 + 1e-6));
    const double d01 = geo::haversine_km(pts[0], pts[1]);
    CHECK(cov.sigma(0, 1) == doctest::Approx(2.0 * std::exp(-d01 / 5.0)));
    CHECK(cov.cholesky.info() == Eigen::Success);

    const std::vector<geo::LatLon> dup{{41.0, -87.0}, {41.0, -87.0}};
    CHECK_THROWS_AS(build_correlation_matrix(dup, MaternParams{0.5, 5.0, 1.0, 0.0}), ConditioningError);
    const auto rescued = build_correlation_matrix(dup, MaternParams{0.5, 5.0, 1.0, 0.0}, 20);
    CHECK(rescued.nugget > 0.0);

    CHECK_THROWS_AS((MaternParams{0.0, 1.0, 1.0, 0.0}.validate()), DomainError);
    CHECK_THROWS_AS((MaternParams{0.5, -1.0, 1.0, 0.0}.validate()), DomainError);
    CHECK_THROWS_AS((MaternParams{0.5, 1.0, -1.0, 0.0}.validate()), DomainError);
}

}  // TEST_SUITE

TEST_SUITE("geo") {

TEST_CASE("haversine matches a vector-geometry oracle") {
    std::mt19937_64 g(9);
    std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
    for (int i = 0; i < 500; ++i) {
        const geo::LatLon a{lat(g), lon(g)}, b{lat(g), lon(g)};
        CHECK(geo::haversine_km(a, b) ==
              doctest::Approx(oracle::haversine_km(a.lat, a.lon, b.lat, b.lon)).epsilon(1e-9));
    }
    CHECK(geo::haversine_km({41.0, -87.0}, {41.0, -87.0}) == 0.0);
    // One degree of latitude.
    CHECK(geo::haversine_km({41.0, -87.0}, {42.0, -87.0}) == doctest::Approx(111.195).epsilon(1e-4));
}

TEST_CASE("distance matrix is symmetric with a zero diagonal") {
    const std::vector<geo::LatLon> pts{{41.0, -87.0}, {41.5, -87.3}, {42.0, -88.0}, {41.2, -87.9}};
    const auto d = geo::distance_matrix(pts);
    const auto row = geo::distances_from(pts[1], pts);
    for (int i = 0; i < 4; ++i) {
        CHECK(d(i, i) == 0.0);
        CHECK(row[i] == doctest::Approx(d(1, i)));
        for (int j = 0; j < 4; ++j) CHECK(d(i, j) == doctest::Approx(d(j, i)));
    }
}

}  // TEST_SUITE
