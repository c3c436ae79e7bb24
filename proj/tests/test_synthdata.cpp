#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "trapscore/data_model.hpp"
#include "trapscore/error.hpp"
#include "trapscore/synthdata.hpp"

using namespace trapscore;
using namespace trapscore::synth;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

WorldConfig wide_config(std::uint64_t seed) {
    WorldConfig c = recovery_world(seed);
    c.region = {40.0, 44.0, -91.0, -86.0};
    return c;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("generation is deterministic in the seed") {
    auto cfg = recovery_world(3);
    cfg.n_traps = 20;
    const auto a = generate_world(cfg), b = generate_world(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "trapscore_synth_det";
    write_world(dir / "a", a);
    write_world(dir / "b", b);
    for (const char* f : {"pools.csv", "sites.csv", "cases.csv", "ground_truth.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    cfg.seed = 4;
    write_world(dir / "c", generate_world(cfg));
    CHECK(slurp(dir / "a" / "pools.csv") != slurp(dir / "c" / "pools.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("labels, cases and the written files are mutually consistent") {
    auto cfg = quality_world(5);
    cfg.n_traps = 60;
    const auto w = generate_world(cfg);
    CHECK_NOTHROW(validate(w.dataset));
    REQUIRE(w.truth.pools.size() == w.dataset.pools.size());
    for (std::size_t i = 0; i < w.dataset.pools.size(); ++i) CHECK(w.dataset.pools[i].response == w.truth.pools[i].label);

    // Relabelling from the emitted cases reproduces every label.
    const auto relabeled = label_responses(w.dataset, 1.5, 2);
    for (std::size_t i = 0; i < relabeled.pools.size(); ++i)
        CHECK(relabeled.pools[i].response == w.dataset.pools[i].response);

    // Hard-core placement.
    for (std::size_t i = 0; i < w.dataset.sites.size(); ++i)
        for (std::size_t j = i + 1; j < w.dataset.sites.size(); ++j)
            CHECK(geo::haversine_km(w.dataset.sites[i].location(), w.dataset.sites[j].location()) >= 3.2);

    const auto dir = std::filesystem::temp_directory_path() / "trapscore_synth_rt";
    write_world(dir, w);
    const auto back = parse_dataset({dir / "pools.csv", dir / "sites.csv", dir / "cases.csv"});
    CHECK(back.pools.size() == w.dataset.pools.size());
    CHECK(back.covariate_names == std::vector<std::string>{"impervious", "population", "canopy"});
    const auto back_labels = label_responses(back, 1.5, 2);
    for (std::size_t i = 0; i < back.pools.size(); ++i)
        CHECK(back_labels.pools[i].response == w.dataset.pools[i].response);
    std::filesystem::remove_all(dir);
}

TEST_CASE("zero field variance gives zero site effects") {
    auto cfg = recovery_world(6);
    cfg.n_traps = 30;
    cfg.true_matern.sigma2 = 0.0;
    for (const auto& t : generate_world(cfg).truth.traps) CHECK(t.field == 0.0);
}

TEST_CASE("field variance matches the configured sill") {
    auto cfg = wide_config(7);
    cfg.n_traps = 400;
    cfg.weeks_per_year = 1;
    cfg.true_matern = {0.5, 0.3, 1.0, 1e-6};
    const auto w = generate_world(cfg);
    double s = 0.0, ss = 0.0;
    for (const auto& t : w.truth.traps) {
        s += t.field;
        ss += t.field * t.field;
    }
    const double n = static_cast<double>(w.truth.traps.size());
    const double var = (ss - s * s / n) / (n - 1.0);
    CHECK(var > 0.8);
    CHECK(var < 1.2);
}

TEST_CASE("test-indicator coefficient is recovered as a log-odds ratio") {
    auto cfg = wide_config(8);
    cfg.n_traps = 400;
    cfg.years = {2014, 2015, 2016, 2017, 2018};
    cfg.weeks_per_year = 10;
    cfg.first_week = 10;
    cfg.true_matern.sigma2 = 0.0;
    cfg.true_beta = {};
    cfg.true_beta[0] = -1.0;
    cfg.true_beta[2] = 2.0;
    cfg.infection_logit = -3.5;
    const auto w = generate_world(cfg);
    REQUIRE(w.dataset.pools.size() == 20000);
    double n[2][2] = {{0, 0}, {0, 0}};
    for (const auto& p : w.dataset.pools) n[p.test_positive][p.response] += 1;
    const double lor = std::log(n[1][1] * n[0][0] / (n[1][0] * n[0][1]));
    CHECK(lor >= 1.7);
    CHECK(lor <= 2.3);
}

TEST_CASE("invalid configurations") {
    auto cfg = recovery_world(1);
    cfg.n_traps = 1;
    CHECK_THROWS_AS(generate_world(cfg), ConfigError);
    cfg = recovery_world(1);
    cfg.weeks_per_year = 30;
    CHECK_THROWS_AS(generate_world(cfg), ConfigError);
    cfg = recovery_world(1);
    cfg.n_traps = 5000;
    CHECK_THROWS_AS(generate_world(cfg), ConfigError);
    cfg = recovery_world(1);
    cfg.covariate_specs = {CovariateSpec{.name = "a", .parent = "b"}};
    CHECK_THROWS_AS(generate_world(cfg), ConfigError);
}

TEST_CASE("ground truth JSON records the configuration") {
    auto cfg = recovery_world(9);
    cfg.n_traps = 10;
    const auto w = generate_world(cfg);
    const auto j = to_json(w.truth);
    CHECK(j.dump().find("sigma2") != std::string::npos);
    CHECK(j.dump().find("T01") != std::string::npos);
}

}  // TEST_SUITE
