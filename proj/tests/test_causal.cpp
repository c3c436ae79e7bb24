#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "trapscore/causal.hpp"
#include "trapscore/error.hpp"

using namespace trapscore;
using namespace trapscore::causal;

namespace {

using Sets = std::vector<std::vector<std::string>>;

std::set<std::set<std::string>> as_set(const Sets& s) {
    std::set<std::set<std::string>> out;
    for (const auto& v : s) out.emplace(v.begin(), v.end());
    return out;
}

const char* kFig4a =
    "impervious -> low_density\n"
    "impervious -> score\n"
    "low_density -> score\n";
const char* kFig4b =
    "hs_grad -> score\n"
    "pct_minority -> hs_grad\n"
    "pct_minority -> canopy\n"
    "canopy -> score\n";

double rng_unit(std::mt19937_64& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }

Eigen::VectorXd normal_vector(std::mt19937_64& g, Eigen::Index n) {
    std::normal_distribution<double> n01;
    Eigen::VectorXd v(n);
    for (auto& x : v) x = n01(g);
    return v;
}

}  // namespace

TEST_SUITE("causal") {

TEST_CASE("DAG text format") {
    const auto d = Dag::parse(
        "# comment\n"
        "a -> b -> c   # chain\n"
        "hidden: u\n"
        "u -> a\n"
        "hidden:w -> c\n"
        "lonely\n");
    CHECK(d.size() == 6);
    CHECK(d.is_hidden("u"));
    CHECK(d.is_hidden("w"));
    CHECK(!d.is_hidden("a"));
    CHECK(d.has_node("lonely"));
    CHECK(d.children(d.index("a")) == std::vector<int>{d.index("b")});
    CHECK_THROWS_AS(d.index("nope"), DomainError);
    CHECK_THROWS_AS(Dag::parse("a -> -> b"), ParseError);
    CHECK_THROWS_AS(Dag::load("/nonexistent/dag.txt"), InputError);

    const auto empty = Dag::parse("");
    CHECK(empty.size() == 0);
    CHECK_THROWS_AS(backdoor_adjustment_sets(empty, "x", "y"), DomainError);
}

TEST_CASE("cycles are rejected with the cycle spelled out") {
    try {
        Dag::parse("a -> b\nb -> c\nc -> a\n");
        FAIL("expected a cycle error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cycle") != std::string::npos);
        CHECK(msg.find("a -> b -> c -> a") != std::string::npos);
    }
    CHECK_THROWS_AS(Dag::parse("a -> b\nb -> a\n"), ValidationError);
}

TEST_CASE("reference DAG fixtures") {
    const auto a = backdoor_adjustment_sets(Dag::parse(kFig4a), "low_density", "score");
    CHECK(a.identifiable);
    CHECK(a.sets == Sets{{"impervious"}});

    const auto b = backdoor_adjustment_sets(Dag::parse(kFig4b), "hs_grad", "score");
    CHECK(b.identifiable);
    CHECK(b.sets == Sets{{"canopy"}, {"pct_minority"}});

    const auto c = backdoor_adjustment_sets(Dag::parse("x -> y\nx -> m -> y\n"), "x", "y");
    CHECK(c.sets == Sets{{}});

    const auto h = backdoor_adjustment_sets(Dag::parse("hidden: u\nu -> x\nu -> y\nx -> y\n"), "x", "y");
    CHECK(!h.identifiable);
    CHECK(h.sets.empty());
}

TEST_CASE("adjustment sets and d-separation match exhaustive path enumeration") {
    std::mt19937_64 g(17);
    int dags = 0, identifiable = 0;
    for (int rep = 0; rep < 250; ++rep) {
        const int n = 3 + static_cast<int>(g() % 8);  // 3..10 nodes
        const double density = 0.2 + 0.4 * rng_unit(g);
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::shuffle(order.begin(), order.end(), g);
        const int x = static_cast<int>(g() % n);
        int y = static_cast<int>(g() % n);
        if (y == x) y = (x + 1) % n;
        oracle::SmallDag ref(n);
        Dag dag;
        std::vector<bool> hidden(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            hidden[static_cast<std::size_t>(i)] = i != x && i != y && g() % 5 == 0;
            dag.add_node("v" + std::to_string(i), hidden[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng_unit(g) < density) {
                    const int a = order[static_cast<std::size_t>(i)], b = order[static_cast<std::size_t>(j)];
                    ref.edge[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
                    dag.add_edge("v" + std::to_string(a), "v" + std::to_string(b));
                }

        std::vector<int> allowed;
        for (int v = 0; v < n; ++v)
            if (v != x && v != y && !hidden[static_cast<std::size_t>(v)]) allowed.push_back(v);
        Sets expect;
        for (const auto& s : oracle::minimal_backdoor_sets(ref, x, y, allowed)) {
            std::vector<std::string> names;
            for (int v : s) names.push_back("v" + std::to_string(v));
            expect.push_back(names);
        }
        const auto got = backdoor_adjustment_sets(dag, "v" + std::to_string(x), "v" + std::to_string(y));
        CAPTURE(rep);
        CHECK(as_set(got.sets) == as_set(expect));
        CHECK(got.identifiable == !expect.empty());
        for (std::size_t i = 1; i < got.sets.size(); ++i) CHECK(got.sets[i - 1].size() <= got.sets[i].size());
        ++dags;
        identifiable += got.identifiable ? 1 : 0;

        for (int trial = 0; trial < 5; ++trial) {
            std::set<int> z;
            for (int v = 0; v < n; ++v)
                if (v != x && v != y && g() % 3 == 0) z.insert(v);
            CHECK(d_separated(dag, {x}, {y}, z) == oracle::d_separated(ref, x, y, z));
            CHECK(satisfies_backdoor(dag, x, y, z) == oracle::backdoor(ref, x, y, z));
        }
    }
    CHECK(dags == 250);
    CHECK(identifiable > 50);
    CHECK(identifiable < 250);
}

TEST_CASE("type-7 quantiles") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({4, 1, 3, 2}, 0.25) == 1.75);
    CHECK(quantile({5}, 0.9) == 5.0);
    CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
}

TEST_CASE("GPS recovers a linear treatment model") {
    std::mt19937_64 g(31);
    const Eigen::Index n = 5000;
    const Eigen::VectorXd x = normal_vector(g, n), e = normal_vector(g, n);
    const Eigen::VectorXd t = 2.0 * x + e;
    Eigen::MatrixXd design(n, 2);
    design.col(0).setOnes();
    design.col(1) = x;
    const auto m = fit_gps(t, design, {"intercept", "x"});
    CHECK(m.beta(1) >= 1.94);
    CHECK(m.beta(1) <= 2.06);
    CHECK(m.sigma2 >= 0.9);
    CHECK(m.sigma2 <= 1.1);
    const double mu = m.mean(design)(0);
    CHECK(m.density(mu, mu) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi * m.sigma2)));

    // Densities are positive and integrate to one.
    double area = 0.0;
    const double sd = std::sqrt(m.sigma2), h = 1e-3 * sd;
    for (double t0 = mu - 12 * sd; t0 <= mu + 12 * sd; t0 += h) {
        const double d = m.density(t0, mu);
        CHECK_MESSAGE(d >= 0.0, "negative density");
        area += d * h;
    }
    CHECK(std::abs(area - 1.0) < 1e-6);
}

TEST_CASE("GPS errors") {
    const Eigen::Index n = 50;
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    CHECK_THROWS_AS(fit_gps(Eigen::VectorXd::Constant(n, 3.0), ones), DomainError);

    std::mt19937_64 g(32);
    const Eigen::VectorXd x = normal_vector(g, n);
    Eigen::MatrixXd design(n, 3);
    design.col(0).setOnes();
    design.col(1) = x;
    design.col(2) = 2.0 * x;
    try {
        fit_gps(normal_vector(g, n), design, {"intercept", "canopy", "canopy2"});
        FAIL("expected a rank error");
    } catch (const RankError& e) {
        CHECK(std::string(e.what()).find("canopy") != std::string::npos);
    }
}

TEST_CASE("B-spline basis is a non-negative partition of unity") {
    const BSplineBasis basis(0.0, 10.0, {2.0, 3.5, 7.0});
    CHECK(basis.size() == 7);
    std::vector<double> v(basis.size());
    for (double x = 0.0; x <= 10.0; x += 0.05) {
        basis.evaluate(x, v.data());
        double s = 0.0;
        for (double b : v) {
            CHECK(b >= -1e-15);
            s += b;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    basis.evaluate(10.0, v.data());
    CHECK(v.back() == doctest::Approx(1.0));
}

TEST_CASE("ADRF: flat under the null, linear when unconfounded, debiased when confounded") {
    std::mt19937_64 g(41);
    {
        const Eigen::Index n = 2000;
        const Eigen::VectorXd t = normal_vector(g, n), y = normal_vector(g, n);
        const auto grid = percentile_grid(t, 50);
        const auto est = estimate_adrf(y, t, Eigen::MatrixXd(n, 0), grid);
        const double mean = y.mean();
        const double sd = std::sqrt((y.array() - mean).square().sum() / (n - 1));
        for (double mu : est.mu) CHECK(std::abs(mu - mean) <= 2.0 * (sd / std::sqrt(n)) * 3.0);
    }
    {
        const Eigen::Index n = 5000;
        const Eigen::VectorXd t = normal_vector(g, n);
        const Eigen::VectorXd y = (1.0 + 2.0 * t.array()).matrix() + normal_vector(g, n);
        const auto grid = percentile_grid(t, 50);
        const auto est = estimate_adrf(y, t, Eigen::MatrixXd(n, 0), grid);
        const double slope = oracle::ols_slope(grid, est.mu);
        CHECK(slope >= 1.9);
        CHECK(slope <= 2.1);
    }
    {
        const Eigen::Index n = 5000;
        const Eigen::VectorXd x = normal_vector(g, n);
        const Eigen::VectorXd t = x + normal_vector(g, n);
        const Eigen::VectorXd y = t + 2.0 * x + normal_vector(g, n);
        const auto grid = percentile_grid(t, 50);
        const auto est = estimate_adrf(y, t, x, grid);
        CHECK(std::abs(oracle::ols_slope(grid, est.mu) - 1.0) < 0.15);
        std::vector<double> tv(t.data(), t.data() + n), yv(y.data(), y.data() + n);
        CHECK(oracle::ols_slope(tv, yv) > 1.5);
    }
}

TEST_CASE("ADRF is equivariant under affine recoding of the treatment") {
    std::mt19937_64 g(42);
    const Eigen::Index n = 1500;
    const Eigen::VectorXd x = normal_vector(g, n);
    const Eigen::VectorXd t = x + normal_vector(g, n);
    const Eigen::VectorXd y = (t.array().sin() + x.array()).matrix() + 0.3 * normal_vector(g, n);
    const auto grid = percentile_grid(t, 30);
    const auto base = estimate_adrf(y, t, x, grid);
    for (auto [a, b] : {std::pair{3.0, -7.0}, std::pair{0.01, 100.0}, std::pair{-2.0, 1.0}}) {
        const Eigen::VectorXd t2 = (a * t.array() + b).matrix();
        std::vector<double> grid2;
        for (double v : grid) grid2.push_back(a * v + b);
        if (a < 0) std::reverse(grid2.begin(), grid2.end());
        auto est = estimate_adrf(y, t2, x, grid2);
        if (a < 0) std::reverse(est.mu.begin(), est.mu.end());
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(est.mu[i] - base.mu[i]) <= 1e-8);
    }
    CHECK_THROWS_AS(estimate_adrf(y, t, x, {t.maxCoeff() + 1.0}), DomainError);
}

TEST_CASE("bootstrap: deterministic, validated, shrinking with n") {
    std::mt19937_64 g(43);
    auto make = [&](Eigen::Index n, Eigen::VectorXd& t, Eigen::VectorXd& y, Eigen::MatrixXd& x) {
        x = normal_vector(g, n);
        t = x.col(0) + normal_vector(g, n);
        y = t + 2.0 * x.col(0) + normal_vector(g, n);
    };
    Eigen::VectorXd t, y;
    Eigen::MatrixXd x;
    make(500, t, y, x);
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(-1.0 + 0.1 * i);
    BootstrapOptions opt;
    opt.n_boot = 100;
    opt.seed = 5;
    const auto a = bootstrap_adrf(y, t, x, grid, opt);
    opt.threads = 3;
    const auto b = bootstrap_adrf(y, t, x, grid, opt);
    CHECK(a.se == b.se);
    CHECK(a.mu == b.mu);
    CHECK(a.n_boot == 100);
    opt.seed = 6;
    CHECK(bootstrap_adrf(y, t, x, grid, opt).se != a.se);
    opt.n_boot = 99;
    CHECK_THROWS_AS(bootstrap_adrf(y, t, x, grid, opt), DomainError);

    Eigen::VectorXd t2, y2;
    Eigen::MatrixXd x2;
    make(8000, t2, y2, x2);
    opt.n_boot = 100;
    const auto big = bootstrap_adrf(y2, t2, x2, grid, opt);
    int smaller = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) smaller += big.se[i] < a.se[i] ? 1 : 0;
    CHECK(smaller >= 18);
}

TEST_CASE("phase 3 over scorecards") {
    std::mt19937_64 g(44);
    std::normal_distribution<double> n01;
    std::vector<scoring::TrapScorecard> cards;
    std::vector<TrapSite> sites;
    for (int i = 0; i < 200; ++i) {
        const double imp = n01(g), low = imp + n01(g);
        TrapSite s{"T" + std::to_string(i), 41.0, -87.0, {{"impervious", imp}, {"low_density", low}}};
        scoring::TrapScorecard c;
        c.trap_id = s.trap_id;
        c.score = 0.5 + 0.05 * low + 0.1 * imp + 0.01 * n01(g);
        c.score_prime = 0.5;
        sites.push_back(s);
        cards.push_back(c);
    }
    const auto dag = Dag::parse(kFig4a);
    Phase3Config cfg;
    cfg.exposures = {"low_density", "impervious"};
    cfg.grid_points = 10;
    cfg.bootstrap.n_boot = 100;
    const auto res = run_phase3(cards, sites, dag, cfg);
    REQUIRE(res.size() == 2);
    CHECK(res[0].adjustment_set == std::vector<std::string>{"impervious"});
    CHECK(res[1].adjustment_set.empty());
    REQUIRE(res[0].adrf);
    CHECK(std::abs(oracle::ols_slope(res[0].adrf->grid, res[0].adrf->mu) - 0.05) < 0.01);
    const auto js = summary_json(res, cfg);
    CHECK(js.at("exposures").size() == 2);

    cfg.exposures = {"canopy"};
    CHECK_THROWS_AS(run_phase3(cards, sites, dag, cfg), ConfigError);
    cfg.exposures = {"low_density"};
    auto no_col = sites;
    for (auto& s : no_col) s.covariates.erase("low_density");
    try {
        run_phase3(cards, no_col, dag, cfg);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("low_density") != std::string::npos);
    }

    const auto hidden = Dag::parse("hidden: u\nu -> low_density\nu -> score\nlow_density -> score\n");
    const auto nid = run_phase3(cards, sites, hidden, cfg);
    CHECK(!nid[0].identifiable);
    CHECK(!nid[0].adrf);
}

}  // TEST_SUITE
