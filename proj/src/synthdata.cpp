#include "trapscore/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/geo.hpp"
#include "trapscore/pooled.hpp"
#include "trapscore/random.hpp"

namespace trapscore::synth {
namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string trap_name(int i, int n) {
    std::string digits = std::to_string(i + 1);
    const std::size_t width = std::to_string(n).size();
    return "T" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

double sample(const CovariateSpec& s, std::mt19937_64& g) {
    switch (s.distribution) {
    case Distribution::uniform:
        return s.a + (s.b - s.a) * rng::uniform01(g);
    case Distribution::normal:
        return std::normal_distribution<double>(s.a, s.b)(g);
    case Distribution::lognormal:
        return std::lognormal_distribution<double>(s.a, s.b)(g);
    }
    return 0.0;
}

double effect_of(const CovariateSpec& s, double x) {
    switch (s.effect) {
    case Effect::none: return 0.0;
    case Effect::plateau: return s.effect_weight * std::min(std::max(x, 0.0) / s.effect_scale, 1.0);
    case Effect::linear: return s.effect_weight * x / s.effect_scale;
    }
    return 0.0;
}

// Point uniformly distributed in a disc of radius r_km around c.
geo::LatLon jitter(geo::LatLon c, double r_km, std::mt19937_64& g) {
    const double r = r_km * std::sqrt(rng::uniform01(g));
    const double theta = 2.0 * std::numbers::pi * rng::uniform01(g);
    const double dlat = r * std::cos(theta) / geo::kEarthRadiusKm * 180.0 / std::numbers::pi;
    const double dlon = r * std::sin(theta) /
                        (geo::kEarthRadiusKm * std::cos(c.lat * std::numbers::pi / 180.0)) * 180.0 /
                        std::numbers::pi;
    return {c.lat + dlat, c.lon + dlon};
}

const char* name_of(Distribution d) {
    switch (d) {
    case Distribution::uniform: return "uniform";
    case Distribution::normal: return "normal";
    case Distribution::lognormal: return "lognormal";
    }
    return "";
}

const char* name_of(Effect e) {
    switch (e) {
    case Effect::none: return "none";
    case Effect::plateau: return "plateau";
    case Effect::linear: return "linear";
    }
    return "";
}

}  // namespace

glmm::GlmmCoefficients WorldConfig::default_beta(double base, double mid_year) {
    glmm::GlmmCoefficients b;
    b[1] = 0.02;  // pool size
    b[2] = 1.5;   // test indicator
    b[3] = 1.0;   // risk
    b[4] = 0.05;  // week
    b[5] = 0.15;  // year
    b[0] = base - b[5] * mid_year;
    return b;
}

void WorldConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("world config: " + m); };
    if (n_traps < 2) fail("n_traps must be >= 2 (got " + std::to_string(n_traps) + ")");
    if (years.empty()) fail("years must not be empty");
    if (weeks_per_year < 1) fail("weeks_per_year must be >= 1");
    if (week_spacing < 1) fail("week_spacing must be >= 1");
    if (first_week < 1 || first_week + (weeks_per_year - 1) * week_spacing + 2 > 52)
        fail("collection weeks and their two-week response windows must fit inside weeks 1..52");
    if (max_pools_per_week < 1) fail("max_pools_per_week must be >= 1");
    if (!(region.lat_min < region.lat_max) || !(region.lon_min < region.lon_max)) fail("empty region");
    if (!(min_separation_km >= 0.0)) fail("min_separation_km must be >= 0");
    if (!(case_jitter_km >= 0.0)) fail("case_jitter_km must be >= 0");
    if (!(true_matern.sigma2 >= 0.0) || !(true_matern.rho > 0.0) || !(true_matern.nu > 0.0) ||
        !(true_matern.nugget >= 0.0))
        fail("true_matern needs sigma2 >= 0, nugget >= 0, rho > 0, nu > 0");
    if (!(count_mean > 0.0) || !(count_dispersion > 0.0)) fail("count_mean and count_dispersion must be > 0");
    for (std::size_t i = 0; i < covariate_specs.size(); ++i) {
        const auto& s = covariate_specs[i];
        if (s.name.empty()) fail("covariate with empty name");
        if (s.distribution != Distribution::uniform && !(s.b >= 0.0))
            fail("covariate '" + s.name + "' has negative spread");
        if (s.effect != Effect::none && !(s.effect_scale > 0.0))
            fail("covariate '" + s.name + "' needs effect_scale > 0");
        if (s.parent) {
            const bool earlier = std::any_of(covariate_specs.begin(), covariate_specs.begin() + static_cast<long>(i),
                                             [&](const CovariateSpec& o) { return o.name == *s.parent; });
            if (!earlier) fail("covariate '" + s.name + "' names parent '" + *s.parent + "' which is not defined before it");
        }
    }
}

World generate_world(const WorldConfig& cfg) {
    cfg.validate();
    std::mt19937_64 g(rng::splitmix64(cfg.seed));
    World world;
    world.truth.config = cfg;
    auto& ds = world.dataset;

    // Trap placement: uniform in the region, rejecting points closer than the
    // minimum separation to an accepted trap. A long run of rejections means
    // the region is saturated.
    std::vector<geo::LatLon> locs;
    constexpr int kMaxConsecutiveRejections = 20000;
    for (int rejected = 0; static_cast<int>(locs.size()) < cfg.n_traps;) {
        if (rejected >= kMaxConsecutiveRejections)
            throw ConfigError("world config: cannot place " + std::to_string(cfg.n_traps) + " traps " +
                              csv::format_double(cfg.min_separation_km) +
                              " km apart in the region; reduce n_traps or min_separation_km");
        const geo::LatLon p{cfg.region.lat_min + (cfg.region.lat_max - cfg.region.lat_min) * rng::uniform01(g),
                            cfg.region.lon_min + (cfg.region.lon_max - cfg.region.lon_min) * rng::uniform01(g)};
        bool ok = true;
        for (const auto& q : locs)
            if (geo::haversine_km(p, q) < cfg.min_separation_km) {
                ok = false;
                break;
            }
        if (ok) {
            locs.push_back(p);
            rejected = 0;
        } else {
            ++rejected;
        }
    }

    for (const auto& s : cfg.covariate_specs) ds.covariate_names.push_back(s.name);
    for (int t = 0; t < cfg.n_traps; ++t) {
        TrapSite site;
        site.trap_id = trap_name(t, cfg.n_traps);
        site.latitude = locs[static_cast<std::size_t>(t)].lat;
        site.longitude = locs[static_cast<std::size_t>(t)].lon;
        double q = cfg.quality_base;
        for (const auto& spec : cfg.covariate_specs) {
            double x = sample(spec, g);
            if (spec.parent) x += spec.parent_coef * site.covariates.at(*spec.parent);
            if (spec.floor) x = std::max(x, *spec.floor);
            site.covariates[spec.name] = x;
            q += effect_of(spec, x);
        }
        ds.sites.push_back(site);
        world.truth.traps.push_back({site.trap_id, 0.0, std::clamp(q, 0.0, 1.0)});
    }

    // Gaussian random field over trap locations.
    if (cfg.true_matern.sigma2 > 0.0) {
        SpatialCovariance cov;
        try {
            cov = build_correlation_matrix(locs, cfg.true_matern);
        } catch (const ConditioningError& e) {
            throw ConfigError(std::string("world config: covariance Cholesky failed (") + e.what() +
                              "); use a larger nugget");
        }
        Eigen::VectorXd z(cfg.n_traps);
        std::normal_distribution<double> normal;
        for (int i = 0; i < cfg.n_traps; ++i) z(i) = normal(g);
        const Eigen::VectorXd b = cov.cholesky.matrixL() * z;
        for (int i = 0; i < cfg.n_traps; ++i) world.truth.traps[static_cast<std::size_t>(i)].field = b(i);
    }

    // Pools with their true test results.
    const double nb_p = cfg.count_dispersion / (cfg.count_dispersion + cfg.count_mean);
    std::negative_binomial_distribution<int> counts(static_cast<int>(std::max(1.0, std::round(cfg.count_dispersion))), nb_p);
    std::vector<bool> corrupt_draw;
    std::vector<bool> random_test;
    for (int year : cfg.years)
        for (int k = 0; k < cfg.weeks_per_year; ++k) {
            const int week = cfg.first_week + k * cfg.week_spacing;
            for (int t = 0; t < cfg.n_traps; ++t) {
                const auto& truth = world.truth.traps[static_cast<std::size_t>(t)];
                const int n_pools = 1 + static_cast<int>(rng::uniform_index(g, static_cast<std::uint64_t>(cfg.max_pools_per_week)));
                const double infection = logistic(cfg.infection_logit + cfg.infection_field_coef * truth.field);
                std::vector<PoolObservation> week_pools;
                int total = 0;
                for (int j = 0; j < n_pools; ++j) {
                    PoolObservation p;
                    p.trap_id = ds.sites[static_cast<std::size_t>(t)].trap_id;
                    p.year = year;
                    p.week = week;
                    p.day_of_week = static_cast<int>(rng::uniform_index(g, 7));
                    p.pool_size = 10 + static_cast<int>(rng::uniform_index(g, 41));
                    const double p_pos = 1.0 - std::pow(1.0 - infection, p.pool_size);
                    p.test_positive = rng::uniform01(g) < p_pos;
                    // Recorded result: kept with probability q, else an independent draw.
                    const bool corrupt = rng::uniform01(g) >= truth.quality;
                    const bool other = rng::uniform01(g) < p_pos;
                    corrupt_draw.push_back(corrupt);
                    random_test.push_back(other);
                    total += p.pool_size;
                    week_pools.push_back(p);
                }
                const int count = std::max(total, counts(g));
                for (auto& p : week_pools) {
                    p.mosquito_count_week = count;
                    p.pools_in_week = n_pools;
                    p.pools_on_day = static_cast<int>(std::count_if(
                        week_pools.begin(), week_pools.end(),
                        [&](const PoolObservation& o) { return o.day_of_week == p.day_of_week; }));
                    ds.pools.push_back(p);
                }
            }
        }

    // Responses from the logistic model at the true covariates.
    ds = pooled::annotate_risk(std::move(ds), pooled::Grouping::trap_week);
    const auto lookup = ds.site_lookup();
    std::map<std::tuple<std::string, int, int>, bool> week_label;
    for (const auto& p : ds.pools) {
        const auto& tt = world.truth.traps[lookup.at(p.trap_id)];
        const auto x = glmm::raw_covariates(p);
        double eta = cfg.true_beta[0] + tt.field;
        for (std::size_t j = 0; j < x.size(); ++j) eta += cfg.true_beta[j + 1] * x[j];
        PoolTruth pt;
        pt.true_test = p.test_positive;
        pt.eta = eta;
        pt.prob = logistic(eta);
        pt.draw = rng::uniform01(g) < pt.prob;
        world.truth.pools.push_back(pt);
        week_label[{p.trap_id, p.year, p.week}] = week_label[{p.trap_id, p.year, p.week}] || pt.draw;
    }

    // One case near the trap in the response window of each positive trap-week.
    for (const auto& [key, positive] : week_label) {
        if (!positive) continue;
        const auto& site = ds.sites[lookup.at(std::get<0>(key))];
        const auto where = jitter(site.location(), cfg.case_jitter_km, g);
        HumanCase c;
        c.latitude = where.lat;
        c.longitude = where.lon;
        c.year = std::get<1>(key);
        c.week = std::get<2>(key) + 1 + static_cast<int>(rng::uniform_index(g, 2));
        ds.cases.push_back(c);
    }

    for (std::size_t i = 0; i < ds.pools.size(); ++i) {
        auto& p = ds.pools[i];
        auto& pt = world.truth.pools[i];
        pt.label = week_label.at({p.trap_id, p.year, p.week});
        p.response = pt.label;
        if (corrupt_draw[i]) p.test_positive = random_test[i];
    }
    ds = pooled::annotate_risk(std::move(ds), pooled::Grouping::trap_week);
    return world;
}

nlohmann::json to_json(const GroundTruth& t) {
    using nlohmann::json;
    const auto& c = t.config;
    json specs = json::array();
    for (const auto& s : c.covariate_specs) {
        json js = {{"name", s.name},
                   {"distribution", name_of(s.distribution)},
                   {"a", s.a},
                   {"b", s.b},
                   {"effect", name_of(s.effect)},
                   {"effect_weight", s.effect_weight},
                   {"effect_scale", s.effect_scale}};
        if (s.parent) {
            js["parent"] = *s.parent;
            js["parent_coef"] = s.parent_coef;
        }
        if (s.floor) js["floor"] = *s.floor;
        specs.push_back(js);
    }
    json beta = json::object();
    for (std::size_t i = 0; i < glmm::kNumCoefficients; ++i)
        beta[std::string(glmm::kCoefficientNames[i])] = c.true_beta[i];
    json traps = json::array();
    for (const auto& tr : t.traps)
        traps.push_back({{"trap_id", tr.trap_id}, {"field", tr.field}, {"quality", tr.quality}});
    json pools = json::array();
    for (const auto& p : t.pools)
        pools.push_back({{"true_test", p.true_test}, {"eta", p.eta}, {"prob", p.prob}, {"draw", p.draw},
                         {"label", p.label}});
    return {{"format", "trapscore.ground_truth"},
            {"version", 1},
            {"config",
             {{"n_traps", c.n_traps},
              {"region", {c.region.lat_min, c.region.lat_max, c.region.lon_min, c.region.lon_max}},
              {"years", c.years},
              {"weeks_per_year", c.weeks_per_year},
              {"first_week", c.first_week},
              {"week_spacing", c.week_spacing},
              {"max_pools_per_week", c.max_pools_per_week},
              {"min_separation_km", c.min_separation_km},
              {"case_jitter_km", c.case_jitter_km},
              {"true_beta", beta},
              {"true_matern",
               {{"nu", c.true_matern.nu}, {"rho_km", c.true_matern.rho}, {"sigma2", c.true_matern.sigma2},
                {"nugget", c.true_matern.nugget}}},
              {"covariate_specs", specs},
              {"quality_base", c.quality_base},
              {"infection_logit", c.infection_logit},
              {"infection_field_coef", c.infection_field_coef},
              {"count_mean", c.count_mean},
              {"count_dispersion", c.count_dispersion},
              {"seed", c.seed}}},
            {"traps", traps},
            {"pools", pools}};
}

void write_world(const std::filesystem::path& dir, const World& world) {
    std::filesystem::create_directories(dir);
    write_pools_csv(dir / "pools.csv", world.dataset);
    write_sites_csv(dir / "sites.csv", world.dataset);
    write_cases_csv(dir / "cases.csv", world.dataset);
    std::ofstream out(dir / "ground_truth.json", std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / "ground_truth.json").string());
    out << to_json(world.truth).dump(2) << '\n';
}

WorldConfig recovery_world(std::uint64_t seed) {
    WorldConfig c;
    c.seed = seed;
    return c;
}

WorldConfig quality_world(std::uint64_t seed) {
    WorldConfig c;
    c.seed = seed;
    c.n_traps = 300;
    c.weeks_per_year = 8;
    c.true_beta[2] = 4.0;
    c.true_beta[0] = -3.5 - c.true_beta[5] * 2015.5;
    c.true_matern.sigma2 = 0.25;
    c.quality_base = 0.1;
    const CovariateSpec impervious{.name = "impervious", .a = 0.0, .b = 60.0};
    const CovariateSpec population{.name = "population",
                                   .a = 0.0,
                                   .b = 14000.0,
                                   .effect = Effect::plateau,
                                   .effect_weight = 0.9,
                                   .effect_scale = 10000.0,
                                   .parent = "impervious",
                                   .parent_coef = 100.0};
    const CovariateSpec canopy{.name = "canopy", .a = 0.0, .b = 80.0};
    c.covariate_specs = {impervious, population, canopy};
    return c;
}

}  // namespace trapscore::synth
