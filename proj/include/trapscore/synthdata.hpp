#pragma once

// Synthetic surveillance worlds with known parameters. Every latent quantity
// the generator draws is kept in GroundTruth so fits can be checked against it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trapscore/data_model.hpp"
#include "trapscore/glmm.hpp"
#include "trapscore/matern.hpp"

namespace trapscore::synth {

struct Region {
    double lat_min = 41.4, lat_max = 42.2;
    double lon_min = -88.4, lon_max = -87.4;
};

enum class Distribution { uniform, normal, lognormal };
// How a site covariate moves trap quality.
//   plateau: weight * min(max(x, 0) / scale, 1)
//   linear:  weight * x / scale
enum class Effect { none, plateau, linear };

struct CovariateSpec {
    std::string name;
    Distribution distribution = Distribution::uniform;
    double a = 0.0;  // uniform: low, normal: mean, lognormal: log-mean
    double b = 1.0;  // uniform: high, normal: sd, lognormal: log-sd
    Effect effect = Effect::none;
    double effect_weight = 0.0;
    double effect_scale = 1.0;
    // Optional causal parent among earlier covariates: x += parent_coef * parent.
    std::optional<std::string> parent;
    double parent_coef = 0.0;
    // Values are clipped at this floor after sampling (e.g. counts).
    std::optional<double> floor;
};

struct WorldConfig {
    int n_traps = 100;
    Region region;
    std::vector<int> years{2014, 2015, 2016, 2017};
    int weeks_per_year = 5;
    int first_week = 22;
    // Collection weeks are spaced so that response windows never overlap.
    int week_spacing = 3;
    int max_pools_per_week = 1;
    double min_separation_km = 3.2;
    double case_jitter_km = 0.5;
    glmm::GlmmCoefficients true_beta = default_beta();
    MaternParams true_matern{0.5, 5.0, 1.0, 1e-6};
    std::vector<CovariateSpec> covariate_specs;
    // Trap quality q = clamp(quality_base + sum of covariate effects, 0, 1);
    // a recorded test result is replaced by an independent draw with probability 1 - q.
    double quality_base = 1.0;
    // Per-mosquito infection: logit = infection_logit + infection_field_coef * b.
    double infection_logit = -4.6;
    double infection_field_coef = 0.5;
    double count_mean = 150.0;
    double count_dispersion = 2.0;
    std::uint64_t seed = 1;

    // Intercept placed so that logit p = base at the middle year.
    static glmm::GlmmCoefficients default_beta(double base = -2.5, double mid_year = 2015.5);
    // Throws ConfigError describing the first invalid field.
    void validate() const;
};

struct TrapTruth {
    std::string trap_id;
    double field = 0.0;    // b
    double quality = 1.0;  // q
};

struct PoolTruth {
    bool true_test = false;  // before quality corruption
    double eta = 0.0;
    double prob = 0.0;
    bool draw = false;  // Bernoulli draw of this pool
    bool label = false; // OR of the draws of its trap-week
};

struct GroundTruth {
    WorldConfig config;
    std::vector<TrapTruth> traps;
    std::vector<PoolTruth> pools;  // parallel to Dataset::pools
};

struct World {
    Dataset dataset;  // recorded data: risk annotated, responses labeled
    GroundTruth truth;
};

World generate_world(const WorldConfig& config);

nlohmann::json to_json(const GroundTruth& truth);

// Writes pools.csv, sites.csv, cases.csv and ground_truth.json into dir.
void write_world(const std::filesystem::path& dir, const World& world);

// Worlds used by the bundled fixture, the acceptance suite and `simulate`.
WorldConfig recovery_world(std::uint64_t seed);  // 100 traps x 4 years x 5 weeks
WorldConfig quality_world(std::uint64_t seed);   // population raises trap quality up to a plateau

}  // namespace trapscore::synth
