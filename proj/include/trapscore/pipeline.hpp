#pragma once

// End-to-end commands behind the CLI. Each reads its inputs, writes its
// artifacts into RunConfig::out and logs progress to the given stream.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "trapscore/evaluation.hpp"
#include "trapscore/glmm.hpp"
#include "trapscore/pooled.hpp"
#include "trapscore/synthdata.hpp"

namespace trapscore::pipeline {

struct RunConfig {
    std::filesystem::path data = ".";  // directory holding the default input files
    std::optional<std::filesystem::path> pools, sites, cases, dag;
    std::filesystem::path out = "out";
    double m = 0.9;
    std::uint64_t seed = 1;
    glmm::NuMode nu_mode = glmm::NuMode::fixed;
    double nu = 0.5;
    pooled::Grouping grouping = pooled::Grouping::trap_week;
    eval::ThresholdSplit threshold_split = eval::ThresholdSplit::test;
    eval::ThresholdScope threshold_scope = eval::ThresholdScope::per_fold;
    bool skip_invalid = false;
    bool random_effect = true;
    double radius_km = 1.5;
    int lead_weeks = 2;
    int n_boot = 500;
    int grid_points = 50;
    std::vector<std::string> exposures;  // empty: every measured DAG node
    std::string outcome = "score";        // score | score_prime
    int threads = 1;
    std::string world = "fixture";        // simulate: fixture | quality | recovery
    std::optional<int> n_traps;

    std::filesystem::path pools_path() const { return pools.value_or(data / "pools.csv"); }
    std::filesystem::path sites_path() const { return sites.value_or(data / "sites.csv"); }
    std::filesystem::path cases_path() const { return cases.value_or(data / "cases.csv"); }
    std::filesystem::path dag_path() const { return dag.value_or(data / "dag.txt"); }

    // Throws ConfigError on the first invalid field.
    void validate() const;
};

// Setting names accepted by apply_setting (and as --flags / config-file keys).
const std::vector<std::string>& setting_names();
// Applies one key=value setting; '_' and '-' are interchangeable in keys.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
// Flat "key = value" file; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

synth::WorldConfig world_config(const RunConfig& config);

void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_phase1(const RunConfig& config, std::ostream& log);
void cmd_phase2(const RunConfig& config, std::ostream& log);
void cmd_phase3(const RunConfig& config, std::ostream& log);
void cmd_all(const RunConfig& config, std::ostream& log);

// The causal structure the synthetic quality worlds are generated from.
std::string synthetic_dag_text();

}  // namespace trapscore::pipeline
