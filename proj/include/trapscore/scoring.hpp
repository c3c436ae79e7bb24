#pragma once

// Trap scores from cross-validated confusion statistics.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trapscore/data_model.hpp"
#include "trapscore/evaluation.hpp"

namespace trapscore::scoring {

inline constexpr double kDefaultM = 0.9;
inline constexpr int kHistogramBins = 20;

// Traps whose average sensitivity is defined.
std::set<std::string> select_tstar(const std::map<std::string, eval::TrapConfusion>& confusions);

// (m * spec + sens) / (m + 1)
double score(std::optional<double> avg_sens, double avg_spec, double m);
// Specificity-only score, usable for every trap with a defined specificity.
double specificity_score(std::optional<double> avg_spec);

struct TrapScorecard {
    std::string trap_id;
    std::optional<double> avg_sens;
    std::optional<double> avg_spec;
    std::optional<double> score;        // traps in T* only
    std::optional<double> score_prime;  // traps with a defined specificity
    double m = kDefaultM;
    bool in_tstar = false;
};

struct Summary {
    std::size_t count = 0;
    double mean = 0.0, min = 0.0, max = 0.0;
    std::vector<int> histogram;  // kHistogramBins equal-width bins on [0, 1]
};

Summary summarize(const std::vector<double>& values);

struct ScoreReport {
    double m = kDefaultM;
    std::vector<TrapScorecard> cards;  // sorted by trap_id
    std::optional<Summary> score_summary;  // absent when T* is empty
    std::optional<Summary> score_prime_summary;
};

ScoreReport score_report(const std::map<std::string, eval::TrapConfusion>& confusions, double m);

// trap_id,latitude,longitude,avg_sens,avg_spec,score,score_prime,in_tstar
void write_scores_csv(const std::filesystem::path& path, const ScoreReport& report,
                      const std::vector<TrapSite>& sites);
std::vector<TrapScorecard> read_scores_csv(const std::filesystem::path& path);

}  // namespace trapscore::scoring
