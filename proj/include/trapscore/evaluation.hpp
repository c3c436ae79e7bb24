#pragma once

// Per-year 5-fold cross-validation, ROC curves, weighted optimal thresholds and
// per-trap confusion statistics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trapscore/data_model.hpp"
#include "trapscore/diagnostics.hpp"
#include "trapscore/glmm.hpp"

namespace trapscore::eval {

inline constexpr int kNumFolds = 5;

struct FoldAssignment {
    std::vector<int> fold;  // per pool, 0..4
    std::uint64_t seed = 0;
};

// Within each year the pools are shuffled and dealt round-robin into the folds.
FoldAssignment make_folds(const Dataset& dataset, std::uint64_t seed, const WarningSink& warnings = {});

struct RocCurve {
    std::vector<double> thresholds;  // ascending, starts at 0 and ends at 1
    std::vector<double> tpr;
    std::vector<double> fpr;
};

// Predicted positive means prob > threshold. Needs both classes.
RocCurve roc_curve(const std::vector<bool>& labels, const std::vector<double>& probs);

// Index of argmax TPR - m FPR; ties go to the smaller threshold.
std::size_t optimal_index(const RocCurve& roc, double m);
double optimal_threshold(const RocCurve& roc, double m);

enum class ThresholdSplit { test, train };
enum class ThresholdScope { per_fold, global };

struct CvConfig {
    glmm::FitConfig fit;
    double m = 0.9;
    std::uint64_t seed = 1;
    ThresholdSplit split = ThresholdSplit::test;
    ThresholdScope scope = ThresholdScope::per_fold;
    int threads = 1;
    WarningSink warnings;
};

struct TrapConfusion {
    std::string trap_id;
    std::array<int, kNumFolds> tp{}, fn{}, tn{}, fp{};
    std::optional<double> avg_sens;
    std::optional<double> avg_spec;
    int n_pos = 0;  // test-set positives over all folds
    int n_neg = 0;
};

struct FoldReport {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double threshold = 0.5;
    bool threshold_from_train = false;
    RocCurve roc;  // the curve the threshold was read from
    glmm::FitDiagnostics diagnostics;
    double sigma2 = 0.0;
    double rho = 0.0;
    double nu = 0.0;
};

struct CvResult {
    FoldAssignment folds;
    std::map<std::string, TrapConfusion> traps;
    std::vector<FoldReport> reports;
    std::vector<double> test_prob;  // out-of-fold prediction per pool
};

// Dataset must carry risk and response. Fit failures abort with the fold index.
CvResult cross_validate(const Dataset& dataset, const CvConfig& config);

// Accumulates confusion counts and averages from out-of-fold predictions.
std::map<std::string, TrapConfusion> trap_confusions(const Dataset& dataset, const FoldAssignment& folds,
                                                     const std::vector<double>& test_prob,
                                                     const std::array<double, kNumFolds>& thresholds);

void write_confusion_csv(const std::filesystem::path& path, const std::map<std::string, TrapConfusion>& traps);
// Columns fold,threshold,fpr,tpr; one block per fold report.
void write_roc_csv(const std::filesystem::path& path, const std::vector<FoldReport>& reports);
std::map<std::string, TrapConfusion> read_confusion_csv(const std::filesystem::path& path);

}  // namespace trapscore::eval
