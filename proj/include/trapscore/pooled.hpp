#pragma once

#include <vector>

#include "trapscore/data_model.hpp"
#include "trapscore/diagnostics.hpp"

namespace trapscore::pooled {

// Test results of a set of pools that share one underlying per-mosquito
// infection prevalence.
struct PoolGroup {
    std::vector<int> pool_sizes;
    std::vector<bool> positives;
};

struct MleResult {
    double prevalence = 0.0;
    // Every pool tested positive: the likelihood increases monotonically in p
    // and the estimate is pinned at 1.
    bool all_positive = false;
    int iterations = 0;
};

// Maximum likelihood per-mosquito prevalence from pooled pass/fail tests.
MleResult mle_prevalence_detail(const PoolGroup& group);
double mle_prevalence(const PoolGroup& group);

// Derivative of the pooled log-likelihood in p, for p in (0, 1).
double score_function(const PoolGroup& group, double p);

// Vector Index risk: avg_abundance * pools_on_day * mle / 1000.
double vector_index(double avg_abundance, int pools_on_day, double mle);

enum class Grouping { trap_week, trap_day };

// Fills every pool's `risk` from the MLE of its (trap, year, week[, day]) group.
Dataset annotate_risk(Dataset dataset, Grouping grouping = Grouping::trap_week,
                      const WarningSink& warnings = {});

}  // namespace trapscore::pooled
