#include "trapscore/pooled.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "trapscore/error.hpp"

namespace trapscore::pooled {
namespace {

constexpr double kTolerance = 1e-10;
constexpr int kMaxIterations = 200;

}  // namespace

double score_function(const PoolGroup& group, double p) {
    const double log_q = std::log1p(-p);
    double s = 0.0;
    for (std::size_t i = 0; i < group.pool_sizes.size(); ++i) {
        const double n = group.pool_sizes[i];
        if (group.positives[i]) {
            // n (1-p)^(n-1) / (1 - (1-p)^n)
            const double qn1 = std::exp((n - 1.0) * log_q);
            s += n * qn1 / -std::expm1(n * log_q);
        } else {
            s -= n / (1.0 - p);
        }
    }
    return s;
}

MleResult mle_prevalence_detail(const PoolGroup& group) {
    if (group.pool_sizes.empty() || group.pool_sizes.size() != group.positives.size())
        throw DomainError("pool group must be non-empty with one result per pool");
    for (int n : group.pool_sizes)
        if (n < 1) throw DomainError("pool sizes must be positive");

    std::size_t n_pos = 0;
    for (bool b : group.positives) n_pos += b ? 1 : 0;
    if (n_pos == 0) return {0.0, false, 0};
    if (n_pos == group.positives.size()) return {1.0, true, 0};

    // The log-likelihood is strictly concave with score +inf at 0 and -inf at 1.
    double lo = 0.0, hi = 1.0;
    int it = 0;
    while (hi - lo > kTolerance && it < kMaxIterations) {
        const double mid = 0.5 * (lo + hi);
        if (score_function(group, mid) > 0.0)
            lo = mid;
        else
            hi = mid;
        ++it;
    }
    return {0.5 * (lo + hi), false, it};
}

double mle_prevalence(const PoolGroup& group) { return mle_prevalence_detail(group).prevalence; }

double vector_index(double avg_abundance, int pools_on_day, double mle) {
    if (avg_abundance < 0.0) throw DomainError("avg_abundance must be >= 0");
    if (pools_on_day < 1) throw DomainError("pools_on_day must be >= 1");
    if (mle < 0.0 || mle > 1.0) throw DomainError("mle must lie in [0, 1]");
    return avg_abundance * pools_on_day * mle / 1000.0;
}

Dataset annotate_risk(Dataset dataset, Grouping grouping, const WarningSink& warnings) {
    using WeekKey = std::tuple<std::string, int, int>;
    using GroupKey = std::tuple<std::string, int, int, int>;

    std::map<WeekKey, std::pair<int, int>> weekly;  // count, pools_in_week
    std::map<GroupKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dataset.pools.size(); ++i) {
        const auto& p = dataset.pools[i];
        const WeekKey wk{p.trap_id, p.year, p.week};
        const auto [it, inserted] = weekly.try_emplace(wk, p.mosquito_count_week, p.pools_in_week);
        if (!inserted && (it->second.first != p.mosquito_count_week || it->second.second != p.pools_in_week)) {
            throw ValidationError("inconsistent weekly counts for trap " + p.trap_id + " year " +
                                  std::to_string(p.year) + " week " + std::to_string(p.week) +
                                  ": mosquito_count_week/pools_in_week differ between pools");
        }
        const int day = grouping == Grouping::trap_day ? p.day_of_week : -1;
        groups[{p.trap_id, p.year, p.week, day}].push_back(i);
    }

    std::size_t n_all_positive = 0;
    std::string first_all_positive;
    for (const auto& [key, members] : groups) {
        PoolGroup g;
        for (auto i : members) {
            g.pool_sizes.push_back(dataset.pools[i].pool_size);
            g.positives.push_back(dataset.pools[i].test_positive);
        }
        const auto mle = mle_prevalence_detail(g);
        if (mle.all_positive && n_all_positive++ == 0) {
            first_all_positive = "trap " + std::get<0>(key) + " year " + std::to_string(std::get<1>(key)) +
                                 " week " + std::to_string(std::get<2>(key));
        }
        for (auto i : members) {
            auto& p = dataset.pools[i];
            const double avg = static_cast<double>(p.mosquito_count_week) / p.pools_in_week;
            p.risk = vector_index(avg, p.pools_on_day, mle.prevalence);
        }
    }
    if (n_all_positive > 0) {
        warn(warnings, "all pools positive in " + std::to_string(n_all_positive) + " of " +
                           std::to_string(groups.size()) + " pool groups (first: " + first_all_positive +
                           "); prevalence pinned at 1");
    }
    return dataset;
}

}  // namespace trapscore::pooled
