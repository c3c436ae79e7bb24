#pragma once

// Causal analysis of trap scores: backdoor adjustment sets from a DAG, a
// linear-Gaussian generalized propensity score, and a doubly robust
// average dose-response function with bootstrap pointwise errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "trapscore/data_model.hpp"
#include "trapscore/diagnostics.hpp"
#include "trapscore/scoring.hpp"

namespace trapscore::causal {

// Text format, one statement per line, '#' starts a comment:
//   from -> to
//   hidden: a, b          (declares unobservable nodes)
//   hidden:u -> x         (prefix form on either endpoint)
//   name                  (isolated node)
class Dag {
public:
    static Dag parse(std::string_view text, const std::string& source = "<dag>");
    static Dag load(const std::filesystem::path& path);

    void add_node(const std::string& name, bool hidden = false);
    void add_edge(const std::string& from, const std::string& to);
    // Throws ValidationError naming a cycle, e.g. "a -> b -> a".
    void check_acyclic() const;

    const std::vector<std::string>& nodes() const noexcept { return names_; }
    bool has_node(std::string_view name) const;
    bool is_hidden(std::string_view name) const;
    std::size_t size() const noexcept { return names_.size(); }
    int index(std::string_view name) const;  // throws DomainError for unknown nodes
    const std::vector<int>& children(int v) const { return children_[static_cast<std::size_t>(v)]; }
    const std::vector<int>& parents(int v) const { return parents_[static_cast<std::size_t>(v)]; }
    const std::string& name(int v) const { return names_[static_cast<std::size_t>(v)]; }

    std::set<int> ancestors(const std::set<int>& of) const;    // includes `of`
    std::set<int> descendants(const std::set<int>& of) const;  // includes `of`

private:
    std::vector<std::string> names_;
    std::vector<bool> hidden_;
    std::map<std::string, int, std::less<>> index_;
    std::vector<std::vector<int>> children_, parents_;
};

// d-separation of xs and ys given zs (moralized ancestral graph).
bool d_separated(const Dag& dag, const std::set<int>& xs, const std::set<int>& ys, const std::set<int>& zs);

// z contains no descendant of x and blocks every path from x to y that starts
// with an edge into x.
bool satisfies_backdoor(const Dag& dag, int x, int y, const std::set<int>& z);

struct AdjustmentSets {
    bool identifiable = false;
    // Minimal sets ordered by size, then lexicographically.
    std::vector<std::vector<std::string>> sets;
};

// Minimal observed backdoor sets for exposure -> outcome. Hidden nodes never appear.
AdjustmentSets backdoor_adjustment_sets(const Dag& dag, std::string_view exposure, std::string_view outcome);

// Type-7 sample quantile.
double quantile(std::vector<double> values, double q);

struct GpsModel {
    Eigen::VectorXd beta;  // first entry is the intercept
    double sigma2 = 0.0;

    Eigen::VectorXd mean(const Eigen::MatrixXd& design) const { return design * beta; }
    double density(double t, double mean) const;
};

// OLS of treatment on the design (intercept column included by the caller).
GpsModel fit_gps(const Eigen::VectorXd& treatment, const Eigen::MatrixXd& design,
                 const std::vector<std::string>& column_names = {});

// Cubic B-spline basis with clamped boundary knots at lo, hi and the given
// interior knots.
class BSplineBasis {
public:
    BSplineBasis(double lo, double hi, std::vector<double> interior);
    static BSplineBasis at_quantiles(const Eigen::VectorXd& x, int interior_knots);

    std::size_t size() const noexcept { return knots_.size() - 4; }
    void evaluate(double x, double* out) const;  // size() values
    Eigen::MatrixXd matrix(const Eigen::VectorXd& x) const;

private:
    std::vector<double> knots_;
};

struct AdrfOptions {
    int interior_knots = 5;
};

struct AdrfEstimate {
    std::vector<double> grid;
    std::vector<double> mu;
    std::vector<double> se;  // empty unless bootstrapped
    int n_boot = 0;
};

// covariates: n x q adjustment covariates without an intercept column (q may be 0).
AdrfEstimate estimate_adrf(const Eigen::VectorXd& outcome, const Eigen::VectorXd& treatment,
                           const Eigen::MatrixXd& covariates, const std::vector<double>& grid,
                           const AdrfOptions& options = {});

struct BootstrapOptions {
    int n_boot = 500;
    std::uint64_t seed = 1;
    int threads = 1;
    AdrfOptions adrf;
};

AdrfEstimate bootstrap_adrf(const Eigen::VectorXd& outcome, const Eigen::VectorXd& treatment,
                            const Eigen::MatrixXd& covariates, const std::vector<double>& grid,
                            const BootstrapOptions& options);

std::vector<double> percentile_grid(const Eigen::VectorXd& treatment, int points, double lower_q = 0.05,
                                    double upper_q = 0.95);

enum class Outcome { score, score_prime };

struct Phase3Config {
    std::vector<std::string> exposures;
    std::string outcome_node = "score";
    Outcome outcome = Outcome::score;
    int grid_points = 50;
    double lower_q = 0.05;
    double upper_q = 0.95;
    BootstrapOptions bootstrap;
    WarningSink warnings;
};

struct ExposureResult {
    std::string exposure;
    bool identifiable = false;
    std::vector<std::vector<std::string>> minimal_sets;
    std::vector<std::string> adjustment_set;
    std::size_t n_units = 0;
    std::optional<AdrfEstimate> adrf;
};

std::vector<ExposureResult> run_phase3(const std::vector<scoring::TrapScorecard>& cards,
                                       const std::vector<TrapSite>& sites, const Dag& dag,
                                       const Phase3Config& config);

// exposure,x,mu,se
void write_adrf_csv(const std::filesystem::path& path, const ExposureResult& result);
nlohmann::json summary_json(const std::vector<ExposureResult>& results, const Phase3Config& config);

}  // namespace trapscore::causal
