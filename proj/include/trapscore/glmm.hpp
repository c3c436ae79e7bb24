#pragma once

// Binomial spatial mixed model
//
//   logit p = b0 + b1 PoolSize + b2 TestInd + b3 Risk + b4 Week + b5 Year + b(site)
//   b ~ N(0, sigma2 * C(d / rho) + nugget I),  C = Matérn(nu)
//
// fitted by maximizing the Laplace approximation of the marginal likelihood.
// Random effects live on unique trap locations. Covariates are standardized
// internally (Year is centred on its median); reported coefficients are on the
// original scale.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "trapscore/data_model.hpp"
#include "trapscore/geo.hpp"
#include "trapscore/matern.hpp"

namespace trapscore::glmm {

inline constexpr int kNumCoefficients = 6;
inline constexpr int kNumCovariates = 5;
inline constexpr std::array<std::string_view, kNumCoefficients> kCoefficientNames{
    "intercept", "pool_size", "test_ind", "risk", "week", "year"};
inline constexpr int kFormatVersion = 1;

struct GlmmCoefficients {
    std::array<double, kNumCoefficients> beta{};

    double& operator[](std::size_t i) { return beta[i]; }
    double operator[](std::size_t i) const { return beta[i]; }
};

// pool_size, test_ind, risk, week, year
std::array<double, kNumCovariates> raw_covariates(const PoolObservation& pool);

enum class NuMode { fixed, grid };

struct FitConfig {
    bool random_effect = true;
    NuMode nu_mode = NuMode::fixed;
    double nu = 0.5;
    std::vector<double> nu_grid{0.5, 1.5, 2.5};
    double nugget_ratio = 1e-6;
    bool standardize = true;
    int max_iterations = 500;
    double rel_tol = 1e-6;
    double grad_tol = 1e-5;
    // |standardized coefficient| above this during the fit signals separation.
    double separation_limit = 50.0;
    std::optional<double> initial_sigma2;
    std::optional<double> initial_rho;
};

struct Standardization {
    std::array<double, kNumCovariates> center{};
    std::array<double, kNumCovariates> scale{1, 1, 1, 1, 1};
    // Constant covariates cannot be estimated; their coefficient is fixed at 0.
    std::array<bool, kNumCovariates> active{true, true, true, true, true};
};

struct SiteEffect {
    geo::LatLon location;
    std::vector<std::string> trap_ids;
    double mode = 0.0;      // posterior mode of b
    double variance = 0.0;  // conditional variance at the mode
};

struct FitDiagnostics {
    int iterations = 0;
    int evaluations = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
    std::vector<std::string> notes;
};

struct FittedGlmm {
    GlmmCoefficients coefficients;
    // Covariance of the coefficient estimates, original scale.
    std::array<std::array<double, kNumCoefficients>, kNumCoefficients> covariance{};
    bool random_effect = true;
    MaternParams matern;
    std::vector<SiteEffect> site_effects;
    // Sigma^{-1} b_hat; kriging at new locations is k(x)' kriging_weights.
    std::vector<double> kriging_weights;
    Standardization standardization;
    double log_likelihood = 0.0;
    FitDiagnostics diagnostics;
    // Fitted probabilities of the training rows, from the optimizer's internal
    // (standardized) state. Not serialized.
    std::vector<double> training_fitted;

    std::array<double, kNumCoefficients> standard_errors() const;
};

// Internal design: intercept plus active standardized covariates.
struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<int> site;  // row -> location index
    std::vector<geo::LatLon> locations;
    std::vector<std::vector<std::string>> location_traps;
    Eigen::MatrixXd distances;  // km
    Standardization standardization;
    std::vector<int> coefficient_index;  // column of x -> index into GlmmCoefficients
};

Standardization make_standardization(const Dataset& dataset, std::span<const std::size_t> rows,
                                     bool standardize);
Design make_design(const Dataset& dataset, std::span<const std::size_t> rows,
                   const Standardization& standardization);

// Penalized joint log-density of (beta, b):
//   sum_i [y_i eta_i - log(1 + e^eta_i)] - b' Sigma^{-1} b / 2 - log|Sigma| / 2 - S log(2 pi) / 2
// with eta = X beta + b[site]. Beta is on the design's (standardized) scale.
class JointDensity {
public:
    JointDensity(const Design& design, Eigen::MatrixXd sigma);

    double value(const Eigen::VectorXd& beta, const Eigen::VectorXd& b) const;
    void gradient(const Eigen::VectorXd& beta, const Eigen::VectorXd& b, Eigen::VectorXd& grad_beta,
                  Eigen::VectorXd& grad_b) const;

private:
    const Design* design_;
    Eigen::MatrixXd sigma_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    double log_det_ = 0.0;
};

struct LaplaceState {
    double log_marginal = 0.0;
    double psi = 0.0;    // log p(y | b_hat) - b_hat' Sigma^{-1} b_hat / 2
    Eigen::VectorXd b;   // mode
    Eigen::VectorXd a;   // Sigma^{-1} b
    Eigen::VectorXd w;   // per-location sum of p(1-p) at the mode
    int newton_iterations = 0;
};

// Laplace approximation at fixed (beta, Sigma). Beta on the design scale.
LaplaceState laplace_mode(const Design& design, const Eigen::VectorXd& beta,
                          const Eigen::MatrixXd& sigma);

// Log-likelihood of the fixed-effects-only logistic model.
double logistic_log_likelihood(const Design& design, const Eigen::VectorXd& beta);

// Laplace log-marginal as a function of the outer parameters
// (beta on the design scale, log sigma2, log rho). Used by the fit and by
// local-optimality checks.
double laplace_objective(const Design& design, const Eigen::VectorXd& beta, double log_sigma2,
                         double log_rho, double nu, double nugget_ratio);

FittedGlmm fit(const Dataset& dataset, const FitConfig& config = {});
FittedGlmm fit(const Dataset& dataset, std::span<const std::size_t> rows, const FitConfig& config);

// Random effect at a location: the posterior mode for a training location,
// otherwise the kriged conditional mean given the training modes.
double site_effect_at(const FittedGlmm& model, geo::LatLon location);

std::vector<double> predict_prob(const FittedGlmm& model, std::span<const PoolObservation> pools,
                                 std::span<const TrapSite> sites);

// Recomputes kriging_weights from site_effects and matern.
void refresh_kriging_weights(FittedGlmm& model);

nlohmann::json to_json(const FittedGlmm& model);
FittedGlmm from_json(const nlohmann::json& doc);

}  // namespace trapscore::glmm
