#pragma once

#include <span>

#include <Eigen/Dense>

#include "trapscore/geo.hpp"

namespace trapscore {

// Matérn covariance Sigma = sigma2 * C(d / rho) + nugget * I, distances in km.
struct MaternParams {
    double nu = 0.5;
    double rho = 1.0;
    double sigma2 = 1.0;
    double nugget = 1e-6;

    // Throws DomainError unless nu, rho > 0 and sigma2, nugget finite and >= 0.
    void validate() const;

    static MaternParams with_relative_nugget(double nu, double rho, double sigma2,
                                             double ratio = 1e-6) {
        return {nu, rho, sigma2, ratio * sigma2};
    }
};

// d^nu K_nu(d) / (2^(nu-1) Gamma(nu)), with distance already divided by rho.
// Equals 1 at d = 0. Half-integer orders use their closed forms.
double matern_correlation(double d, double nu);

// Correlation matrix from a distance matrix (km): C_ij = corr(d_ij / rho).
Eigen::MatrixXd matern_correlation_matrix(const Eigen::MatrixXd& distances_km, double nu,
                                          double rho);

struct SpatialCovariance {
    Eigen::MatrixXd sigma;
    double nugget = 0.0;  // nugget actually applied, after any escalation
    Eigen::LLT<Eigen::MatrixXd> cholesky;
};

// Builds Sigma and verifies it factorizes. On failure the nugget is multiplied
// by 10 (starting from 1e-12 * sigma2 when zero) up to max_nugget_escalations
// times before a ConditioningError is raised.
SpatialCovariance build_correlation_matrix(std::span<const geo::LatLon> locations,
                                           const MaternParams& params,
                                           int max_nugget_escalations = 0);
SpatialCovariance build_covariance(const Eigen::MatrixXd& distances_km, const MaternParams& params,
                                   int max_nugget_escalations = 0);

}  // namespace trapscore
