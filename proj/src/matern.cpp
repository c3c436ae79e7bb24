#include "trapscore/matern.hpp"

#include <cmath>
#include <string>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/kernels.hpp"

namespace trapscore {

void MaternParams::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("Matern nu must be > 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("Matern rho must be > 0");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw DomainError("Matern sigma2 must be >= 0");
    if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw DomainError("Matern nugget must be >= 0");
}

double matern_correlation(double d, double nu) {
    if (!std::isfinite(d)) throw DomainError("matern_correlation: distance must be finite");
    if (d < 0.0) throw DomainError("matern_correlation: distance must be >= 0");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("matern_correlation: nu must be > 0");
    if (d == 0.0) return 1.0;
    if (nu == 0.5) return std::exp(-d);
    if (nu == 1.5) return (1.0 + d) * std::exp(-d);
    if (nu == 2.5) return (1.0 + d + d * d / 3.0) * std::exp(-d);
    if (d > 700.0) return 0.0;
    // log form avoids overflow of d^nu and 1/Gamma for larger orders
    const double log_c = nu * std::log(d) + std::log(std::cyl_bessel_k(nu, d)) -
                         (nu - 1.0) * std::log(2.0) - std::lgamma(nu);
    return std::min(1.0, std::exp(log_c));
}

Eigen::MatrixXd matern_correlation_matrix(const Eigen::MatrixXd& distances_km, double nu,
                                          double rho) {
    const auto n = distances_km.rows();
    Eigen::MatrixXd c(n, n);
    if (nu == 0.5) {
        // column-major: each column is contiguous
        for (Eigen::Index j = 0; j < n; ++j) {
            kernels::exp_neg_scaled({distances_km.col(j).data(), static_cast<std::size_t>(n)}, 1.0 / rho,
                                    {c.col(j).data(), static_cast<std::size_t>(n)});
        }
    } else {
        for (Eigen::Index j = 0; j < n; ++j) {
            c(j, j) = 1.0;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double v = matern_correlation(distances_km(i, j) / rho, nu);
                c(i, j) = v;
                c(j, i) = v;
            }
        }
    }
    return c;
}

SpatialCovariance build_covariance(const Eigen::MatrixXd& distances_km, const MaternParams& params,
                                   int max_nugget_escalations) {
    params.validate();
    if (distances_km.rows() < 1) throw DomainError("covariance needs at least one location");
    SpatialCovariance out;
    const Eigen::MatrixXd base = params.sigma2 * matern_correlation_matrix(distances_km, params.nu, params.rho);
    double nugget = params.nugget;
    for (int attempt = 0;; ++attempt) {
        out.sigma = base;
        out.sigma.diagonal().array() += nugget;
        out.cholesky.compute(out.sigma);
        if (out.cholesky.info() == Eigen::Success) {
            out.nugget = nugget;
            return out;
        }
        if (attempt >= max_nugget_escalations) break;
        nugget = nugget > 0.0 ? nugget * 10.0 : 1e-12 * std::max(params.sigma2, 1e-300);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.sigma, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    throw ConditioningError("spatial covariance is not positive definite (smallest eigenvalue " +
                                csv::format_double(min_eig) + ", nugget " + csv::format_double(nugget) + ")",
                            min_eig);
}

SpatialCovariance build_correlation_matrix(std::span<const geo::LatLon> locations,
                                           const MaternParams& params, int max_nugget_escalations) {
    return build_covariance(geo::distance_matrix(locations), params, max_nugget_escalations);
}

}  // namespace trapscore
