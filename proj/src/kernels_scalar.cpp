#include "trapscore/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace trapscore::kernels::scalar {

double logistic_terms(const double* eta, const double* y, double* resid, double* weight,
                      std::size_t n) {
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(-std::abs(eta[i]));
        const double inv = 1.0 / (1.0 + e);
        const double p = eta[i] >= 0.0 ? inv : e * inv;
        resid[i] = y[i] - p;
        weight[i] = e * inv * inv;
        loglik += y[i] * eta[i] - (std::max(eta[i], 0.0) + std::log1p(e));
    }
    return loglik;
}

void exp_neg_scaled(const double* d, double inv_scale, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-d[i] * inv_scale);
}

double normal_pdf_sum(double x, const double* means, double sigma, std::size_t n) {
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = x - means[i];
        acc += std::exp(-z * z * inv_two_var);
    }
    return acc / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

void chord_distances(double px, double py, double pz, const double* qx, const double* qy,
                     const double* qz, double* out, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = px - qx[j];
        const double dy = py - qy[j];
        const double dz = pz - qz[j];
        out[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
}

}  // namespace trapscore::kernels::scalar
