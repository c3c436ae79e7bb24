#pragma once

// Data-parallel inner loops used by the model fits. Each kernel has a scalar
// reference implementation and an AVX2/FMA variant; the active variant is
// chosen once at startup from CPUID and may be overridden with the
// TRAPSCORE_SIMD environment variable ("scalar" or "avx2") or set_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace trapscore::kernels {

enum class Isa { scalar, avx2 };

bool isa_supported(Isa isa) noexcept;
Isa active_isa() noexcept;
// Falls back to scalar when the requested ISA is not supported; returns the ISA in effect.
Isa set_isa(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

// Bernoulli-logit terms. For each i: p = 1/(1+exp(-eta)), resid = y - p,
// weight = p(1-p). Returns sum_i [y_i eta_i - log(1 + exp(eta_i))].
double logistic_terms(std::span<const double> eta, std::span<const double> y,
                      std::span<double> resid, std::span<double> weight);

// out[i] = exp(-d[i] * inv_scale)
void exp_neg_scaled(std::span<const double> d, double inv_scale, std::span<double> out);

// sum_i exp(-(x - mean_i)^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)
double normal_pdf_sum(double x, std::span<const double> means, double sigma);

// out[j] = |p - q_j| for unit vectors stored as separate x/y/z arrays.
void chord_distances(double px, double py, double pz, std::span<const double> qx,
                     std::span<const double> qy, std::span<const double> qz,
                     std::span<double> out);

// Per-ISA entry points, exposed for equivalence testing.
namespace scalar {
double logistic_terms(const double* eta, const double* y, double* resid, double* weight,
                      std::size_t n);
void exp_neg_scaled(const double* d, double inv_scale, double* out, std::size_t n);
double normal_pdf_sum(double x, const double* means, double sigma, std::size_t n);
void chord_distances(double px, double py, double pz, const double* qx, const double* qy,
                     const double* qz, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define TRAPSCORE_HAVE_AVX2_KERNELS 1
namespace avx2 {
double logistic_terms(const double* eta, const double* y, double* resid, double* weight,
                      std::size_t n);
void exp_neg_scaled(const double* d, double inv_scale, double* out, std::size_t n);
double normal_pdf_sum(double x, const double* means, double sigma, std::size_t n);
void chord_distances(double px, double py, double pz, const double* qx, const double* qy,
                     const double* qz, double* out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace trapscore::kernels
