// Compiled with -mavx2 -mfma. Only intrinsics are used here: no inline
// library functions, so no AVX-encoded COMDAT copies can leak into scalar code.

#include "trapscore/kernels.hpp"

#include <immintrin.h>

namespace trapscore::kernels::avx2 {
namespace {

constexpr double kLog2e = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline __m256d exp_pd(__m256d x) {
    const __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_LT_OQ);
    x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
    x = _mm256_min_pd(x, _mm256_set1_pd(709.0));

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);

    // Taylor series to degree 13; |r| <= ln2/2 keeps the remainder below 1e-17.
    __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    __m256i k = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
    k = _mm256_add_epi64(k, _mm256_set1_epi64x(1023));
    k = _mm256_slli_epi64(k, 52);
    const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(k));
    return _mm256_blendv_pd(result, _mm256_setzero_pd(), under);
}

// log(1 + u) for u in [0, 1].
inline __m256d log1p_unit_pd(__m256d u) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d big = _mm256_cmp_pd(_mm256_add_pd(one, u), _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
    // big lanes: log(1+u) = ln2 + log(1 + (u-1)/2)
    const __m256d v = _mm256_blendv_pd(u, _mm256_mul_pd(_mm256_sub_pd(u, one), _mm256_set1_pd(0.5)),
                                       big);
    const __m256d k = _mm256_and_pd(big, _mm256_set1_pd(kLn2));
    const __m256d s = _mm256_div_pd(v, _mm256_add_pd(_mm256_set1_pd(2.0), v));
    const __m256d s2 = _mm256_mul_pd(s, s);
    __m256d p = _mm256_set1_pd(1.0 / 23.0);
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 21.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 19.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 17.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 15.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 13.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 11.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 9.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 7.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 5.0));
    p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / 3.0));
    p = _mm256_fmadd_pd(p, s2, one);
    return _mm256_fmadd_pd(_mm256_add_pd(s, s), p, k);
}

inline double lane_sum(__m256d v, std::size_t lanes = 4) {
    alignas(32) double tmp[4];
    _mm256_store_pd(tmp, v);
    double acc = 0.0;
    for (std::size_t i = 0; i < lanes; ++i) acc += tmp[i];
    return acc;
}

inline __m256d logistic_block(__m256d eta, __m256d y, __m256d& resid, __m256d& weight) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign = _mm256_set1_pd(-0.0);
    const __m256d neg_abs = _mm256_or_pd(eta, sign);
    const __m256d e = exp_pd(neg_abs);
    const __m256d inv = _mm256_div_pd(one, _mm256_add_pd(one, e));
    const __m256d nonneg = _mm256_cmp_pd(eta, _mm256_setzero_pd(), _CMP_GE_OQ);
    const __m256d p = _mm256_blendv_pd(_mm256_mul_pd(e, inv), inv, nonneg);
    resid = _mm256_sub_pd(y, p);
    weight = _mm256_mul_pd(_mm256_mul_pd(e, inv), inv);
    const __m256d softplus = _mm256_add_pd(_mm256_max_pd(eta, _mm256_setzero_pd()), log1p_unit_pd(e));
    return _mm256_fmsub_pd(y, eta, softplus);
}

}  // namespace

double logistic_terms(const double* eta, const double* y, double* resid, double* weight,
                      std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r, w;
        acc = _mm256_add_pd(acc, logistic_block(_mm256_loadu_pd(eta + i), _mm256_loadu_pd(y + i), r, w));
        _mm256_storeu_pd(resid + i, r);
        _mm256_storeu_pd(weight + i, w);
    }
    double total = lane_sum(acc);
    if (const std::size_t rem = n - i; rem > 0) {
        alignas(32) double e4[4] = {0, 0, 0, 0}, y4[4] = {0, 0, 0, 0}, r4[4], w4[4];
        for (std::size_t k = 0; k < rem; ++k) {
            e4[k] = eta[i + k];
            y4[k] = y[i + k];
        }
        __m256d r, w;
        const __m256d ll = logistic_block(_mm256_load_pd(e4), _mm256_load_pd(y4), r, w);
        _mm256_store_pd(r4, r);
        _mm256_store_pd(w4, w);
        for (std::size_t k = 0; k < rem; ++k) {
            resid[i + k] = r4[k];
            weight[i + k] = w4[k];
        }
        total += lane_sum(ll, rem);
    }
    return total;
}

void exp_neg_scaled(const double* d, double inv_scale, double* out, std::size_t n) {
    const __m256d s = _mm256_set1_pd(-inv_scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, exp_pd(_mm256_mul_pd(_mm256_loadu_pd(d + i), s)));
    }
    if (const std::size_t rem = n - i; rem > 0) {
        alignas(32) double d4[4] = {0, 0, 0, 0}, o4[4];
        for (std::size_t k = 0; k < rem; ++k) d4[k] = d[i + k];
        _mm256_store_pd(o4, exp_pd(_mm256_mul_pd(_mm256_load_pd(d4), s)));
        for (std::size_t k = 0; k < rem; ++k) out[i + k] = o4[k];
    }
}

double normal_pdf_sum(double x, const double* means, double sigma, std::size_t n) {
    const __m256d xv = _mm256_set1_pd(x);
    const __m256d scale = _mm256_set1_pd(-1.0 / (2.0 * sigma * sigma));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d z = _mm256_sub_pd(xv, _mm256_loadu_pd(means + i));
        acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(_mm256_mul_pd(z, z), scale)));
    }
    double total = lane_sum(acc);
    if (const std::size_t rem = n - i; rem > 0) {
        alignas(32) double m4[4] = {x, x, x, x};
        for (std::size_t k = 0; k < rem; ++k) m4[k] = means[i + k];
        const __m256d z = _mm256_sub_pd(xv, _mm256_load_pd(m4));
        total += lane_sum(exp_pd(_mm256_mul_pd(_mm256_mul_pd(z, z), scale)), rem);
    }
    return total * kInvSqrt2Pi / sigma;
}

void chord_distances(double px, double py, double pz, const double* qx, const double* qy,
                     const double* qz, double* out, std::size_t n) {
    const __m256d vx = _mm256_set1_pd(px), vy = _mm256_set1_pd(py), vz = _mm256_set1_pd(pz);
    auto block = [&](__m256d ax, __m256d ay, __m256d az) {
        const __m256d dx = _mm256_sub_pd(vx, ax);
        const __m256d dy = _mm256_sub_pd(vy, ay);
        const __m256d dz = _mm256_sub_pd(vz, az);
        __m256d s = _mm256_mul_pd(dx, dx);
        s = _mm256_fmadd_pd(dy, dy, s);
        s = _mm256_fmadd_pd(dz, dz, s);
        return _mm256_sqrt_pd(s);
    };
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(out + j, block(_mm256_loadu_pd(qx + j), _mm256_loadu_pd(qy + j),
                                        _mm256_loadu_pd(qz + j)));
    }
    if (const std::size_t rem = n - j; rem > 0) {
        alignas(32) double x4[4] = {px, px, px, px}, y4[4] = {py, py, py, py},
                           z4[4] = {pz, pz, pz, pz}, o4[4];
        for (std::size_t k = 0; k < rem; ++k) {
            x4[k] = qx[j + k];
            y4[k] = qy[j + k];
            z4[k] = qz[j + k];
        }
        _mm256_store_pd(o4, block(_mm256_load_pd(x4), _mm256_load_pd(y4), _mm256_load_pd(z4)));
        for (std::size_t k = 0; k < rem; ++k) out[j + k] = o4[k];
    }
}

}  // namespace trapscore::kernels::avx2
