#include "trapscore/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

namespace trapscore::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(TRAPSCORE_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() noexcept {
    Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    if (const char* env = std::getenv("TRAPSCORE_SIMD")) {
        const std::string want(env);
        if (want == "scalar") isa = Isa::scalar;
    }
    return isa;
}

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
    return isa == Isa::scalar || cpu_has_avx2();
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) noexcept {
    if (!isa_supported(isa)) isa = Isa::scalar;
    current().store(isa, std::memory_order_relaxed);
    return isa;
}

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
    case Isa::avx2:
        return "avx2";
    case Isa::scalar:
        break;
    }
    return "scalar";
}

double logistic_terms(std::span<const double> eta, std::span<const double> y,
                      std::span<double> resid, std::span<double> weight) {
    assert(y.size() == eta.size() && resid.size() == eta.size() && weight.size() == eta.size());
#ifdef TRAPSCORE_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2)
        return avx2::logistic_terms(eta.data(), y.data(), resid.data(), weight.data(), eta.size());
#endif
    return scalar::logistic_terms(eta.data(), y.data(), resid.data(), weight.data(), eta.size());
}

void exp_neg_scaled(std::span<const double> d, double inv_scale, std::span<double> out) {
    assert(out.size() == d.size());
#ifdef TRAPSCORE_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2) return avx2::exp_neg_scaled(d.data(), inv_scale, out.data(), d.size());
#endif
    scalar::exp_neg_scaled(d.data(), inv_scale, out.data(), d.size());
}

double normal_pdf_sum(double x, std::span<const double> means, double sigma) {
#ifdef TRAPSCORE_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2) return avx2::normal_pdf_sum(x, means.data(), sigma, means.size());
#endif
    return scalar::normal_pdf_sum(x, means.data(), sigma, means.size());
}

void chord_distances(double px, double py, double pz, std::span<const double> qx,
                     std::span<const double> qy, std::span<const double> qz,
                     std::span<double> out) {
    assert(qy.size() == qx.size() && qz.size() == qx.size() && out.size() == qx.size());
#ifdef TRAPSCORE_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2)
        return avx2::chord_distances(px, py, pz, qx.data(), qy.data(), qz.data(), out.data(), qx.size());
#endif
    scalar::chord_distances(px, py, pz, qx.data(), qy.data(), qz.data(), out.data(), qx.size());
}

}  // namespace trapscore::kernels
