#include "trapscore/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/kernels.hpp"
#include "trapscore/optimize.hpp"

namespace trapscore::glmm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSigma2Min = -18.42068074395237;  // log 1e-8
constexpr double kLogSigma2Max = 9.210340371976184;   // log 1e4

double logistic(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

struct LogisticBuffers {
    std::vector<double> eta, resid, weight;
    explicit LogisticBuffers(std::size_t n) : eta(n), resid(n), weight(n) {}
};

// eta = eta0 + b[site]; returns the Bernoulli log-likelihood and fills resid/weight.
double eval_loglik(const Design& d, const Eigen::VectorXd& eta0, const Eigen::VectorXd* b,
                   LogisticBuffers& buf) {
    const auto n = static_cast<std::size_t>(eta0.size());
    for (std::size_t i = 0; i < n; ++i)
        buf.eta[i] = eta0(static_cast<Eigen::Index>(i)) + (b ? (*b)(d.site[i]) : 0.0);
    return kernels::logistic_terms(buf.eta, {d.y.data(), n}, buf.resid, buf.weight);
}

void site_sums(const Design& d, const LogisticBuffers& buf, Eigen::VectorXd& g, Eigen::VectorXd& w) {
    const auto s = static_cast<Eigen::Index>(d.locations.size());
    g.setZero(s);
    w.setZero(s);
    for (std::size_t i = 0; i < d.site.size(); ++i) {
        g(d.site[i]) += buf.resid[i];
        w(d.site[i]) += buf.weight[i];
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct IrlsResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd inverse_information;
};

// Plain logistic regression by Newton's method; the starting point of the fit.
IrlsResult irls_start(const Design& d, double separation_limit) {
    const auto k = d.x.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    LogisticBuffers buf(static_cast<std::size_t>(d.x.rows()));
    double ll = eval_loglik(d, d.x * beta, nullptr, buf);
    Eigen::MatrixXd info(k, k);
    for (int it = 0; it < 100; ++it) {
        const Eigen::Map<const Eigen::VectorXd> r(buf.resid.data(), d.x.rows());
        const Eigen::Map<const Eigen::VectorXd> w(buf.weight.data(), d.x.rows());
        info = d.x.transpose() * w.asDiagonal() * d.x;
        const Eigen::VectorXd step = info.ldlt().solve(d.x.transpose() * r);
        double t = 1.0;
        Eigen::VectorXd next;
        double ll_next = -kInf;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            next = beta + t * step;
            ll_next = eval_loglik(d, d.x * next, nullptr, buf);
            if (ll_next >= ll - 1e-12 * std::abs(ll)) break;
        }
        beta = next;
        const double gain = ll_next - ll;
        ll = ll_next;
        if (beta.cwiseAbs().maxCoeff() > separation_limit)
            throw SeparationError("logistic fit diverges (|standardized coefficient| > " +
                                  csv::format_double(separation_limit) +
                                  "): complete or quasi-complete separation");
        // Under separation the gain vanishes while Newton steps stay O(1), so a
        // negligible gain only counts as convergence once the step is small too.
        const double moved = (t * step).lpNorm<Eigen::Infinity>();
        if (moved < 1e-10 || (std::abs(gain) < 1e-13 * (1.0 + std::abs(ll)) && moved < 1e-4)) break;
    }
    const Eigen::Map<const Eigen::VectorXd> w(buf.weight.data(), d.x.rows());
    info = d.x.transpose() * w.asDiagonal() * d.x;
    return {beta, info.ldlt().solve(Eigen::MatrixXd::Identity(k, k))};
}

// Maps design-scale coefficients to the original covariate scale.
Eigen::MatrixXd back_transform(const Design& d) {
    const auto k = d.x.cols();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(kNumCoefficients, k);
    t(0, 0) = 1.0;
    for (Eigen::Index c = 1; c < k; ++c) {
        const int j = d.coefficient_index[static_cast<std::size_t>(c)];
        const double s = d.standardization.scale[static_cast<std::size_t>(j - 1)];
        const double m = d.standardization.center[static_cast<std::size_t>(j - 1)];
        t(j, c) = 1.0 / s;
        t(0, c) = -m / s;
    }
    return t;
}

Eigen::MatrixXd covariance_matrix(const Design& d, double nu, double rho, double sigma2, double ratio) {
    Eigen::MatrixXd sigma = sigma2 * matern_correlation_matrix(d.distances, nu, rho);
    sigma.diagonal().array() += ratio * sigma2;
    return sigma;
}

struct InnerFit {
    Eigen::VectorXd beta;  // design scale
    Eigen::MatrixXd vcov;  // design scale
    double log_marginal = 0.0;
    double sigma2 = 0.0, rho = 1.0;
    LaplaceState state;
    Eigen::VectorXd site_variance;
    optimize::BfgsResult opt;
};

Eigen::MatrixXd pool_weighted_gram(const Design& d, const LogisticBuffers& buf) {
    const Eigen::Map<const Eigen::VectorXd> w(buf.weight.data(), d.x.rows());
    return d.x.transpose() * w.asDiagonal() * d.x;
}

InnerFit fit_fixed_effects_only(const Design& d, const FitConfig& cfg) {
    const auto start = irls_start(d, cfg.separation_limit);
    auto objective = [&](const Eigen::VectorXd& beta) {
        LogisticBuffers buf(static_cast<std::size_t>(d.x.rows()));
        return -eval_loglik(d, d.x * beta, nullptr, buf);
    };
    optimize::BfgsOptions opt;
    opt.max_iterations = cfg.max_iterations;
    opt.rel_tol = cfg.rel_tol;
    opt.grad_tol = cfg.grad_tol;
    auto check = [&](const Eigen::VectorXd& x) {
        if (x.cwiseAbs().maxCoeff() > cfg.separation_limit)
            throw SeparationError("logistic fit diverges: complete or quasi-complete separation");
    };
    InnerFit out;
    out.opt = optimize::minimize_bfgs(objective, start.beta, start.inverse_information, opt, check);
    if (!out.opt.converged)
        throw ConvergenceError("fixed-effects fit did not converge in " + std::to_string(out.opt.iterations) +
                                   " iterations",
                               out.opt.f, out.opt.gradient.lpNorm<Eigen::Infinity>());
    out.beta = out.opt.x;
    out.log_marginal = -out.opt.f;
    LogisticBuffers buf(static_cast<std::size_t>(d.x.rows()));
    eval_loglik(d, d.x * out.beta, nullptr, buf);
    const auto k = d.x.cols();
    out.vcov = pool_weighted_gram(d, buf).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    const auto s = static_cast<Eigen::Index>(d.locations.size());
    out.state.b = Eigen::VectorXd::Zero(s);
    out.state.a = Eigen::VectorXd::Zero(s);
    out.site_variance = Eigen::VectorXd::Zero(s);
    out.state.log_marginal = out.log_marginal;
    return out;
}

InnerFit fit_spatial(const Design& d, double nu, const FitConfig& cfg) {
    const auto start = irls_start(d, cfg.separation_limit);
    const auto k = d.x.cols();

    double d_min = kInf, d_max = 0.0;
    std::vector<double> pair_d;
    for (Eigen::Index i = 0; i < d.distances.rows(); ++i)
        for (Eigen::Index j = i + 1; j < d.distances.cols(); ++j) {
            const double v = d.distances(i, j);
            if (v > 0.0) {
                d_min = std::min(d_min, v);
                d_max = std::max(d_max, v);
                pair_d.push_back(v);
            }
        }
    if (pair_d.empty()) throw DomainError("spatial fit needs at least two distinct trap locations");
    const double log_rho_min = std::log(d_min * 1e-2), log_rho_max = std::log(d_max * 1e2);

    const double sigma2_0 = cfg.initial_sigma2.value_or(1.0);
    const double rho_0 = cfg.initial_rho.value_or(0.2 * median(pair_d));

    // The FD steps in beta reuse the correlation matrix of the current rho.
    double cached_rho = -1.0;
    Eigen::MatrixXd cached_corr;
    auto sigma_for = [&](double sigma2, double rho) {
        if (rho != cached_rho) {
            cached_corr = matern_correlation_matrix(d.distances, nu, rho);
            cached_rho = rho;
        }
        Eigen::MatrixXd sigma = sigma2 * cached_corr;
        sigma.diagonal().array() += cfg.nugget_ratio * sigma2;
        return sigma;
    };
    auto objective = [&](const Eigen::VectorXd& theta) {
        const double ls2 = theta(k), lrho = theta(k + 1);
        if (ls2 < kLogSigma2Min || ls2 > kLogSigma2Max || lrho < log_rho_min || lrho > log_rho_max)
            return kInf;
        const auto state = laplace_mode(d, theta.head(k), sigma_for(std::exp(ls2), std::exp(lrho)));
        return std::isfinite(state.log_marginal) ? -state.log_marginal : kInf;
    };

    Eigen::VectorXd theta0(k + 2);
    theta0.head(k) = start.beta;
    theta0(k) = std::log(std::clamp(sigma2_0, 1e-6, 1e3));
    theta0(k + 1) = std::clamp(std::log(rho_0), log_rho_min + 1.0, log_rho_max - 1.0);
    // The likelihood is flat in rho once rho is well below the trap spacing, so
    // a local search started on the wrong side can stall there. Start from the
    // best point of a coarse (sigma2, rho) grid unless both were given.
    if (!cfg.initial_sigma2 || !cfg.initial_rho) {
        double best = objective(theta0);
        const double lo = std::log(std::max(d_min * 0.5, std::exp(log_rho_min)));
        const double hi = std::log(std::min(d_max, std::exp(log_rho_max)));
        for (double ls2 : {std::log(0.25), 0.0, std::log(4.0)}) {
            if (cfg.initial_sigma2 && ls2 != 0.0) continue;
            for (int i = 0; i < 9; ++i) {
                Eigen::VectorXd cand = theta0;
                if (!cfg.initial_sigma2) cand(k) = ls2;
                if (!cfg.initial_rho) cand(k + 1) = lo + (hi - lo) * i / 8.0;
                const double f = objective(cand);
                if (f < best) {
                    best = f;
                    theta0 = cand;
                }
            }
        }
    }

    Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(k + 2, k + 2);
    h0.topLeftCorner(k, k) = start.inverse_information;
    const double f0 = objective(theta0);
    for (Eigen::Index j = k; j < k + 2; ++j) {
        Eigen::VectorXd tp = theta0, tm = theta0;
        tp(j) += 0.05;
        tm(j) -= 0.05;
        const double curv = (objective(tp) - 2.0 * f0 + objective(tm)) / (0.05 * 0.05);
        h0(j, j) = std::isfinite(curv) && curv > 1.0 ? std::clamp(1.0 / curv, 1e-3, 1.0) : 1.0;
    }

    optimize::BfgsOptions opt;
    opt.max_iterations = cfg.max_iterations;
    opt.rel_tol = cfg.rel_tol;
    opt.grad_tol = cfg.grad_tol;
    opt.fd_steps.assign(static_cast<std::size_t>(k), 1e-5);
    opt.fd_steps.push_back(1e-4);
    opt.fd_steps.push_back(1e-4);
    auto check = [&](const Eigen::VectorXd& x) {
        if (x.head(k).cwiseAbs().maxCoeff() > cfg.separation_limit)
            throw SeparationError("spatial logistic fit diverges: complete or quasi-complete separation");
    };

    InnerFit out;
    out.opt = optimize::minimize_bfgs(objective, theta0, h0, opt, check);
    if (!out.opt.converged)
        throw ConvergenceError("spatial GLMM fit did not converge in " + std::to_string(out.opt.iterations) +
                                   " iterations",
                               out.opt.f, out.opt.gradient.lpNorm<Eigen::Infinity>());
    out.beta = out.opt.x.head(k);
    out.sigma2 = std::exp(out.opt.x(k));
    out.rho = std::exp(out.opt.x(k + 1));
    const Eigen::MatrixXd sigma = covariance_matrix(d, nu, out.rho, out.sigma2, cfg.nugget_ratio);
    out.state = laplace_mode(d, out.beta, sigma);
    out.log_marginal = out.state.log_marginal;

    // Fixed-effect covariance: Schur complement of the joint (beta, b) Hessian.
    LogisticBuffers buf(static_cast<std::size_t>(d.x.rows()));
    eval_loglik(d, d.x * out.beta, &out.state.b, buf);
    const auto s = static_cast<Eigen::Index>(d.locations.size());
    const Eigen::VectorXd sw = out.state.w.cwiseSqrt();
    Eigen::MatrixXd b_mat = sw.asDiagonal() * sigma * sw.asDiagonal();
    b_mat.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(b_mat);
    const Eigen::MatrixXd q = llt.matrixL().solve(sw.asDiagonal() * sigma);
    const Eigen::MatrixXd v = sigma - q.transpose() * q;  // (W + Sigma^{-1})^{-1}
    Eigen::MatrixXd h_bb_beta = Eigen::MatrixXd::Zero(s, k);
    for (std::size_t i = 0; i < d.site.size(); ++i)
        h_bb_beta.row(d.site[i]) += buf.weight[i] * d.x.row(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd schur = pool_weighted_gram(d, buf) - h_bb_beta.transpose() * v * h_bb_beta;
    out.vcov = schur.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    out.site_variance = v.diagonal();
    return out;
}

FittedGlmm assemble(const Design& d, const InnerFit& inner, bool random_effect, double nu,
                    double nugget_ratio) {
    FittedGlmm m;
    m.random_effect = random_effect;
    m.standardization = d.standardization;
    const Eigen::MatrixXd t = back_transform(d);
    const Eigen::VectorXd beta = t * inner.beta;
    const Eigen::MatrixXd cov = t * inner.vcov * t.transpose();
    for (int i = 0; i < kNumCoefficients; ++i) {
        m.coefficients[static_cast<std::size_t>(i)] = beta(i);
        for (int j = 0; j < kNumCoefficients; ++j)
            m.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cov(i, j);
    }
    m.matern = random_effect ? MaternParams{nu, inner.rho, inner.sigma2, nugget_ratio * inner.sigma2}
                             : MaternParams{nu, 1.0, 0.0, 0.0};
    for (std::size_t s = 0; s < d.locations.size(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        m.site_effects.push_back({d.locations[s], d.location_traps[s], inner.state.b(si), inner.site_variance(si)});
        m.kriging_weights.push_back(inner.state.a(si));
    }
    m.log_likelihood = inner.log_marginal;
    m.diagnostics.iterations = inner.opt.iterations;
    m.diagnostics.evaluations = inner.opt.evaluations;
    m.diagnostics.objective = inner.opt.f;
    m.diagnostics.gradient_norm = inner.opt.gradient.size() ? inner.opt.gradient.lpNorm<Eigen::Infinity>() : 0.0;
    m.diagnostics.converged = inner.opt.converged;
    for (int j = 0; j < kNumCovariates; ++j)
        if (!d.standardization.active[static_cast<std::size_t>(j)])
            m.diagnostics.notes.push_back(std::string(kCoefficientNames[static_cast<std::size_t>(j + 1)]) +
                                          " is constant in the training data; coefficient fixed at 0");

    const Eigen::VectorXd eta0 = d.x * inner.beta;
    m.training_fitted.resize(d.site.size());
    for (std::size_t i = 0; i < d.site.size(); ++i)
        m.training_fitted[i] = logistic(eta0(static_cast<Eigen::Index>(i)) + inner.state.b(d.site[i]));
    return m;
}

}  // namespace

std::array<double, kNumCovariates> raw_covariates(const PoolObservation& p) {
    return {static_cast<double>(p.pool_size), p.test_positive ? 1.0 : 0.0, p.risk,
            static_cast<double>(p.week), static_cast<double>(p.year)};
}

std::array<double, kNumCoefficients> FittedGlmm::standard_errors() const {
    std::array<double, kNumCoefficients> se{};
    for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::sqrt(std::max(0.0, covariance[i][i]));
    return se;
}

Standardization make_standardization(const Dataset& dataset, std::span<const std::size_t> rows,
                                     bool standardize) {
    Standardization st;
    for (std::size_t j = 0; j < kNumCovariates; ++j) {
        std::vector<double> v;
        v.reserve(rows.size());
        for (auto r : rows) v.push_back(raw_covariates(dataset.pools[r])[j]);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(std::max<std::size_t>(v.size(), 1));
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(v.size(), 1)));
        const bool is_year = j == 4;
        st.active[j] = sd > 1e-12 * std::max(1.0, std::abs(mean));
        st.center[j] = is_year ? (v.empty() ? 0.0 : median(v)) : (standardize ? mean : 0.0);
        st.scale[j] = standardize && st.active[j] ? sd : 1.0;
    }
    return st;
}

Design make_design(const Dataset& dataset, std::span<const std::size_t> rows,
                   const Standardization& st) {
    Design d;
    d.standardization = st;
    d.coefficient_index.push_back(0);
    for (int j = 0; j < kNumCovariates; ++j)
        if (st.active[static_cast<std::size_t>(j)]) d.coefficient_index.push_back(j + 1);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(d.coefficient_index.size());
    d.x.resize(n, k);
    d.y.resize(n);
    d.site.resize(rows.size());

    const auto lookup = dataset.site_lookup();
    std::map<geo::LatLon, int> loc_index;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = dataset.pools[rows[static_cast<std::size_t>(i)]];
        const auto raw = raw_covariates(p);
        d.x(i, 0) = 1.0;
        for (Eigen::Index c = 1; c < k; ++c) {
            const auto j = static_cast<std::size_t>(d.coefficient_index[static_cast<std::size_t>(c)] - 1);
            d.x(i, c) = (raw[j] - st.center[j]) / st.scale[j];
        }
        d.y(i) = p.response ? 1.0 : 0.0;
        const auto it = lookup.find(p.trap_id);
        if (it == lookup.end()) throw ReferentialError("unknown trap_id: " + p.trap_id);
        const auto& site = dataset.sites[it->second];
        const auto [pos, inserted] = loc_index.try_emplace(site.location(), static_cast<int>(d.locations.size()));
        if (inserted) {
            d.locations.push_back(site.location());
            d.location_traps.push_back({});
        }
        auto& traps = d.location_traps[static_cast<std::size_t>(pos->second)];
        if (std::find(traps.begin(), traps.end(), site.trap_id) == traps.end()) traps.push_back(site.trap_id);
        d.site[static_cast<std::size_t>(i)] = pos->second;
    }
    d.distances = geo::distance_matrix(d.locations);
    return d;
}

JointDensity::JointDensity(const Design& design, Eigen::MatrixXd sigma)
    : design_(&design), sigma_(std::move(sigma)), chol_(sigma_) {
    if (chol_.info() != Eigen::Success) throw ConditioningError("joint density: Sigma is not positive definite", 0.0);
    log_det_ = 2.0 * chol_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double JointDensity::value(const Eigen::VectorXd& beta, const Eigen::VectorXd& b) const {
    LogisticBuffers buf(static_cast<std::size_t>(design_->x.rows()));
    const double ll = eval_loglik(*design_, design_->x * beta, &b, buf);
    const double quad = b.dot(chol_.solve(b));
    return ll - 0.5 * quad - 0.5 * log_det_ -
           0.5 * static_cast<double>(b.size()) * std::log(2.0 * std::numbers::pi);
}

void JointDensity::gradient(const Eigen::VectorXd& beta, const Eigen::VectorXd& b,
                            Eigen::VectorXd& grad_beta, Eigen::VectorXd& grad_b) const {
    LogisticBuffers buf(static_cast<std::size_t>(design_->x.rows()));
    eval_loglik(*design_, design_->x * beta, &b, buf);
    const Eigen::Map<const Eigen::VectorXd> r(buf.resid.data(), design_->x.rows());
    grad_beta = design_->x.transpose() * r;
    Eigen::VectorXd w;
    site_sums(*design_, buf, grad_b, w);
    grad_b -= chol_.solve(b);
}

LaplaceState laplace_mode(const Design& d, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma) {
    const auto s = static_cast<Eigen::Index>(d.locations.size());
    const Eigen::VectorXd eta0 = d.x * beta;
    LogisticBuffers buf(static_cast<std::size_t>(d.x.rows()));

    LaplaceState st;
    st.a = Eigen::VectorXd::Zero(s);
    st.b = Eigen::VectorXd::Zero(s);
    st.psi = eval_loglik(d, eta0, &st.b, buf);

    Eigen::VectorXd g, w, sw, c;
    Eigen::MatrixXd bmat(s, s);
    Eigen::LLT<Eigen::MatrixXd> llt;
    auto factor = [&] {
        site_sums(d, buf, g, w);
        sw = w.cwiseSqrt();
        bmat = sw.asDiagonal() * sigma * sw.asDiagonal();
        bmat.diagonal().array() += 1.0;
        llt.compute(bmat);
    };

    for (int it = 0; it < 100; ++it) {
        factor();
        c = w.cwiseProduct(st.b) + g;
        const Eigen::VectorXd a_newton =
            c - sw.cwiseProduct(llt.solve(sw.cwiseProduct(sigma * c)));
        const Eigen::VectorXd da = a_newton - st.a;

        bool accepted = false;
        double psi_try = 0.0;
        Eigen::VectorXd a_try, b_try;
        for (double t = 1.0; t > 1e-10; t *= 0.5) {
            a_try = st.a + t * da;
            b_try = sigma * a_try;
            psi_try = -0.5 * a_try.dot(b_try) + eval_loglik(d, eta0, &b_try, buf);
            if (psi_try >= st.psi - 1e-12 * (1.0 + std::abs(st.psi))) {
                accepted = true;
                break;
            }
        }
        ++st.newton_iterations;
        if (!accepted) {
            eval_loglik(d, eta0, &st.b, buf);  // restore buffers at the current mode
            break;
        }
        const double gain = psi_try - st.psi;
        st.a = a_try;
        st.b = b_try;
        st.psi = psi_try;
        if (gain <= 1e-12 * (1.0 + std::abs(st.psi))) break;
    }
    factor();
    st.w = w;
    const Eigen::MatrixXd l = llt.matrixL();
    st.log_marginal = st.psi - l.diagonal().array().log().sum();
    return st;
}

double logistic_log_likelihood(const Design& design, const Eigen::VectorXd& beta) {
    LogisticBuffers buf(static_cast<std::size_t>(design.x.rows()));
    return eval_loglik(design, design.x * beta, nullptr, buf);
}

double laplace_objective(const Design& design, const Eigen::VectorXd& beta, double log_sigma2,
                         double log_rho, double nu, double nugget_ratio) {
    const Eigen::MatrixXd sigma =
        covariance_matrix(design, nu, std::exp(log_rho), std::exp(log_sigma2), nugget_ratio);
    return laplace_mode(design, beta, sigma).log_marginal;
}

FittedGlmm fit(const Dataset& dataset, const FitConfig& config) {
    std::vector<std::size_t> rows(dataset.pools.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return fit(dataset, rows, config);
}

FittedGlmm fit(const Dataset& dataset, std::span<const std::size_t> rows, const FitConfig& config) {
    if (rows.empty()) throw DomainError("cannot fit a model to zero pools");
    std::size_t positives = 0;
    for (auto r : rows) positives += dataset.pools[r].response ? 1 : 0;
    if (positives == 0 || positives == rows.size())
        throw SeparationError(std::string("degenerate response: all ") + std::to_string(rows.size()) +
                              " responses are " + (positives == 0 ? "0" : "1"));
    if (!(config.nugget_ratio >= 0.0)) throw ConfigError("nugget_ratio must be >= 0");

    const auto st = make_standardization(dataset, rows, config.standardize);
    const auto design = make_design(dataset, rows, st);

    if (!config.random_effect) {
        const auto inner = fit_fixed_effects_only(design, config);
        return assemble(design, inner, false, config.nu, 0.0);
    }
    if (design.locations.size() < 2)
        throw DomainError("spatial fit needs at least two distinct trap locations");

    std::vector<double> nus =
        config.nu_mode == NuMode::grid ? config.nu_grid : std::vector<double>{config.nu};
    if (nus.empty()) throw ConfigError("nu grid is empty");
    std::optional<FittedGlmm> best;
    for (double nu : nus) {
        if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
        const auto inner = fit_spatial(design, nu, config);
        auto model = assemble(design, inner, true, nu, config.nugget_ratio);
        if (!best || model.log_likelihood > best->log_likelihood) best = std::move(model);
    }
    if (nus.size() > 1)
        best->diagnostics.notes.push_back("nu selected by profile likelihood: " + csv::format_double(best->matern.nu));
    return std::move(*best);
}

double site_effect_at(const FittedGlmm& model, geo::LatLon location) {
    for (const auto& s : model.site_effects)
        if (s.location == location) return s.mode;
    if (!model.random_effect || model.matern.sigma2 == 0.0) return 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < model.site_effects.size(); ++j) {
        const double dist = geo::haversine_km(location, model.site_effects[j].location);
        b += model.matern.sigma2 * matern_correlation(dist / model.matern.rho, model.matern.nu) *
             model.kriging_weights[j];
    }
    return b;
}

std::vector<double> predict_prob(const FittedGlmm& model, std::span<const PoolObservation> pools,
                                 std::span<const TrapSite> sites) {
    std::unordered_map<std::string, geo::LatLon> where;
    for (const auto& s : sites) where.emplace(s.trap_id, s.location());
    std::map<geo::LatLon, double> effects;
    std::vector<double> out;
    out.reserve(pools.size());
    for (const auto& p : pools) {
        const auto it = where.find(p.trap_id);
        if (it == where.end()) throw ReferentialError("predict_prob: unknown trap_id " + p.trap_id);
        auto e = effects.find(it->second);
        if (e == effects.end()) e = effects.emplace(it->second, site_effect_at(model, it->second)).first;
        const auto x = raw_covariates(p);
        double eta = model.coefficients[0];
        for (std::size_t j = 0; j < kNumCovariates; ++j) eta += model.coefficients[j + 1] * x[j];
        out.push_back(logistic(eta + e->second));
    }
    return out;
}

void refresh_kriging_weights(FittedGlmm& model) {
    std::vector<geo::LatLon> locs;
    Eigen::VectorXd b(static_cast<Eigen::Index>(model.site_effects.size()));
    for (std::size_t i = 0; i < model.site_effects.size(); ++i) {
        locs.push_back(model.site_effects[i].location);
        b(static_cast<Eigen::Index>(i)) = model.site_effects[i].mode;
    }
    model.kriging_weights.assign(locs.size(), 0.0);
    if (!model.random_effect || model.matern.sigma2 == 0.0 || locs.empty()) return;
    const auto cov = build_correlation_matrix(locs, model.matern);
    const Eigen::VectorXd a = cov.cholesky.solve(b);
    for (std::size_t i = 0; i < locs.size(); ++i) model.kriging_weights[i] = a(static_cast<Eigen::Index>(i));
}

nlohmann::json to_json(const FittedGlmm& m) {
    nlohmann::json j;
    j["format"] = "trapscore.glmm";
    j["version"] = kFormatVersion;
    nlohmann::json coef = nlohmann::json::object();
    for (std::size_t i = 0; i < kNumCoefficients; ++i) coef[std::string(kCoefficientNames[i])] = m.coefficients[i];
    j["coefficients"] = coef;
    j["covariance"] = m.covariance;
    j["random_effect"] = m.random_effect;
    j["matern"] = {{"nu", m.matern.nu}, {"rho_km", m.matern.rho}, {"sigma2", m.matern.sigma2},
                   {"nugget", m.matern.nugget}};
    j["standardization"] = {{"center", m.standardization.center},
                            {"scale", m.standardization.scale},
                            {"active", m.standardization.active}};
    nlohmann::json sites = nlohmann::json::array();
    for (std::size_t i = 0; i < m.site_effects.size(); ++i) {
        const auto& s = m.site_effects[i];
        sites.push_back({{"latitude", s.location.lat},
                         {"longitude", s.location.lon},
                         {"trap_ids", s.trap_ids},
                         {"mode", s.mode},
                         {"variance", s.variance},
                         {"kriging_weight", i < m.kriging_weights.size() ? m.kriging_weights[i] : 0.0}});
    }
    j["site_effects"] = sites;
    j["log_likelihood"] = m.log_likelihood;
    j["diagnostics"] = {{"iterations", m.diagnostics.iterations},
                        {"evaluations", m.diagnostics.evaluations},
                        {"objective", m.diagnostics.objective},
                        {"gradient_norm", m.diagnostics.gradient_norm},
                        {"converged", m.diagnostics.converged},
                        {"notes", m.diagnostics.notes}};
    return j;
}

FittedGlmm from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "trapscore.glmm")
            throw InputError("not a fitted GLMM document");
        if (j.at("version").get<int>() != kFormatVersion)
            throw InputError("unsupported GLMM document version " + j.at("version").dump());
        FittedGlmm m;
        for (std::size_t i = 0; i < kNumCoefficients; ++i)
            m.coefficients[i] = j.at("coefficients").at(std::string(kCoefficientNames[i])).get<double>();
        m.covariance = j.at("covariance").get<decltype(m.covariance)>();
        m.random_effect = j.at("random_effect").get<bool>();
        const auto& mt = j.at("matern");
        m.matern = {mt.at("nu").get<double>(), mt.at("rho_km").get<double>(), mt.at("sigma2").get<double>(),
                    mt.at("nugget").get<double>()};
        const auto& st = j.at("standardization");
        m.standardization.center = st.at("center").get<decltype(m.standardization.center)>();
        m.standardization.scale = st.at("scale").get<decltype(m.standardization.scale)>();
        m.standardization.active = st.at("active").get<decltype(m.standardization.active)>();
        for (const auto& s : j.at("site_effects")) {
            m.site_effects.push_back({{s.at("latitude").get<double>(), s.at("longitude").get<double>()},
                                      s.at("trap_ids").get<std::vector<std::string>>(),
                                      s.at("mode").get<double>(),
                                      s.at("variance").get<double>()});
            m.kriging_weights.push_back(s.at("kriging_weight").get<double>());
        }
        m.log_likelihood = j.at("log_likelihood").get<double>();
        const auto& dg = j.at("diagnostics");
        m.diagnostics.iterations = dg.at("iterations").get<int>();
        m.diagnostics.evaluations = dg.at("evaluations").get<int>();
        m.diagnostics.objective = dg.at("objective").get<double>();
        m.diagnostics.gradient_norm = dg.at("gradient_norm").get<double>();
        m.diagnostics.converged = dg.at("converged").get<bool>();
        m.diagnostics.notes = dg.at("notes").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed GLMM document: ") + e.what());
    }
}

}  // namespace trapscore::glmm
