#include "trapscore/optimize.hpp"

#include <cmath>
#include <limits>

#include "trapscore/error.hpp"

namespace trapscore::optimize {

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                            const std::vector<double>& steps, int& evaluations) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = steps.empty() ? 1e-5 : steps[static_cast<std::size_t>(k)];
        xp(k) = x(k) + h;
        const double fp = f(xp);
        xp(k) = x(k) - h;
        const double fm = f(xp);
        xp(k) = x(k);
        evaluations += 2;
        if (std::isfinite(fp) && std::isfinite(fm))
            g(k) = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp))
            g(k) = (fp - fx) / h;
        else if (std::isfinite(fm))
            g(k) = (fx - fm) / h;
        else
            g(k) = 0.0;
    }
    return g;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const Eigen::MatrixXd& h0_inverse,
                         const BfgsOptions& options,
                         const std::function<void(const Eigen::VectorXd&)>& on_iterate) {
    BfgsResult r;
    r.x = std::move(x0);
    r.f = f(r.x);
    r.evaluations = 1;
    if (!std::isfinite(r.f))
        throw ConvergenceError("objective is not finite at the starting point", r.f,
                               std::numeric_limits<double>::infinity());
    r.gradient = fd_gradient(f, r.x, r.f, options.fd_steps, r.evaluations);
    Eigen::MatrixXd h = h0_inverse;
    const auto n = r.x.size();

    for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
        const double gnorm = r.gradient.lpNorm<Eigen::Infinity>();
        if (gnorm <= options.grad_tol) {
            r.converged = true;
            return r;
        }

        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            Eigen::VectorXd p = -h * r.gradient;
            double slope = r.gradient.dot(p);
            if (!(slope < 0.0)) {
                h = h0_inverse;
                p = -h * r.gradient;
                slope = r.gradient.dot(p);
            }
            for (double t = 1.0; t > 1e-14; t *= 0.5) {
                x_new = r.x + t * p;
                f_new = f(x_new);
                ++r.evaluations;
                if (std::isfinite(f_new) && f_new <= r.f + 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) h = h0_inverse;
        }
        if (!accepted) {
            // No descent along the quasi-Newton or reset direction: at the noise floor.
            r.converged = gnorm <= options.loose_grad_tol;
            return r;
        }

        const Eigen::VectorXd g_new = fd_gradient(f, x_new, f_new, options.fd_steps, r.evaluations);
        const Eigen::VectorXd s = x_new - r.x;
        const Eigen::VectorXd y = g_new - r.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
            h = (i_n - rho * s * y.transpose()) * h * (i_n - rho * y * s.transpose()) +
                rho * s * s.transpose();
        }
        const double rel = std::abs(r.f - f_new) / std::max(1.0, std::abs(f_new));
        r.x = x_new;
        r.f = f_new;
        r.gradient = g_new;
        if (on_iterate) on_iterate(r.x);

        const double gn = r.gradient.lpNorm<Eigen::Infinity>();
        if (gn <= options.grad_tol || (rel <= options.rel_tol && gn <= options.loose_grad_tol)) {
            ++r.iterations;
            r.converged = true;
            return r;
        }
    }
    return r;
}

}  // namespace trapscore::optimize
