#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace trapscore::optimize {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
    int max_iterations = 500;
    // Converged when the inf-norm of the gradient drops below grad_tol, or when
    // the relative objective change drops below rel_tol while the gradient is
    // already below loose_grad_tol.
    double rel_tol = 1e-6;
    double grad_tol = 1e-5;
    double loose_grad_tol = 1e-3;
    // Central-difference step per coordinate; empty means 1e-5 everywhere.
    std::vector<double> fd_steps;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

// Central finite-difference gradient. Falls back to a one-sided difference
// when the objective is not finite on one side.
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                            const std::vector<double>& steps, int& evaluations);

// Quasi-Newton minimization with finite-difference gradients and Armijo
// backtracking. The objective may return +inf to reject a point.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const Eigen::MatrixXd& h0_inverse,
                         const BfgsOptions& options,
                         const std::function<void(const Eigen::VectorXd&)>& on_iterate = {});

}  // namespace trapscore::optimize
