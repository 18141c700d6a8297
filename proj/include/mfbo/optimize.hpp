#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mfbo {

// Objective callback: returns f(x); if grad is non-null, writes df/dx into it.
using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

// Box-constrained BFGS with gradient projection and Armijo backtracking.
// Minimizes fn over {x : lo <= x <= hi}. Components with lo == -inf / hi == inf
// are unconstrained.
MinimizeResult minimize_bounded(const GradFn& fn, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                int max_iters = 100, double grad_tol = 1e-7);

// Wraps a value-only objective with forward-difference gradients.
GradFn with_fd_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                        double step = 1e-7);

// Central finite-difference gradient, used by tests to validate analytic ones.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& fn,
                                   const Eigen::VectorXd& x, double step = 1e-6);

}  // namespace mfbo
