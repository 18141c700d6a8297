#include "mfbo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfbo {
namespace {

Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Gradient of the objective restricted to the feasible directions: components
// pressing against an active bound are zeroed.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] <= lo[i] && g[i] > 0) pg[i] = 0;
        if (x[i] >= hi[i] && g[i] < 0) pg[i] = 0;
    }
    return pg;
}

}  // namespace

MinimizeResult minimize_bounded(const GradFn& fn, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                int max_iters, double grad_tol) {
    const Eigen::Index n = x0.size();
    MinimizeResult res;
    res.x = clamp_box(x0, lo, hi);

    Eigen::VectorXd g(n);
    double f = fn(res.x, &g);
    ++res.evaluations;
    if (!std::isfinite(f)) {
        res.f = f;
        return res;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian approx
    const double c1 = 1e-4;

    for (int it = 0; it < max_iters; ++it) {
        res.iterations = it + 1;
        Eigen::VectorXd pg = projected_gradient(res.x, g, lo, hi);
        if (pg.lpNorm<Eigen::Infinity>() < grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd d = -(H * g);
        if (d.dot(g) > -1e-14 * d.norm() * g.norm()) {  // not a descent direction
            H.setIdentity();
            d = -pg;
        }

        // Backtracking along the projected path x(a) = clamp(x + a*d).
        double a = 1.0;
        double f_new = f;
        Eigen::VectorXd x_new = res.x;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt) {
            x_new = clamp_box(res.x + a * d, lo, hi);
            Eigen::VectorXd step = x_new - res.x;
            if (step.lpNorm<Eigen::Infinity>() < 1e-15) break;
            f_new = fn(x_new, nullptr);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= f + c1 * g.dot(step)) {
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if (!accepted) {
            res.converged = true;  // no further progress along any tried step
            break;
        }

        Eigen::VectorXd g_new(n);
        f_new = fn(x_new, &g_new);
        ++res.evaluations;
        if (!std::isfinite(f_new)) break;

        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
                rho * s * s.transpose();
        } else {
            H.setIdentity();
        }

        res.x = x_new;
        f = f_new;
        g = g_new;
    }
    res.f = f;
    return res;
}

GradFn with_fd_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                        double step) {
    return [fn, step](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const double f = fn(x);
        if (grad) {
            grad->resize(x.size());
            Eigen::VectorXd xp = x;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double h = step * std::max(1.0, std::abs(x[i]));
                xp[i] = x[i] + h;
                (*grad)[i] = (fn(xp) - f) / h;
                xp[i] = x[i];
            }
        }
        return f;
    };
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& fn,
                                   const Eigen::VectorXd& x, double step) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = fn(xp);
        xp[i] = x[i] - h;
        const double fm = fn(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

}  // namespace mfbo
