#include "mfbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfbo/optimize.hpp"
#include "mfbo/rng.hpp"
#include "mfbo/sobol.hpp"

namespace mfbo {

namespace {
constexpr double kSigmaFloor = 1e-12;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double phi(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double Phi(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

std::vector<std::vector<int>> level_combos(const ProblemSpace& space) {
    std::vector<std::vector<int>> combos{{}};
    for (int b = 0; b < space.dt(); ++b) {
        std::vector<std::vector<int>> next;
        for (const auto& c : combos)
            for (int k = 0; k < space.categorical_levels[b]; ++k) {
                auto e = c;
                e.push_back(k);
                next.push_back(std::move(e));
            }
        combos = std::move(next);
    }
    return combos;
}
}  // namespace

double alpha_pi(const PosteriorSummary& p) {
    if (p.sigma <= 0.0) return p.mu > p.y_star ? 1.0 : 0.0;
    const double s = std::max(p.sigma, kSigmaFloor);
    return Phi((p.mu - p.y_star) / s);
}

double alpha_ei(const PosteriorSummary& p) {
    if (p.sigma <= 0.0) return std::max(p.mu - p.y_star, 0.0);
    const double s = std::max(p.sigma, kSigmaFloor);
    const double z = (p.mu - p.y_star) / s;
    return (p.mu - p.y_star) * Phi(z) + s * phi(z);
}

double alpha_lf(const PosteriorSummary& p) {
    if (p.sigma <= 0.0) return 0.0;
    const double s = std::max(p.sigma, kSigmaFloor);
    return s * phi((p.y_star - p.mu) / s);
}

double alpha_kg(const FittedEmulator& em, const MixedPoint& u,
                const std::vector<MixedPoint>& candidate_grid, int fantasies,
                std::uint64_t seed) {
    if (fantasies < 1) throw std::invalid_argument("alpha_kg: fantasies must be >= 1");
    if (candidate_grid.empty())
        throw std::invalid_argument("alpha_kg: empty candidate grid");
    const int n = em.train_n();
    const Eigen::MatrixXd& L = em.chol_factor();

    const Eigen::VectorXd r = em.corr_vector(u);
    const Eigen::VectorXd q = L.triangularView<Eigen::Lower>().solve(r);
    const double kuu = em.corr_scalar(u, u) + em.jitter();
    const double d2 = kuu - q.squaredNorm();
    // A duplicate of a training row leaves only the jitter on the conditional
    // variance (d2 <= 2*jitter); anything that close carries no information.
    if (d2 < 4.0 * em.jitter() + 1e-14) return 0.0;
    const double d = std::sqrt(d2);

    auto [mu_u, var_u] = em.predict(u);
    const double mu_std = (mu_u - em.y_mean()) / em.y_scale();
    const double sd_std = std::sqrt(std::max(0.0, var_u)) / em.y_scale();

    const int m = static_cast<int>(candidate_grid.size());
    Eigen::MatrixXd Rg(m, n);
    Eigen::VectorXd kgu(m);
    for (int i = 0; i < m; ++i) {
        Rg.row(i) = em.corr_vector(candidate_grid[i]).transpose();
        kgu[i] = em.corr_scalar(candidate_grid[i], u);
    }

    // Augmented solves via the rank-1 Cholesky append L_aug = [[L,0],[q^T,d]].
    auto solve_aug = [&](const Eigen::VectorXd& head, double tail) {
        Eigen::VectorXd a = L.triangularView<Eigen::Lower>().solve(head);
        const double at = (tail - q.dot(a)) / d;
        Eigen::VectorXd w(n + 1);
        w[n] = at / d;
        Eigen::VectorXd head_back = a - q * w[n];
        L.triangularView<Eigen::Lower>().transpose().solveInPlace(head_back);
        w.head(n) = head_back;
        return w;
    };

    const Eigen::VectorXd w1 = solve_aug(Eigen::VectorXd::Ones(n), 1.0);
    const double c_aug = w1.sum();
    const Eigen::VectorXd& ys = em.y_standardized();

    double current_best;
    {
        Eigen::VectorXd Ri1 = L.triangularView<Eigen::Lower>().solve(Eigen::VectorXd::Ones(n));
        L.triangularView<Eigen::Lower>().transpose().solveInPlace(Ri1);
        const double beta = Ri1.dot(ys) / Ri1.sum();
        Eigen::VectorXd alpha_cur = L.triangularView<Eigen::Lower>().solve(
            Eigen::VectorXd((ys.array() - beta).matrix()));
        L.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_cur);
        current_best = ((Rg * alpha_cur).array() + beta).maxCoeff();
    }

    Rng rng(derive_seed(seed, 1));
    double acc = 0.0;
    for (int f = 0; f < fantasies; ++f) {
        const double yf = mu_std + sd_std * rng.normal();
        Eigen::VectorXd y_aug(n + 1);
        y_aug.head(n) = ys;
        y_aug[n] = yf;
        const double beta_aug = w1.dot(y_aug) / c_aug;
        const Eigen::VectorXd resid_head = (ys.array() - beta_aug).matrix();
        const Eigen::VectorXd wa = solve_aug(resid_head, yf - beta_aug);
        const double fant_best =
            ((Rg * wa.head(n)).array() + kgu.array() * wa[n] + beta_aug).maxCoeff();
        acc += fant_best;
    }
    return (acc / fantasies - current_best) * em.y_scale();
}

double alpha_mfca(const FittedEmulator& em, const MixedPoint& u, int j,
                  const std::vector<double>& costs,
                  const std::vector<double>& incumbents) {
    MixedPoint p = u;
    p.s = j;
    auto [mu, var] = em.predict(p);
    PosteriorSummary ps{mu, std::sqrt(std::max(0.0, var)), incumbents[j]};
    const double raw =
        (j == em.space().hf_index) ? alpha_pi(ps) : alpha_lf(ps);
    return raw / costs[j];
}

namespace {
// Acquisition value and gradient (over scaled x) for a fixed (t, source).
double af_value_grad(const FittedEmulator& em, const Eigen::VectorXd& x_unit,
                     const std::vector<int>& t, int j, double y_star, bool use_pi,
                     bool use_ei, Eigen::VectorXd* grad) {
    double mu, sd;
    Eigen::VectorXd dmu, dsd;
    em.predict_with_gradient(x_unit, t, j, mu, sd, dmu, dsd);
    PosteriorSummary ps{mu, sd, y_star};
    double value;
    if (use_ei)
        value = alpha_ei(ps);
    else if (use_pi)
        value = alpha_pi(ps);
    else
        value = alpha_lf(ps);
    if (grad) {
        grad->setZero(x_unit.size());
        if (sd > kSigmaFloor) {
            if (use_ei) {
                const double z = (mu - y_star) / sd;
                *grad = Phi(z) * dmu + phi(z) * dsd;
            } else if (use_pi) {
                const double z = (mu - y_star) / sd;
                *grad = (phi(z) / sd) * (dmu - z * dsd);
            } else {
                const double z = (y_star - mu) / sd;
                *grad = phi(z) * ((1.0 + z * z) * dsd + z * dmu);
            }
        }
    }
    return value;
}
}  // namespace

AcquisitionDecision propose(const FittedEmulator& em,
                            const std::vector<double>& costs,
                            const std::vector<double>& incumbents,
                            const ProposeConfig& pc) {
    const ProblemSpace& space = em.space();
    const int dx = space.dx;
    std::vector<int> sources = pc.sources;
    if (sources.empty())
        for (int j = 0; j < space.num_sources; ++j) sources.push_back(j);
    const auto combos = level_combos(space);

    AcquisitionDecision best;
    best.source = -1;
    double best_cn = -std::numeric_limits<double>::infinity();
    double best_raw = -std::numeric_limits<double>::infinity();

    for (int j : sources) {
        const bool use_pi = (j == space.hf_index) && pc.af != ProposeConfig::Af::ei;
        const bool use_ei = pc.af == ProposeConfig::Af::ei;
        const double y_star = incumbents[j];

        Eigen::MatrixXd cand =
            sobol_points(pc.batch, dx, derive_seed(pc.seed, 101 + j));
        const int n_extra = static_cast<int>(pc.extra_starts.size());
        if (n_extra > 0) {
            cand.conservativeResize(pc.batch + n_extra, dx);
            for (int i = 0; i < n_extra; ++i)
                cand.row(pc.batch + i) =
                    pc.extra_starts[i].transpose().cwiseMax(0.0).cwiseMin(1.0);
        }

        struct Start {
            double value;
            Eigen::VectorXd x;
            std::vector<int> t;
        };
        std::vector<Start> screened;
        for (const auto& t : combos) {
            Eigen::VectorXd mean, var;
            em.predict_scaled(cand, t, j, mean, var);
            for (int i = 0; i < cand.rows(); ++i) {
                PosteriorSummary ps{mean[i], std::sqrt(std::max(0.0, var[i])), y_star};
                double v;
                if (use_ei)
                    v = alpha_ei(ps);
                else if (use_pi)
                    v = alpha_pi(ps);
                else
                    v = alpha_lf(ps);
                screened.push_back({v, cand.row(i).transpose(), t});
            }
        }
        std::stable_sort(screened.begin(), screened.end(),
                         [](const Start& a, const Start& b) { return a.value > b.value; });

        const int n_ref = std::min<int>(pc.multistarts, static_cast<int>(screened.size()));
        double src_best = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd src_x;
        std::vector<int> src_t;
        for (int i = 0; i < n_ref; ++i) {
            const auto& st = screened[i];
            double v = st.value;
            Eigen::VectorXd x = st.x;
            if (dx > 0 && pc.refine_iters > 0) {
                GradFn fn = [&](const Eigen::VectorXd& xx, Eigen::VectorXd* g) {
                    Eigen::VectorXd ag;
                    const double val = af_value_grad(em, xx, st.t, j, y_star,
                                                     use_pi, use_ei, g ? &ag : nullptr);
                    if (g) *g = -ag;
                    return -val;
                };
                MinimizeResult r = minimize_bounded(
                    fn, st.x, Eigen::VectorXd::Zero(dx), Eigen::VectorXd::Ones(dx),
                    pc.refine_iters);
                if (std::isfinite(r.f) && -r.f > v) {
                    v = -r.f;
                    x = r.x;
                }
            }
            if (v > src_best) {
                src_best = v;
                src_x = x;
                src_t = st.t;
            }
        }

        if (!std::isfinite(src_best)) continue;
        const double cn = src_best / costs[j];
        const bool wins = cn > best_cn || (cn == best_cn && src_best > best_raw);
        if (wins) {
            best_cn = cn;
            best_raw = src_best;
            best.x = unscale_from_unit(src_x, space);
            best.t = src_t;
            best.source = j;
            best.raw_utility = src_best;
            best.cost_normalized_utility = cn;
        }
    }

    if (best.source < 0) {
        // every source failed to produce a finite value; fall back to a random
        // candidate so the loop can continue
        Rng rng(derive_seed(pc.seed, 0xfa11));
        Eigen::VectorXd xu(dx);
        for (int i = 0; i < dx; ++i) xu[i] = rng.uniform();
        best.x = unscale_from_unit(xu, space);
        best.t = combos.front();
        best.source = sources.front();
        best.raw_utility = 0.0;
        best.cost_normalized_utility = 0.0;
    }
    return best;
}

}  // namespace mfbo
