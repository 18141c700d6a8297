#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mfbo/lmgp.hpp"

namespace mfbo {

// Posterior at a candidate, plus the incumbent for the relevant source, all in
// original units under the maximization convention.
struct PosteriorSummary {
    double mu = 0.0;
    double sigma = 0.0;
    double y_star = 0.0;
};

struct AcquisitionDecision {
    Eigen::VectorXd x;  // original units
    std::vector<int> t;
    int source = 0;
    double raw_utility = 0.0;
    double cost_normalized_utility = 0.0;
};

// Probability of improvement; sigma=0 uses the indicator limit.
double alpha_pi(const PosteriorSummary& p);
// Expected improvement; sigma=0 uses the exploitation limit max(mu - y*, 0).
double alpha_ei(const PosteriorSummary& p);
// Exploration part of EI used for low-fidelity sources; sigma=0 gives 0.
double alpha_lf(const PosteriorSummary& p);

// Monte-Carlo knowledge gradient: average max-over-grid posterior mean after M
// fantasy observations at u, minus the current max-over-grid mean. Kernel
// hyperparameters stay frozen; the fantasy update is a rank-1 Cholesky append.
// Returns 0 when u duplicates a training point.
double alpha_kg(const FittedEmulator& em, const MixedPoint& u,
                const std::vector<MixedPoint>& candidate_grid, int fantasies,
                std::uint64_t seed);

// Cost-normalized composite: alpha_pi for the HF source, alpha_lf otherwise,
// divided by the source cost. incumbents[j] is y* for source j.
double alpha_mfca(const FittedEmulator& em, const MixedPoint& u, int j,
                  const std::vector<double>& costs,
                  const std::vector<double>& incumbents);

struct ProposeConfig {
    // mfca: alpha_pi on the HF source, alpha_lf elsewhere; ei: alpha_ei on
    // every listed source (single-fidelity EI).
    enum class Af { mfca, ei };
    Af af = Af::mfca;
    int multistarts = 32;
    int batch = 256;          // Sobol candidates screened per source
    int refine_iters = 20;
    std::uint64_t seed = 0;
    std::vector<int> sources;               // empty means all sources
    std::vector<Eigen::VectorXd> extra_starts;  // unit-scaled, e.g. best-seen
};

// Maximizes alpha_mfca per source by multi-start bounded search and returns
// the best decision after cost normalization; ties break toward higher raw
// utility, then the lower source index.
AcquisitionDecision propose(const FittedEmulator& em,
                            const std::vector<double>& costs,
                            const std::vector<double>& incumbents,
                            const ProposeConfig& pc);

}  // namespace mfbo
