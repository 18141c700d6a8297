#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfbo/domain.hpp"
#include "mfbo/engine.hpp"

namespace mfbo {

// One analytic multi-fidelity test problem: closed-form evaluators for every
// source plus the usual sampling costs and initial-design sizes for these
// functions. All problems minimize.
struct BenchmarkProblem {
    std::string name;
    std::string title;
    ProblemSpace space;
    std::vector<double> costs;
    std::vector<int> initial_sizes;
    std::vector<double> reference_rrmse;  // published values; 0 for the HF entry
    std::function<double(const Eigen::VectorXd&, int)> fn;

    // Strict: throws on out-of-bounds x or invalid source.
    double evaluate(const Eigen::VectorXd& x, int source) const;
};

std::vector<std::string> benchmark_names();
const BenchmarkProblem& get_benchmark(const std::string& name);

// First n points of a seeded scrambled Sobol sequence mapped to the space's
// bounds; categorical levels (if any) come from extra Sobol dimensions.
std::vector<MixedPoint> sobol_design(const ProblemSpace& space, int n,
                                     std::uint64_t seed);

// Per-source Sobol initial designs of the given sizes, evaluated through the
// problem's sources. Responses are in problem units (minimization).
MultiSourceDataset initial_design(const BenchmarkProblem& problem,
                                  const std::vector<int>& sizes, std::uint64_t seed);

// Relative root mean squared error of an LF source against HF over n_mc
// uniform points: sqrt(sum (y_l - y_h)^2 / (n_mc * var(y_h))).
double rrmse(const BenchmarkProblem& problem, int source, int n_mc = 10000,
             std::uint64_t seed = 0);

struct GroundTruth {
    double value = 0.0;
    Eigen::VectorXd x;
    std::string provenance;
};

// Dense quasi-random scan of the HF source followed by local refinement from
// the best candidates.
GroundTruth brute_force_optimum(const BenchmarkProblem& problem,
                                int n_scan = 1000000, std::uint64_t seed = 0);

// Adapter for the BO engine.
ObjectiveFn objective(const BenchmarkProblem& problem);

}  // namespace mfbo
