#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfbo/acquisition.hpp"
#include "mfbo/domain.hpp"
#include "mfbo/lmgp.hpp"

namespace mfbo {

enum class AfChoice { MFCA, EI, PI, KG };
enum class StopReason { none, budget, stagnation, aborted };
enum class Termination { proceed, stop_budget, stop_stagnation };

std::string af_name(AfChoice af);
std::string stop_name(StopReason r);

struct BOConfig {
    double budget_max = 40000.0;
    int stagnation_limit = 50;
    AfChoice af_choice = AfChoice::MFCA;
    std::uint64_t seed = 0;
    double exclusion_correlation_min = 0.05;
    bool exclude = true;
    int refit_starts = 3;     // multistarts on warm refits (first fit uses fit.n_starts)
    // The step-0 fit runs once and its exclusions are permanent, so it gets a
    // much larger multistart budget: the latent source positions have spurious
    // local modes that scatter informative sources.
    int step0_starts = 96;
    int kg_fantasies = 8;
    int kg_grid = 256;
    FitConfig fit;
    ProposeConfig aux;
};

struct ExclusionReport {
    bool enabled = false;
    bool fit_ok = true;
    double threshold = 0.05;
    std::vector<int> kept;      // original source indices, ascending
    std::vector<int> excluded;
    Eigen::MatrixXd h;          // latent source positions from the step-0 fit
    Eigen::VectorXd dist_to_hf;
    Eigen::VectorXd corr_to_hf;
};

struct IterationRecord {
    int iteration = 0;  // 1-based
    MixedPoint point;   // source id in the problem's original numbering
    double y = 0.0;     // problem units
    double cost = 0.0;
    double cum_cost = 0.0;
    double incumbent = 0.0;  // best HF sample so far, problem units
    bool improved = false;
    double fit_nll = 0.0;
    double raw_utility = 0.0;
    double cost_normalized_utility = 0.0;
};

struct RunHistory {
    ExclusionReport exclusion;
    double budget_max = 0.0;
    int stagnation_limit = 0;
    std::vector<double> costs;  // per original source
    double initial_cost = 0.0;
    std::vector<IterationRecord> records;
    StopReason stop = StopReason::none;
    bool aborted = false;
    double final_incumbent = 0.0;  // problem units
    Eigen::VectorXd incumbent_x;
    double cost_at_best = 0.0;  // cumulative cost when the incumbent was reached
    std::vector<int> source_counts;  // queried samples per original source

    double cum_cost() const {
        return records.empty() ? initial_cost : records.back().cum_cost;
    }
};

// Objective in problem units; the engine handles min/max internally based on
// space.direction.
using ObjectiveFn = std::function<double(const MixedPoint&)>;

// Fits on the initial data and drops every LF source whose implied
// correlation with the HF source falls below the threshold. A fit failure
// keeps all sources and clears fit_ok.
ExclusionReport step0_exclude(const MultiSourceDataset& initial, const BOConfig& cfg,
                              FidelityManifold* manifold_out = nullptr);

// Budget rule: stop when the cheapest kept source no longer fits in the
// remaining budget. Stagnation rule: stop when the trailing run of
// non-improving iterations reaches the limit. Budget is checked first.
Termination check_termination(const RunHistory& h, const BOConfig& cfg);

// Single-fidelity BO with EI, PI, or KG on HF-only data.
RunHistory run_single_fidelity(const ObjectiveFn& f, const MultiSourceDataset& initial,
                               const BOConfig& cfg);

// Step-0 exclusion, then the cost-aware multi-fidelity loop. A
// post-exclusion single source degrades to single-fidelity PI.
RunHistory run_mfca(const ObjectiveFn& f, const MultiSourceDataset& initial,
                    const BOConfig& cfg);

}  // namespace mfbo
