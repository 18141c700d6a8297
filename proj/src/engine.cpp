#include "mfbo/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "mfbo/rng.hpp"
#include "mfbo/sobol.hpp"

namespace mfbo {

namespace {
constexpr double kBudgetEps = 1e-9;

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t k) {
    return derive_seed(master, (purpose << 32) | (k & 0xffffffffULL));
}

double negate_if(bool flip, double v) { return flip ? -v : v; }

struct LoopSetup {
    MultiSourceDataset data;      // compact source indexing, maximization units
    std::vector<int> orig_of;     // compact index -> original source id
    std::vector<double> costs_c;  // compact costs
    bool minimize = false;
    int orig_num_sources = 0;
};

void finalize_counts(RunHistory& h, int orig_num_sources) {
    h.source_counts.assign(orig_num_sources, 0);
    for (const auto& r : h.records) h.source_counts[r.point.s]++;
}

void run_loop(const ObjectiveFn& f, LoopSetup s, AfChoice af, const BOConfig& cfg,
              RunHistory& h) {
    const ProblemSpace& sp = s.data.space;
    const int ds_c = sp.num_sources;
    const int hf_c = sp.hf_index;
    const int dx = sp.dx;

    double best_int = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x = Eigen::VectorXd::Zero(dx);
    for (int i = 0; i < s.data.n(); ++i) {
        if (s.data.points[i].s != hf_c) continue;
        if (s.data.responses[i] > best_int) {
            best_int = s.data.responses[i];
            best_x = s.data.points[i].x;
        }
    }
    if (!std::isfinite(best_int) && s.data.n() > 0) {
        // no HF samples yet: fall back to the best observed value anywhere
        int idx;
        best_int = s.data.responses.maxCoeff(&idx);
        best_x = s.data.points[idx].x;
    }
    h.cost_at_best = h.initial_cost;
    h.incumbent_x = best_x;

    Eigen::VectorXd prev_theta;
    bool have_prev = false;
    int iter = 0;

    for (;;) {
        const Termination term = check_termination(h, cfg);
        if (term == Termination::stop_budget) {
            h.stop = StopReason::budget;
            break;
        }
        if (term == Termination::stop_stagnation) {
            h.stop = StopReason::stagnation;
            break;
        }
        double cum = h.cum_cost();

        std::vector<int> afford;
        for (int j = 0; j < ds_c; ++j)
            if (s.costs_c[j] <= cfg.budget_max - cum + kBudgetEps) afford.push_back(j);

        FitConfig fc = cfg.fit;
        fc.seed = stream_seed(cfg.seed, 1, iter);
        if (have_prev) {
            fc.warm_starts = {prev_theta};
            fc.n_starts = cfg.refit_starts;
        }
        std::optional<FittedEmulator> fitted;
        try {
            fitted = FittedEmulator::fit(s.data, fc);
        } catch (const FitFailure&) {
            FitConfig fc2 = cfg.fit;
            fc2.seed = stream_seed(cfg.seed, 2, iter);
            try {
                fitted = FittedEmulator::fit(s.data, fc2);
            } catch (const FitFailure&) {
            }
        }
        if (!fitted) {
            h.aborted = true;
            h.stop = StopReason::aborted;
            break;
        }
        const FittedEmulator& em = *fitted;
        prev_theta = em.theta();
        have_prev = true;

        std::vector<double> incs(ds_c, best_int);
        for (int j = 0; j < ds_c; ++j) {
            double bj = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < s.data.n(); ++i)
                if (s.data.points[i].s == j) bj = std::max(bj, s.data.responses[i]);
            if (std::isfinite(bj)) incs[j] = bj;
        }

        AcquisitionDecision dec;
        if (af == AfChoice::KG) {
            std::vector<MixedPoint> grid;
            const Eigen::MatrixXd gU =
                sobol_points(cfg.kg_grid, dx, stream_seed(cfg.seed, 4, iter));
            const std::vector<int> t0(sp.dt(), 0);
            for (int i = 0; i < gU.rows(); ++i) {
                MixedPoint p;
                p.x = unscale_from_unit(gU.row(i).transpose(), sp);
                p.t = t0;
                p.s = hf_c;
                grid.push_back(std::move(p));
            }
            const Eigen::MatrixXd cU =
                sobol_points(cfg.aux.batch, dx, stream_seed(cfg.seed, 5, iter));
            const std::uint64_t kg_seed = stream_seed(cfg.seed, 6, iter);
            double best_v = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < cU.rows(); ++i) {
                MixedPoint p;
                p.x = unscale_from_unit(cU.row(i).transpose(), sp);
                p.t = t0;
                p.s = hf_c;
                const double v =
                    alpha_kg(em, p, grid, cfg.kg_fantasies, derive_seed(kg_seed, i));
                if (v > best_v) {
                    best_v = v;
                    dec.x = p.x;
                    dec.t = p.t;
                }
            }
            dec.source = hf_c;
            dec.raw_utility = best_v;
            dec.cost_normalized_utility = best_v / s.costs_c[hf_c];
        } else {
            ProposeConfig pc = cfg.aux;
            pc.af = (af == AfChoice::EI) ? ProposeConfig::Af::ei
                                         : ProposeConfig::Af::mfca;
            pc.seed = stream_seed(cfg.seed, 3, iter);
            pc.sources = afford;
            pc.extra_starts.clear();
            pc.extra_starts.push_back(scale_to_unit(best_x, sp));
            int overall;
            s.data.responses.maxCoeff(&overall);
            pc.extra_starts.push_back(scale_to_unit(s.data.points[overall].x, sp));
            dec = propose(em, s.costs_c, incs, pc);
        }

        MixedPoint queried;
        queried.x = dec.x;
        queried.t = dec.t;
        queried.s = s.orig_of[dec.source];
        const double y_prob = f(queried);
        const double y_int = negate_if(s.minimize, y_prob);
        cum += s.costs_c[dec.source];

        MixedPoint stored;
        stored.x = dec.x;
        stored.t = dec.t;
        stored.s = dec.source;
        s.data.points.push_back(stored);
        s.data.responses.conservativeResize(s.data.n());
        s.data.responses[s.data.n() - 1] = y_int;

        bool improved = false;
        if (dec.source == hf_c && y_int > best_int) {
            best_int = y_int;
            best_x = dec.x;
            improved = true;
            h.cost_at_best = cum;
            h.incumbent_x = dec.x;
        }

        IterationRecord rec;
        rec.iteration = iter + 1;
        rec.point = queried;
        rec.y = y_prob;
        rec.cost = s.costs_c[dec.source];
        rec.cum_cost = cum;
        rec.incumbent = negate_if(s.minimize, best_int);
        rec.improved = improved;
        rec.fit_nll = em.nll();
        rec.raw_utility = dec.raw_utility;
        rec.cost_normalized_utility = dec.cost_normalized_utility;
        h.records.push_back(rec);
        ++iter;
    }

    h.final_incumbent = negate_if(s.minimize, best_int);
    finalize_counts(h, s.orig_num_sources);
}

LoopSetup compact_setup(const MultiSourceDataset& initial, const std::vector<int>& kept) {
    LoopSetup s;
    s.minimize = initial.space.direction == Direction::minimize;
    s.orig_num_sources = initial.space.num_sources;
    s.orig_of = kept;

    std::vector<int> comp_of(initial.space.num_sources, -1);
    for (int c = 0; c < static_cast<int>(kept.size()); ++c) comp_of[kept[c]] = c;

    s.data.space = initial.space;
    s.data.space.num_sources = static_cast<int>(kept.size());
    s.data.space.hf_index = comp_of[initial.space.hf_index];
    for (int j : kept) s.costs_c.push_back(initial.costs[j]);
    s.data.costs = s.costs_c;

    std::vector<double> resp;
    for (int i = 0; i < initial.n(); ++i) {
        const int c = comp_of[initial.points[i].s];
        if (c < 0) continue;
        MixedPoint p = initial.points[i];
        p.s = c;
        s.data.points.push_back(std::move(p));
        resp.push_back(negate_if(s.minimize, initial.responses[i]));
    }
    s.data.responses.resize(static_cast<Eigen::Index>(resp.size()));
    for (std::size_t i = 0; i < resp.size(); ++i)
        s.data.responses[static_cast<Eigen::Index>(i)] = resp[i];
    return s;
}

double initial_cost_of(const MultiSourceDataset& initial) {
    double c = 0.0;
    for (const auto& p : initial.points) c += initial.costs[p.s];
    return c;
}
}  // namespace

std::string af_name(AfChoice af) {
    switch (af) {
        case AfChoice::MFCA: return "mfca";
        case AfChoice::EI: return "ei";
        case AfChoice::PI: return "pi";
        case AfChoice::KG: return "kg";
    }
    return "?";
}

std::string stop_name(StopReason r) {
    switch (r) {
        case StopReason::none: return "none";
        case StopReason::budget: return "budget";
        case StopReason::stagnation: return "stagnation";
        case StopReason::aborted: return "aborted";
    }
    return "?";
}

ExclusionReport step0_exclude(const MultiSourceDataset& initial, const BOConfig& cfg,
                              FidelityManifold* manifold_out) {
    const ProblemSpace& sp = initial.space;
    if (sp.num_sources < 2)
        throw std::invalid_argument("step0_exclude requires at least 2 sources");
    ExclusionReport rep;
    rep.enabled = true;
    rep.threshold = cfg.exclusion_correlation_min;

    std::vector<int> counts(sp.num_sources, 0);
    for (const auto& p : initial.points) counts[p.s]++;

    FitConfig fc = cfg.fit;
    fc.n_starts = std::max(cfg.fit.n_starts, cfg.step0_starts);
    fc.seed = stream_seed(cfg.seed, 9, 0);
    std::optional<FittedEmulator> em;
    try {
        em = FittedEmulator::fit(initial, fc);
    } catch (const FitFailure&) {
        rep.fit_ok = false;
    }
    if (!rep.fit_ok) {
        for (int j = 0; j < sp.num_sources; ++j) rep.kept.push_back(j);
        return rep;
    }

    const FidelityManifold m = em->manifold();
    if (manifold_out) *manifold_out = m;
    rep.h = m.h;
    rep.dist_to_hf.resize(sp.num_sources);
    rep.corr_to_hf.resize(sp.num_sources);
    for (int j = 0; j < sp.num_sources; ++j) {
        rep.dist_to_hf[j] = m.dist(j, sp.hf_index);
        rep.corr_to_hf[j] = m.corr(j, sp.hf_index);
    }
    for (int j = 0; j < sp.num_sources; ++j) {
        // a source with no initial samples has an unidentified latent position,
        // so it cannot be judged biased yet and stays in
        const bool keep = j == sp.hf_index || counts[j] == 0 ||
                          rep.corr_to_hf[j] >= rep.threshold;
        if (keep)
            rep.kept.push_back(j);
        else
            rep.excluded.push_back(j);
    }
    return rep;
}

Termination check_termination(const RunHistory& h, const BOConfig& cfg) {
    double min_cost = std::numeric_limits<double>::infinity();
    for (int j : h.exclusion.kept) min_cost = std::min(min_cost, h.costs[j]);
    if (!std::isfinite(min_cost))
        for (double c : h.costs) min_cost = std::min(min_cost, c);
    if (h.cum_cost() + min_cost > cfg.budget_max + kBudgetEps)
        return Termination::stop_budget;

    int stale = 0;
    for (auto it = h.records.rbegin(); it != h.records.rend() && !it->improved; ++it)
        ++stale;
    if (stale >= cfg.stagnation_limit) return Termination::stop_stagnation;
    return Termination::proceed;
}

RunHistory run_single_fidelity(const ObjectiveFn& f, const MultiSourceDataset& initial,
                               const BOConfig& cfg) {
    initial.validate();
    if (cfg.af_choice == AfChoice::MFCA)
        throw std::invalid_argument("run_single_fidelity: use run_mfca for the MFCA AF");
    const int hf = initial.space.hf_index;
    for (const auto& p : initial.points)
        if (p.s != hf)
            throw std::invalid_argument("run_single_fidelity requires HF-only initial data");

    RunHistory h;
    h.budget_max = cfg.budget_max;
    h.stagnation_limit = cfg.stagnation_limit;
    h.costs = initial.costs;
    h.initial_cost = initial_cost_of(initial);
    h.exclusion.enabled = false;
    h.exclusion.threshold = cfg.exclusion_correlation_min;
    h.exclusion.kept = {hf};

    run_loop(f, compact_setup(initial, {hf}), cfg.af_choice, cfg, h);
    return h;
}

RunHistory run_mfca(const ObjectiveFn& f, const MultiSourceDataset& initial,
                    const BOConfig& cfg) {
    initial.validate();
    if (cfg.af_choice != AfChoice::MFCA)
        throw std::invalid_argument("run_mfca requires the MFCA AF");

    RunHistory h;
    h.budget_max = cfg.budget_max;
    h.stagnation_limit = cfg.stagnation_limit;
    h.costs = initial.costs;
    h.initial_cost = initial_cost_of(initial);

    const int ds = initial.space.num_sources;
    if (cfg.exclude && ds >= 2) {
        MultiSourceDataset internal = initial;
        if (initial.space.direction == Direction::minimize)
            internal.responses = -internal.responses;
        h.exclusion = step0_exclude(internal, cfg, nullptr);
    } else {
        h.exclusion.enabled = false;
        h.exclusion.threshold = cfg.exclusion_correlation_min;
        for (int j = 0; j < ds; ++j) h.exclusion.kept.push_back(j);
    }

    const AfChoice af = (h.exclusion.kept.size() == 1) ? AfChoice::PI : AfChoice::MFCA;
    run_loop(f, compact_setup(initial, h.exclusion.kept), af, cfg, h);
    return h;
}

}  // namespace mfbo
