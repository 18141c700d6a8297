#include "mfbo/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfbo/optimize.hpp"
#include "mfbo/rng.hpp"
#include "mfbo/sobol.hpp"

namespace mfbo {

namespace {
constexpr double kPi = std::numbers::pi;

double double_well(const Eigen::VectorXd& x, int s) {
    const double v = x[0];
    const double common = 0.6 * std::pow(v, 4) - 0.3 * std::pow(v, 3) - 3.0 * v * v;
    return s == 0 ? common + 2.0 * v : common - 1.2 * v;
}

double rosenbrock(const Eigen::VectorXd& x, int s) {
    const double a = (1.0 - x[0]) * (1.0 - x[0]);
    if (s == 1) return a + 100.0;
    const double b = x[1] - x[0] * x[0];
    return a + 100.0 * b * b - 456.3;
}

// sources ordered HF, LF1, LF2, LF3, LF4
double borehole5(const Eigen::VectorXd& x, int s) {
    const double rw = x[0], r = x[1], Tu = x[2], Hu = x[3], Tl = x[4], Hl = x[5],
                 L = x[6], Kw = x[7];
    const double lnr = std::log(r / rw);
    const double pipe = L * Tu / (lnr * rw * rw * Kw);
    switch (s) {
        case 0:
            return 2.0 * kPi * Tu * (Hu - Hl) / (lnr * (1.0 + 2.0 * pipe + Tu / Tl));
        case 1:
            return 2.0 * kPi * Tu * (Hu - 0.8 * Hl) /
                   (lnr * (1.0 + 1.0 * pipe + Tu / Tl));
        case 2:
            return 2.0 * kPi * Tu * (Hu - Hl) /
                   (lnr * (1.0 + 8.0 * pipe + 0.75 * Tu / Tl));
        case 3:
            return 2.0 * kPi * Tu * (1.09 * Hu - Hl) /
                   (std::log(4.0 * r / rw) * (1.0 + 3.0 * pipe + Tu / Tl));
        case 4:
            return 2.0 * kPi * Tu * (1.05 * Hu - Hl) /
                   (std::log(2.0 * r / rw) * (1.0 + 3.0 * pipe + Tu / Tl));
    }
    return 0.0;
}

// sources ordered HF, LF1, LF2, LF3
double wing(const Eigen::VectorXd& x, int s) {
    const double sw = x[0], wfw = x[1], A = x[2], lam_deg = x[3], q = x[4],
                 lam = x[5], tc = x[6], Nz = x[7], Wdg = x[8], wp = x[9];
    const double cl = std::cos(lam_deg * kPi / 180.0);
    const double e = (s == 2) ? 0.8 : (s == 3) ? 0.9 : 0.758;
    const double base = 0.036 * std::pow(sw, e) * std::pow(wfw, 0.0035) *
                        std::pow(A / (cl * cl), 0.6) * std::pow(q, 0.006) *
                        std::pow(lam, 0.04) * std::pow(100.0 * tc / cl, -0.3) *
                        std::pow(Nz * Wdg, 0.49);
    switch (s) {
        case 0: return base + sw * wp;
        case 1:
        case 2: return base + wp;
        case 3: return base;
    }
    return 0.0;
}

ProblemSpace numeric_space(std::vector<std::array<double, 2>> bounds, int sources) {
    ProblemSpace sp;
    sp.dx = static_cast<int>(bounds.size());
    sp.numeric_bounds = std::move(bounds);
    sp.num_sources = sources;
    sp.hf_index = 0;
    sp.direction = Direction::minimize;
    return sp;
}

const std::vector<std::array<double, 2>> kBoreholeBounds = {
    {{0.05, 0.15}},     {{100.0, 50000.0}}, {{63070.0, 115600.0}}, {{990.0, 1110.0}},
    {{63.1, 116.0}},    {{700.0, 820.0}},   {{1120.0, 1680.0}},    {{9855.0, 12045.0}}};

const std::vector<std::array<double, 2>> kWingBounds = {
    {{150.0, 200.0}}, {{220.0, 300.0}}, {{6.0, 10.0}},  {{-10.0, 10.0}}, {{16.0, 45.0}},
    {{0.5, 1.0}},     {{0.08, 0.18}},   {{2.5, 6.0}},   {{1700.0, 2500.0}}, {{0.025, 0.08}}};

std::vector<BenchmarkProblem> build_registry() {
    std::vector<BenchmarkProblem> v;
    {
        BenchmarkProblem p;
        p.name = "double-well";
        p.title = "Double-well potential (1D, 2 sources)";
        p.space = numeric_space({{{-3.0, 3.0}}}, 2);
        p.costs = {1000.0, 1.0};
        p.initial_sizes = {5, 0};
        p.reference_rrmse = {0.0, 1.14};
        p.fn = double_well;
        v.push_back(std::move(p));
    }
    {
        BenchmarkProblem p;
        p.name = "rosenbrock";
        p.title = "Rosenbrock (2D, 2 sources)";
        p.space = numeric_space({{{-2.0, 2.0}}, {{-2.0, 2.0}}}, 2);
        p.costs = {1000.0, 1.0};
        p.initial_sizes = {5, 10};
        p.reference_rrmse = {0.0, 1.42};
        p.fn = rosenbrock;
        v.push_back(std::move(p));
    }
    {
        BenchmarkProblem p;
        p.name = "borehole";
        p.title = "Borehole (8D, 5 sources)";
        p.space = numeric_space(kBoreholeBounds, 5);
        p.costs = {1000.0, 100.0, 10.0, 100.0, 10.0};
        p.initial_sizes = {5, 5, 50, 5, 50};
        p.reference_rrmse = {0.0, 4.40, 1.54, 1.30, 1.3};
        p.fn = borehole5;
        v.push_back(std::move(p));
    }
    {
        BenchmarkProblem p;
        p.name = "borehole3";
        p.title = "Borehole (8D, HF + two low-bias LF sources)";
        p.space = numeric_space(kBoreholeBounds, 3);
        p.costs = {1000.0, 100.0, 10.0};
        p.initial_sizes = {5, 5, 50};
        p.reference_rrmse = {0.0, 1.30, 1.3};
        // reuse the five-source table: local sources 1,2 are LF3,LF4
        p.fn = [](const Eigen::VectorXd& x, int s) {
            return borehole5(x, s == 0 ? 0 : s + 2);
        };
        v.push_back(std::move(p));
    }
    {
        BenchmarkProblem p;
        p.name = "wing";
        p.title = "Wing weight (10D, 4 sources)";
        p.space = numeric_space(kWingBounds, 4);
        p.costs = {1000.0, 100.0, 10.0, 1.0};
        p.initial_sizes = {5, 5, 10, 50};
        p.reference_rrmse = {0.0, 0.19, 1.14, 5.75};
        p.fn = wing;
        v.push_back(std::move(p));
    }
    return v;
}

const std::vector<BenchmarkProblem>& registry() {
    static const std::vector<BenchmarkProblem> r = build_registry();
    return r;
}
}  // namespace

double BenchmarkProblem::evaluate(const Eigen::VectorXd& x, int source) const {
    if (source < 0 || source >= space.num_sources)
        throw std::invalid_argument("evaluate: invalid source for " + name);
    if (x.size() != space.dx)
        throw std::invalid_argument("evaluate: wrong dimension for " + name);
    for (int i = 0; i < space.dx; ++i) {
        const auto& [lo, hi] = space.numeric_bounds[i];
        if (!(x[i] >= lo && x[i] <= hi))
            throw std::out_of_range("evaluate: coordinate " + std::to_string(i) +
                                    " out of bounds for " + name);
    }
    return fn(x, source);
}

std::vector<std::string> benchmark_names() {
    std::vector<std::string> names;
    for (const auto& p : registry()) names.push_back(p.name);
    return names;
}

const BenchmarkProblem& get_benchmark(const std::string& name) {
    for (const auto& p : registry())
        if (p.name == name) return p;
    throw std::invalid_argument("unknown benchmark: " + name);
}

std::vector<MixedPoint> sobol_design(const ProblemSpace& space, int n,
                                     std::uint64_t seed) {
    std::vector<MixedPoint> pts;
    if (n == 0) return pts;
    const int dims = space.dx + space.dt();
    const Eigen::MatrixXd U = sobol_points(n, dims, seed);
    for (int i = 0; i < n; ++i) {
        MixedPoint p;
        p.x = unscale_from_unit(U.row(i).head(space.dx).transpose(), space);
        for (int b = 0; b < space.dt(); ++b) {
            const int levels = space.categorical_levels[b];
            int k = static_cast<int>(U(i, space.dx + b) * levels);
            p.t.push_back(std::min(k, levels - 1));
        }
        p.s = space.hf_index;
        pts.push_back(std::move(p));
    }
    return pts;
}

MultiSourceDataset initial_design(const BenchmarkProblem& problem,
                                  const std::vector<int>& sizes, std::uint64_t seed) {
    if (static_cast<int>(sizes.size()) != problem.space.num_sources)
        throw std::invalid_argument("initial_design: one size per source required");
    MultiSourceDataset data;
    data.space = problem.space;
    data.costs = problem.costs;
    std::vector<double> resp;
    for (int s = 0; s < problem.space.num_sources; ++s) {
        auto pts = sobol_design(problem.space, sizes[s], derive_seed(seed, 7000 + s));
        for (auto& p : pts) {
            p.s = s;
            resp.push_back(problem.evaluate(p.x, s));
            data.points.push_back(std::move(p));
        }
    }
    data.responses.resize(static_cast<Eigen::Index>(resp.size()));
    for (std::size_t i = 0; i < resp.size(); ++i)
        data.responses[static_cast<Eigen::Index>(i)] = resp[i];
    return data;
}

double rrmse(const BenchmarkProblem& problem, int source, int n_mc,
             std::uint64_t seed) {
    if (source == problem.space.hf_index)
        throw std::invalid_argument("rrmse: source must differ from HF");
    if (n_mc < 2) throw std::invalid_argument("rrmse: n_mc too small");
    Rng rng(derive_seed(seed, 0x22e));
    Eigen::VectorXd x(problem.space.dx);
    double sum_h = 0.0, sum_h2 = 0.0, sum_d2 = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        for (int d = 0; d < problem.space.dx; ++d) {
            const auto& [lo, hi] = problem.space.numeric_bounds[d];
            x[d] = rng.uniform(lo, hi);
        }
        const double yh = problem.evaluate(x, problem.space.hf_index);
        const double yl = problem.evaluate(x, source);
        sum_h += yh;
        sum_h2 += yh * yh;
        sum_d2 += (yl - yh) * (yl - yh);
    }
    const double mean_h = sum_h / n_mc;
    const double var_h = sum_h2 / n_mc - mean_h * mean_h;
    if (!(var_h > 0)) throw std::runtime_error("rrmse: HF variance is zero");
    return std::sqrt(sum_d2 / (n_mc * var_h));
}

GroundTruth brute_force_optimum(const BenchmarkProblem& problem, int n_scan,
                                std::uint64_t seed) {
    const ProblemSpace& sp = problem.space;
    const int hf = sp.hf_index;
    const int dx = sp.dx;

    SobolSequence seq(dx, seed);
    struct Cand {
        double f;
        Eigen::VectorXd x;
    };
    const int keep = 100;
    std::vector<Cand> best;
    best.reserve(keep + 1);
    Eigen::VectorXd u(dx), x(dx);
    std::vector<double> row(dx);
    for (int i = 0; i < n_scan; ++i) {
        seq.next(row.data());
        for (int d = 0; d < dx; ++d) u[d] = row[d];
        x = unscale_from_unit(u, sp);
        const double f = problem.fn(x, hf);
        if (static_cast<int>(best.size()) < keep || f < best.back().f) {
            best.push_back({f, x});
            std::sort(best.begin(), best.end(),
                      [](const Cand& a, const Cand& b) { return a.f < b.f; });
            if (static_cast<int>(best.size()) > keep) best.pop_back();
        }
    }

    auto unit_obj = [&](const Eigen::VectorXd& uu) {
        return problem.fn(unscale_from_unit(uu, sp), hf);
    };
    GroundTruth gt;
    gt.value = best.front().f;
    gt.x = best.front().x;
    for (const auto& c : best) {
        const Eigen::VectorXd u0 = scale_to_unit(c.x, sp);
        MinimizeResult r = minimize_bounded(with_fd_gradient(unit_obj, 1e-8), u0,
                                            Eigen::VectorXd::Zero(dx),
                                            Eigen::VectorXd::Ones(dx), 200);
        if (std::isfinite(r.f) && r.f < gt.value) {
            gt.value = r.f;
            gt.x = unscale_from_unit(r.x, sp);
        }
    }
    gt.provenance = "quasi-random scan (" + std::to_string(n_scan) +
                    " points) + local refinement";
    return gt;
}

ObjectiveFn objective(const BenchmarkProblem& problem) {
    return [problem](const MixedPoint& p) { return problem.evaluate(p.x, p.s); };
}

}  // namespace mfbo
