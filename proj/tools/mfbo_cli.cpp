#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "mfbo/benchmarks.hpp"
#include "mfbo/engine.hpp"
#include "mfbo/io.hpp"
#include "mfbo/lmgp.hpp"
#include "mfbo/rng.hpp"
#include "mfbo/sobol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfbo;

namespace {

struct Options {
    std::string config_path;
    std::string problem = "double-well";
    std::string data_path;
    std::string af = "mfca";
    int reps = 1;
    int jobs = 1;
    std::uint64_t seed = 0;
    double budget = 40000.0;
    int stagnation = 50;
    bool no_exclude = false;
    double threshold = 0.05;
    std::string out;
    std::vector<double> costs;
    std::vector<int> sizes;
    int emulate_sources = 0;  // 0 means all
    int n_test = 1000;
    int n_mc = 10000;
};

void apply_config_file(Options& o) {
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot read config: " + o.config_path);
    json j = json::parse(in);
    auto set = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    set("problem", o.problem);
    set("data", o.data_path);
    set("af", o.af);
    set("reps", o.reps);
    set("jobs", o.jobs);
    set("seed", o.seed);
    set("budget", o.budget);
    set("stagnation", o.stagnation);
    set("threshold", o.threshold);
    set("out", o.out);
    set("costs", o.costs);
    set("initial_sizes", o.sizes);
    if (j.contains("exclude")) o.no_exclude = !j.at("exclude").get<bool>();
}

std::string default_out() {
    if (const char* env = std::getenv("MFBO_OUT")) return env;
    return "out";
}

AfChoice parse_af(const std::string& s) {
    if (s == "mfca") return AfChoice::MFCA;
    if (s == "ei") return AfChoice::EI;
    if (s == "pi") return AfChoice::PI;
    if (s == "kg") return AfChoice::KG;
    throw CLI::ValidationError("--af", "unknown acquisition function: " + s);
}

BenchmarkProblem resolve_problem(const Options& o) {
    BenchmarkProblem p = get_benchmark(o.problem);
    if (!o.costs.empty()) {
        if (static_cast<int>(o.costs.size()) != p.space.num_sources)
            throw std::runtime_error("costs override must list one cost per source");
        for (double c : o.costs)
            if (!(c > 0)) throw std::runtime_error("costs must be positive");
        p.costs = o.costs;
    }
    if (!o.sizes.empty()) {
        if (static_cast<int>(o.sizes.size()) != p.space.num_sources)
            throw std::runtime_error("initial_sizes override must list one size per source");
        for (int n : o.sizes)
            if (n < 0) throw std::runtime_error("initial sizes must be non-negative");
        p.initial_sizes = o.sizes;
    }
    return p;
}

BOConfig make_bo_config(const Options& o, std::uint64_t seed) {
    BOConfig cfg;
    cfg.budget_max = o.budget;
    cfg.stagnation_limit = o.stagnation;
    cfg.af_choice = parse_af(o.af);
    cfg.seed = seed;
    cfg.exclusion_correlation_min = o.threshold;
    cfg.exclude = !o.no_exclude;
    return cfg;
}

int cmd_list() {
    for (const auto& name : benchmark_names()) {
        const BenchmarkProblem& p = get_benchmark(name);
        std::printf("%-12s %s\n", p.name.c_str(), p.title.c_str());
        std::printf("  dx=%d sources=%d hf=%d\n", p.space.dx, p.space.num_sources,
                    p.space.hf_index);
        std::printf("  source  cost      n0   reference RRMSE\n");
        for (int s = 0; s < p.space.num_sources; ++s) {
            if (s == p.space.hf_index)
                std::printf("  %-6d  %-8.4g  %-4d -\n", s, p.costs[s],
                            p.initial_sizes[s]);
            else
                std::printf("  %-6d  %-8.4g  %-4d %.4g\n", s, p.costs[s],
                            p.initial_sizes[s], p.reference_rrmse[s]);
        }
    }
    return 0;
}

int cmd_rrmse(const Options& o) {
    const BenchmarkProblem p = resolve_problem(o);
    std::vector<std::string> lines;
    std::printf("problem=%s n_mc=%d seed=%llu\n", p.name.c_str(), o.n_mc,
                static_cast<unsigned long long>(o.seed));
    std::printf("source  rrmse       reference\n");
    std::ostringstream csv;
    csv << "source,rrmse,reference,n_mc,seed\n";
    for (int s = 0; s < p.space.num_sources; ++s) {
        if (s == p.space.hf_index) continue;
        const double r = rrmse(p, s, o.n_mc, o.seed);
        std::printf("%-6d  %-10.4f  %.4g\n", s, r, p.reference_rrmse[s]);
        csv << s << "," << r << "," << p.reference_rrmse[s] << "," << o.n_mc << ","
            << o.seed << "\n";
    }
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        std::ofstream f(fs::path(o.out) / "rrmse.csv");
        f << csv.str();
    }
    return 0;
}

int cmd_manifold(const Options& o) {
    MultiSourceDataset data;
    if (!o.data_path.empty()) {
        TableSchema schema;
        data = read_delimited(o.data_path, schema, o.costs);
    } else {
        const BenchmarkProblem p = resolve_problem(o);
        data = initial_design(p, p.initial_sizes, o.seed);
    }
    if (data.space.num_sources < 2)
        throw std::runtime_error("manifold requires at least 2 sources");

    BOConfig cfg = make_bo_config(o, o.seed);
    cfg.af_choice = AfChoice::MFCA;
    const ExclusionReport rep = step0_exclude(data, cfg, nullptr);
    if (!rep.fit_ok) throw std::runtime_error("manifold: emulator fit failed");

    std::printf("source  h-coordinates        dist_to_hf  corr_to_hf  verdict\n");
    for (Eigen::Index s = 0; s < rep.h.rows(); ++s) {
        std::ostringstream hh;
        for (Eigen::Index c = 0; c < rep.h.cols(); ++c) {
            if (c) hh << " ";
            hh << std::fixed;
            hh.precision(4);
            hh << rep.h(s, c);
        }
        const bool kept = std::find(rep.kept.begin(), rep.kept.end(),
                                    static_cast<int>(s)) != rep.kept.end();
        std::printf("%-6lld %-20s %-11.4f %-11.4f %s\n",
                    static_cast<long long>(s), hh.str().c_str(), rep.dist_to_hf[s],
                    rep.corr_to_hf[s], kept ? "kept" : "excluded");
    }
    const std::string out = o.out.empty() ? default_out() : o.out;
    fs::create_directories(out);
    write_manifold_csv(rep, (fs::path(out) / "manifold.csv").string());
    return 0;
}

int cmd_emulate(const Options& o) {
    BenchmarkProblem p = resolve_problem(o);
    const int use_sources =
        o.emulate_sources > 0
            ? std::min(o.emulate_sources, p.space.num_sources)
            : p.space.num_sources;

    const std::string out = o.out.empty() ? default_out() : o.out;
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "mse.csv");
    csv << "rep,seed,mse_lmgp,mse_sf\n";
    csv.precision(17);

    int wins = 0;
    for (int rep = 0; rep < o.reps; ++rep) {
        const std::uint64_t seed_i = derive_seed(o.seed, rep);

        BenchmarkProblem sub = p;
        sub.space.num_sources = use_sources;
        sub.costs.resize(use_sources);
        sub.initial_sizes.resize(use_sources);
        MultiSourceDataset data = initial_design(sub, sub.initial_sizes, seed_i);

        MultiSourceDataset hf_only;
        hf_only.space = sub.space;
        hf_only.space.num_sources = 1;
        hf_only.space.hf_index = 0;
        hf_only.costs = {sub.costs[sub.space.hf_index]};
        std::vector<double> resp;
        for (int i = 0; i < data.n(); ++i) {
            if (data.points[i].s != sub.space.hf_index) continue;
            MixedPoint q = data.points[i];
            q.s = 0;
            hf_only.points.push_back(q);
            resp.push_back(data.responses[i]);
        }
        hf_only.responses.resize(static_cast<Eigen::Index>(resp.size()));
        for (std::size_t i = 0; i < resp.size(); ++i)
            hf_only.responses[static_cast<Eigen::Index>(i)] = resp[i];

        FitConfig fc;
        fc.seed = derive_seed(seed_i, 1);
        const FittedEmulator lmgp = FittedEmulator::fit(data, fc);
        FitConfig fc2;
        fc2.seed = derive_seed(seed_i, 2);
        const FittedEmulator sf = FittedEmulator::fit(hf_only, fc2);

        const Eigen::MatrixXd testU =
            sobol_points(o.n_test, sub.space.dx, derive_seed(seed_i, 3));
        double se_lmgp = 0.0, se_sf = 0.0;
        const std::vector<int> t0;
        Eigen::VectorXd m1, v1, m2, v2;
        lmgp.predict_scaled(testU, t0, sub.space.hf_index, m1, v1);
        sf.predict_scaled(testU, t0, 0, m2, v2);
        for (int i = 0; i < o.n_test; ++i) {
            const Eigen::VectorXd x =
                unscale_from_unit(testU.row(i).transpose(), sub.space);
            const double truth = sub.evaluate(x, sub.space.hf_index);
            se_lmgp += (m1[i] - truth) * (m1[i] - truth);
            se_sf += (m2[i] - truth) * (m2[i] - truth);
        }
        const double mse_lmgp = se_lmgp / o.n_test;
        const double mse_sf = se_sf / o.n_test;
        if (mse_lmgp < mse_sf) ++wins;
        csv << rep << "," << seed_i << "," << mse_lmgp << "," << mse_sf << "\n";
        std::printf("rep %-3d mse_lmgp=%-12.6g mse_sf=%-12.6g %s\n", rep, mse_lmgp,
                    mse_sf, mse_lmgp < mse_sf ? "lmgp" : "sf");
    }
    std::printf("lmgp wins %d/%d\n", wins, o.reps);
    return 0;
}

int cmd_optimize(const Options& o) {
    const BenchmarkProblem p = resolve_problem(o);
    const AfChoice af = parse_af(o.af);
    const std::string out = o.out.empty() ? default_out() : o.out;
    fs::create_directories(out);

    std::vector<std::optional<RunHistory>> results(o.reps);
    std::vector<std::string> errors(o.reps);
    std::atomic<int> next{0};
    const int jobs = std::max(1, std::min(o.jobs, o.reps));

    auto worker = [&]() {
        for (;;) {
            const int rep = next.fetch_add(1);
            if (rep >= o.reps) return;
            const std::uint64_t seed_i = derive_seed(o.seed, rep);
            try {
                std::vector<int> sizes = p.initial_sizes;
                if (af != AfChoice::MFCA)
                    for (int s = 0; s < p.space.num_sources; ++s)
                        if (s != p.space.hf_index) sizes[s] = 0;
                const MultiSourceDataset data = initial_design(p, sizes, seed_i);
                BOConfig cfg = make_bo_config(o, seed_i);
                RunHistory h = (af == AfChoice::MFCA)
                                   ? run_mfca(objective(p), data, cfg)
                                   : run_single_fidelity(objective(p), data, cfg);
                write_history_ndjson(
                    h, cfg, (fs::path(out) / ("run_" + std::to_string(rep) + ".ndjson"))
                                .string());
                results[rep] = std::move(h);
            } catch (const std::exception& e) {
                errors[rep] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<SummaryRow> rows;
    bool ok = true;
    for (int rep = 0; rep < o.reps; ++rep) {
        if (!results[rep]) {
            std::fprintf(stderr, "rep %d failed: %s\n", rep, errors[rep].c_str());
            ok = false;
            continue;
        }
        if (results[rep]->aborted) ok = false;
        rows.push_back(summarize(*results[rep], rep, derive_seed(o.seed, rep)));
    }

    write_summary_csv(rows, (fs::path(out) / "summary.csv").string());
    if (!rows.empty()) {
        write_aggregates_csv(aggregate(rows), (fs::path(out) / "aggregates.csv").string());
        write_frequency_csv(rows, p.costs, (fs::path(out) / "frequency.csv").string());
    }
    for (int rep = 0; rep < o.reps; ++rep)
        if (results[rep] && results[rep]->exclusion.enabled &&
            results[rep]->exclusion.fit_ok) {
            write_manifold_csv(results[rep]->exclusion,
                               (fs::path(out) / "manifold.csv").string());
            break;
        }

    if (!rows.empty()) {
        std::vector<double> inc;
        for (const auto& r : rows) inc.push_back(r.final_incumbent);
        std::printf("%s %s reps=%zu median_incumbent=%.6g\n", p.name.c_str(),
                    o.af.c_str(), rows.size(), median(inc));
    }
    return ok && static_cast<int>(rows.size()) == o.reps ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-fidelity cost-aware Bayesian optimization benchmark harness"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config file (flags win)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "output directory (default $MFBO_OUT or ./out)");
    };

    CLI::App* list = app.add_subcommand("list", "list bundled benchmark problems");
    (void)list;

    CLI::App* opt = app.add_subcommand("optimize", "run BO repetitions on a benchmark");
    add_common(opt);
    opt->add_option("--problem", o.problem, "benchmark name");
    opt->add_option("--af", o.af, "acquisition: mfca, ei, pi, kg");
    opt->add_option("--reps", o.reps, "number of repetitions");
    opt->add_option("--jobs", o.jobs, "parallel repetitions");
    opt->add_option("--budget", o.budget, "maximum cumulative cost");
    opt->add_option("--stagnation", o.stagnation, "non-improving iteration limit");
    opt->add_flag("--no-exclude", o.no_exclude, "skip Step-0 source exclusion");
    opt->add_option("--threshold", o.threshold, "exclusion correlation threshold");
    opt->add_option("--costs", o.costs, "per-source cost overrides")->expected(-1);
    opt->add_option("--initial-sizes", o.sizes, "per-source initial sizes")->expected(-1);

    CLI::App* man = app.add_subcommand("manifold", "fit on initial data, report fidelity manifold");
    add_common(man);
    man->add_option("--problem", o.problem, "benchmark name");
    man->add_option("--data", o.data_path, "delimited data file instead of a benchmark");
    man->add_option("--threshold", o.threshold, "exclusion correlation threshold");
    man->add_option("--costs", o.costs, "per-source costs for --data")->expected(-1);
    man->add_option("--initial-sizes", o.sizes, "per-source initial sizes")->expected(-1);

    CLI::App* rr = app.add_subcommand("rrmse", "low-fidelity RRMSE table for a benchmark");
    add_common(rr);
    rr->add_option("--problem", o.problem, "benchmark name");
    rr->add_option("--nmc", o.n_mc, "Monte-Carlo sample count");

    CLI::App* emu = app.add_subcommand("emulate", "LMGP vs single-fidelity GP test error");
    add_common(emu);
    emu->add_option("--problem", o.problem, "benchmark name");
    emu->add_option("--reps", o.reps, "number of seeds");
    emu->add_option("--sources", o.emulate_sources, "restrict to the first k sources");
    emu->add_option("--ntest", o.n_test, "held-out test points");
    emu->add_option("--initial-sizes", o.sizes, "per-source initial sizes")->expected(-1);

    // load config-file defaults before parsing so command-line flags win
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") o.config_path = argv[i + 1];
    try {
        apply_config_file(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("list")) return cmd_list();
        if (app.got_subcommand("optimize")) return cmd_optimize(o);
        if (app.got_subcommand("manifold")) return cmd_manifold(o);
        if (app.got_subcommand("rrmse")) return cmd_rrmse(o);
        if (app.got_subcommand("emulate")) return cmd_emulate(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
