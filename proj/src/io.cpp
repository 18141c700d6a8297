#include "mfbo/io.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace mfbo {

namespace {
using nlohmann::json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

json vec_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

json exclusion_json(const ExclusionReport& rep) {
    json e;
    e["enabled"] = rep.enabled;
    e["fit_ok"] = rep.fit_ok;
    e["threshold"] = rep.threshold;
    e["kept"] = rep.kept;
    e["excluded"] = rep.excluded;
    if (rep.dist_to_hf.size() > 0) {
        e["dist_to_hf"] = vec_json(rep.dist_to_hf);
        e["corr_to_hf"] = vec_json(rep.corr_to_hf);
    }
    return e;
}
}  // namespace

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty set");
    std::sort(v.begin(), v.end());
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

SummaryRow summarize(const RunHistory& h, int rep, std::uint64_t seed) {
    SummaryRow r;
    r.rep = rep;
    r.seed = seed;
    r.final_incumbent = h.final_incumbent;
    r.cost_at_best = h.cost_at_best;
    r.cum_cost = h.cum_cost();
    r.iterations = static_cast<int>(h.records.size());
    r.stop = h.stop;
    r.aborted = h.aborted;
    r.source_counts = h.source_counts;
    return r;
}

SummaryAggregates aggregate(const std::vector<SummaryRow>& rows) {
    SummaryAggregates a;
    if (rows.empty()) return a;
    std::vector<double> inc, cost;
    for (const auto& r : rows) {
        inc.push_back(r.final_incumbent);
        cost.push_back(r.cost_at_best);
    }
    a.incumbent_q25 = quantile(inc, 0.25);
    a.incumbent_median = quantile(inc, 0.5);
    a.incumbent_q75 = quantile(inc, 0.75);
    a.cost_q25 = quantile(cost, 0.25);
    a.cost_median = quantile(cost, 0.5);
    a.cost_q75 = quantile(cost, 0.75);
    a.total_source_counts.assign(rows.front().source_counts.size(), 0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < r.source_counts.size(); ++j)
            a.total_source_counts[j] += r.source_counts[j];
    return a;
}

void write_history_ndjson(const RunHistory& h, const BOConfig& cfg,
                          const std::string& path) {
    auto out = open_out(path);
    {
        json hdr;
        hdr["record"] = "header";
        hdr["af"] = af_name(cfg.af_choice);
        hdr["seed"] = cfg.seed;
        hdr["budget_max"] = h.budget_max;
        hdr["stagnation_limit"] = h.stagnation_limit;
        hdr["costs"] = h.costs;
        hdr["initial_cost"] = h.initial_cost;
        hdr["exclusion"] = exclusion_json(h.exclusion);
        out << hdr.dump() << "\n";
    }
    for (const auto& r : h.records) {
        json j;
        j["record"] = "iteration";
        j["iteration"] = r.iteration;
        j["x"] = vec_json(r.point.x);
        if (!r.point.t.empty()) j["t"] = r.point.t;
        j["source"] = r.point.s;
        j["y"] = r.y;
        j["cost"] = r.cost;
        j["cum_cost"] = r.cum_cost;
        j["incumbent"] = r.incumbent;
        j["improved"] = r.improved;
        j["fit_nll"] = r.fit_nll;
        j["raw_utility"] = r.raw_utility;
        j["cost_normalized_utility"] = r.cost_normalized_utility;
        out << j.dump() << "\n";
    }
    {
        json f;
        f["record"] = "final";
        f["stop"] = stop_name(h.stop);
        f["aborted"] = h.aborted;
        f["iterations"] = h.records.size();
        f["final_incumbent"] = h.final_incumbent;
        f["incumbent_x"] = vec_json(h.incumbent_x);
        f["cost_at_best"] = h.cost_at_best;
        f["cum_cost"] = h.cum_cost();
        f["source_counts"] = h.source_counts;
        out << f.dump() << "\n";
    }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    auto out = open_out(path);
    const std::size_t ns = rows.empty() ? 0 : rows.front().source_counts.size();
    out << "rep,seed,final_incumbent,cost_at_best,cum_cost,iterations,stop,aborted";
    for (std::size_t j = 0; j < ns; ++j) out << ",n_source" << j;
    out << "\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.rep << "," << r.seed << "," << r.final_incumbent << ","
            << r.cost_at_best << "," << r.cum_cost << "," << r.iterations << ","
            << stop_name(r.stop) << "," << (r.aborted ? 1 : 0);
        for (int c : r.source_counts) out << "," << c;
        out << "\n";
    }
}

void write_aggregates_csv(const SummaryAggregates& agg, const std::string& path) {
    auto out = open_out(path);
    out.precision(17);
    out << "metric,q25,median,q75\n";
    out << "final_incumbent," << agg.incumbent_q25 << "," << agg.incumbent_median
        << "," << agg.incumbent_q75 << "\n";
    out << "cost_at_best," << agg.cost_q25 << "," << agg.cost_median << ","
        << agg.cost_q75 << "\n";
}

void write_frequency_csv(const std::vector<SummaryRow>& rows,
                         const std::vector<double>& costs, const std::string& path) {
    auto out = open_out(path);
    out << "source,cost,total_queries,mean_queries_per_rep\n";
    if (rows.empty()) return;
    const std::size_t ns = rows.front().source_counts.size();
    out.precision(17);
    for (std::size_t j = 0; j < ns; ++j) {
        long total = 0;
        for (const auto& r : rows) total += r.source_counts[j];
        out << j << "," << (j < costs.size() ? costs[j] : 0.0) << "," << total << ","
            << static_cast<double>(total) / static_cast<double>(rows.size()) << "\n";
    }
}

void write_manifold_csv(const ExclusionReport& rep, const std::string& path) {
    auto out = open_out(path);
    out.precision(17);
    out << "source";
    for (Eigen::Index c = 0; c < rep.h.cols(); ++c) out << ",h" << c;
    out << ",dist_to_hf,corr_to_hf,verdict\n";
    for (Eigen::Index s = 0; s < rep.h.rows(); ++s) {
        out << s;
        for (Eigen::Index c = 0; c < rep.h.cols(); ++c) out << "," << rep.h(s, c);
        const bool kept = std::find(rep.kept.begin(), rep.kept.end(),
                                    static_cast<int>(s)) != rep.kept.end();
        out << "," << rep.dist_to_hf[s] << "," << rep.corr_to_hf[s] << ","
            << (kept ? "kept" : "excluded") << "\n";
    }
}

}  // namespace mfbo
