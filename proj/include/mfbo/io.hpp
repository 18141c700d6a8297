#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfbo/engine.hpp"

namespace mfbo {

struct SummaryRow {
    int rep = 0;
    std::uint64_t seed = 0;
    double final_incumbent = 0.0;
    double cost_at_best = 0.0;
    double cum_cost = 0.0;
    int iterations = 0;
    StopReason stop = StopReason::none;
    bool aborted = false;
    std::vector<int> source_counts;
};

struct SummaryAggregates {
    double incumbent_q25 = 0.0, incumbent_median = 0.0, incumbent_q75 = 0.0;
    double cost_q25 = 0.0, cost_median = 0.0, cost_q75 = 0.0;
    std::vector<long> total_source_counts;
};

SummaryRow summarize(const RunHistory& h, int rep, std::uint64_t seed);
SummaryAggregates aggregate(const std::vector<SummaryRow>& rows);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);  // linear interpolation

// One JSON object per line: a header record with config and the exclusion
// report, an iteration record per query, and a final record.
void write_history_ndjson(const RunHistory& h, const BOConfig& cfg,
                          const std::string& path);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);
void write_aggregates_csv(const SummaryAggregates& agg, const std::string& path);
void write_frequency_csv(const std::vector<SummaryRow>& rows,
                         const std::vector<double>& costs, const std::string& path);
void write_manifold_csv(const ExclusionReport& rep, const std::string& path);

}  // namespace mfbo
