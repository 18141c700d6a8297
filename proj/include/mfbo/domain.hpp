#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <vector>

namespace mfbo {

enum class Direction { maximize, minimize };

struct ProblemSpace {
    int dx = 0;
    std::vector<std::array<double, 2>> numeric_bounds;  // dx entries [lo, hi]
    std::vector<int> categorical_levels;                // dt entries, each >= 2
    int num_sources = 1;
    int hf_index = 0;
    Direction direction = Direction::maximize;

    int dt() const { return static_cast<int>(categorical_levels.size()); }
    int zeta_t_len() const;

    void validate() const;  // throws std::invalid_argument
};

struct MixedPoint {
    Eigen::VectorXd x;   // numeric coordinates, original units
    std::vector<int> t;  // categorical level indices
    int s = 0;           // source index
};

struct MultiSourceDataset {
    ProblemSpace space;
    std::vector<MixedPoint> points;
    Eigen::VectorXd responses;
    std::vector<double> costs;  // one per source, > 0

    int n() const { return static_cast<int>(points.size()); }
    std::vector<int> counts() const;  // samples per source
    void validate() const;
};

// Grouped one-hot prior vector for categorical levels: block i of length l_i
// has a single 1 at position t_i.
Eigen::VectorXd encode_categorical(const std::vector<int>& t, const ProblemSpace& space);

// One-hot prior vector for the source id.
Eigen::VectorXd encode_source(int s, int ds);

// Concatenates per-source tables (columns: dx numeric then dt categorical) into
// one dataset; rows keep their within-source order and gain the source tag.
MultiSourceDataset assemble(
    const ProblemSpace& space,
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& tables,
    const std::vector<double>& costs);

// Affine [lo,hi] <-> [0,1] maps. Unscaling clamps to the bounds so round-trips
// of boundary values stay feasible.
Eigen::VectorXd scale_to_unit(const Eigen::VectorXd& x, const ProblemSpace& space);
Eigen::VectorXd unscale_from_unit(const Eigen::VectorXd& u, const ProblemSpace& space);

// Column layout for delimited text ingestion.
struct TableSchema {
    std::vector<std::string> numeric;      // ordered numeric column names
    std::vector<std::string> categorical;  // ordered categorical column names
    std::string response = "y";
    std::string source = "source";
};

// Reads a comma-separated file with a header row. Categorical columns may hold
// arbitrary strings; levels are indexed by order of first appearance. Source
// ids must be integers 0..ds-1. Bounds are inferred from the data unless the
// space passed in comes with explicit bounds.
MultiSourceDataset read_delimited(const std::string& path, const TableSchema& schema,
                                  const std::vector<double>& costs,
                                  Direction direction = Direction::minimize,
                                  int hf_index = 0);

}  // namespace mfbo
