#include "mfbo/domain.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mfbo {

int ProblemSpace::zeta_t_len() const {
    return std::accumulate(categorical_levels.begin(), categorical_levels.end(), 0);
}

void ProblemSpace::validate() const {
    if (dx < 0) throw std::invalid_argument("dx must be >= 0");
    if (static_cast<int>(numeric_bounds.size()) != dx)
        throw std::invalid_argument("numeric_bounds size must equal dx");
    for (const auto& b : numeric_bounds)
        if (!(b[0] < b[1])) throw std::invalid_argument("bound lo must be < hi");
    for (int l : categorical_levels)
        if (l < 2) throw std::invalid_argument("categorical level count must be >= 2");
    if (num_sources < 1) throw std::invalid_argument("num_sources must be >= 1");
    if (hf_index < 0 || hf_index >= num_sources)
        throw std::invalid_argument("hf_index out of range");
}

std::vector<int> MultiSourceDataset::counts() const {
    std::vector<int> c(space.num_sources, 0);
    for (const auto& p : points) ++c[p.s];
    return c;
}

void MultiSourceDataset::validate() const {
    space.validate();
    if (responses.size() != static_cast<Eigen::Index>(points.size()))
        throw std::invalid_argument("points/responses length mismatch");
    if (static_cast<int>(costs.size()) != space.num_sources)
        throw std::invalid_argument("costs size must equal num_sources");
    for (double c : costs)
        if (!(c > 0)) throw std::invalid_argument("costs must be positive");
    for (const auto& p : points) {
        if (p.x.size() != space.dx) throw std::invalid_argument("point dx mismatch");
        if (static_cast<int>(p.t.size()) != space.dt())
            throw std::invalid_argument("point dt mismatch");
        if (p.s < 0 || p.s >= space.num_sources)
            throw std::invalid_argument("point source out of range");
    }
}

Eigen::VectorXd encode_categorical(const std::vector<int>& t, const ProblemSpace& space) {
    if (static_cast<int>(t.size()) != space.dt())
        throw std::invalid_argument("encode_categorical: wrong number of levels");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(space.zeta_t_len());
    int offset = 0;
    for (int i = 0; i < space.dt(); ++i) {
        if (t[i] < 0 || t[i] >= space.categorical_levels[i])
            throw std::out_of_range("encode_categorical: level index out of range");
        z[offset + t[i]] = 1.0;
        offset += space.categorical_levels[i];
    }
    return z;
}

Eigen::VectorXd encode_source(int s, int ds) {
    if (s < 0 || s >= ds) throw std::out_of_range("encode_source: index out of range");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(ds);
    z[s] = 1.0;
    return z;
}

MultiSourceDataset assemble(
    const ProblemSpace& space,
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& tables,
    const std::vector<double>& costs) {
    if (static_cast<int>(tables.size()) != space.num_sources)
        throw std::invalid_argument("assemble: one table per source required");
    MultiSourceDataset ds;
    ds.space = space;
    ds.costs = costs;
    int total = 0;
    for (const auto& [X, y] : tables) total += static_cast<int>(y.size());
    ds.responses.resize(total);
    int row = 0;
    const int cols = space.dx + space.dt();
    for (int j = 0; j < space.num_sources; ++j) {
        const auto& [X, y] = tables[j];
        if (y.size() > 0 && X.cols() != cols)
            throw std::invalid_argument("assemble: table column count must be dx+dt");
        if (X.rows() != y.size())
            throw std::invalid_argument("assemble: ragged table");
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            MixedPoint p;
            p.x = X.row(i).head(space.dx).transpose();
            p.t.resize(space.dt());
            for (int k = 0; k < space.dt(); ++k)
                p.t[k] = static_cast<int>(X(i, space.dx + k));
            p.s = j;
            ds.points.push_back(std::move(p));
            ds.responses[row++] = y[i];
        }
    }
    ds.validate();
    return ds;
}

Eigen::VectorXd scale_to_unit(const Eigen::VectorXd& x, const ProblemSpace& space) {
    Eigen::VectorXd u(space.dx);
    for (int i = 0; i < space.dx; ++i) {
        const auto& b = space.numeric_bounds[i];
        u[i] = (x[i] - b[0]) / (b[1] - b[0]);
    }
    return u;
}

Eigen::VectorXd unscale_from_unit(const Eigen::VectorXd& u, const ProblemSpace& space) {
    Eigen::VectorXd x(space.dx);
    for (int i = 0; i < space.dx; ++i) {
        const auto& b = space.numeric_bounds[i];
        x[i] = b[0] + std::clamp(u[i], 0.0, 1.0) * (b[1] - b[0]);
    }
    return x;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    return out;
}

}  // namespace

MultiSourceDataset read_delimited(const std::string& path, const TableSchema& schema,
                                  const std::vector<double>& costs,
                                  Direction direction, int hf_index) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + path);
    const auto header = split_csv_line(line);
    auto col_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("column '" + name + "' missing in " + path);
        return static_cast<int>(it - header.begin());
    };
    std::vector<int> num_cols, cat_cols;
    for (const auto& c : schema.numeric) num_cols.push_back(col_of(c));
    for (const auto& c : schema.categorical) cat_cols.push_back(col_of(c));
    const int y_col = col_of(schema.response);
    const int s_col = col_of(schema.source);
    if (schema.numeric.empty()) {
        // no explicit list: every column that is not y/source/categorical is numeric
        for (int i = 0; i < static_cast<int>(header.size()); ++i) {
            if (i == y_col || i == s_col) continue;
            if (std::find(cat_cols.begin(), cat_cols.end(), i) != cat_cols.end()) continue;
            num_cols.push_back(i);
        }
    }

    const int dx = static_cast<int>(num_cols.size());
    const int dt = static_cast<int>(cat_cols.size());
    std::vector<std::map<std::string, int>> level_maps(dt);
    std::vector<MixedPoint> points;
    std::vector<double> ys;
    int max_source = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv_line(line);
        MixedPoint p;
        p.x.resize(dx);
        for (int i = 0; i < dx; ++i) p.x[i] = std::stod(f.at(num_cols[i]));
        p.t.resize(dt);
        for (int i = 0; i < dt; ++i) {
            auto& m = level_maps[i];
            const auto& key = f.at(cat_cols[i]);
            auto [it, inserted] = m.try_emplace(key, static_cast<int>(m.size()));
            p.t[i] = it->second;
        }
        p.s = std::stoi(f.at(s_col));
        if (p.s < 0) throw std::runtime_error("negative source id in " + path);
        max_source = std::max(max_source, p.s);
        ys.push_back(std::stod(f.at(y_col)));
        points.push_back(std::move(p));
    }

    MultiSourceDataset ds;
    ds.space.dx = dx;
    ds.space.numeric_bounds.resize(dx);
    for (int i = 0; i < dx; ++i) {
        double lo = points.empty() ? 0.0 : points[0].x[i], hi = lo;
        for (const auto& p : points) {
            lo = std::min(lo, p.x[i]);
            hi = std::max(hi, p.x[i]);
        }
        if (lo == hi) hi = lo + 1.0;  // degenerate column
        ds.space.numeric_bounds[i] = {lo, hi};
    }
    for (int i = 0; i < dt; ++i)
        ds.space.categorical_levels.push_back(
            std::max(2, static_cast<int>(level_maps[i].size())));
    ds.space.num_sources = max_source + 1;
    ds.space.hf_index = hf_index;
    ds.space.direction = direction;
    ds.points = std::move(points);
    ds.responses.resize(static_cast<Eigen::Index>(ys.size()));
    for (size_t i = 0; i < ys.size(); ++i) ds.responses[static_cast<Eigen::Index>(i)] = ys[i];
    ds.costs = costs;
    if (static_cast<int>(ds.costs.size()) < ds.space.num_sources)
        ds.costs.resize(ds.space.num_sources, 1.0);
    ds.validate();
    return ds;
}

}  // namespace mfbo
