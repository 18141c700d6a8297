#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mfbo {

// Gray-code Sobol sequence (Joe-Kuo direction numbers, up to 21 dimensions).
// Index 0 (the all-zeros point) is skipped, so the first point returned by an
// unscrambled generator is (0.5, ..., 0.5). A nonzero scramble_seed applies a
// per-dimension random digital shift; the shifted sequence stays a (t,m,s)-net.
class SobolSequence {
public:
    static constexpr int kMaxDim = 21;
    static constexpr int kBits = 52;

    explicit SobolSequence(int dim, std::uint64_t scramble_seed = 0);

    std::vector<double> next();
    void next(double* out);
    void skip(std::uint64_t n);

    int dim() const { return dim_; }

private:
    int dim_;
    std::uint64_t index_ = 0;  // count of points generated
    std::vector<std::uint64_t> state_;           // current integer coordinates
    std::vector<std::uint64_t> shift_;           // digital-shift masks
    std::vector<std::vector<std::uint64_t>> v_;  // direction numbers [dim][bit]
};

// n points as rows, in [0,1)^dim.
Eigen::MatrixXd sobol_points(int n, int dim, std::uint64_t scramble_seed = 0);

}  // namespace mfbo
