#include "mfbo/sobol.hpp"

#include <bit>
#include <stdexcept>

#include "mfbo/rng.hpp"

namespace mfbo {
namespace {

// Joe-Kuo "new-joe-kuo-6" table rows for dimensions 2..21:
// polynomial degree s, coefficient a, initial direction values m_1..m_s.
struct JoeKuoRow {
    int s;
    std::uint32_t a;
    std::uint32_t m[7];
};

constexpr JoeKuoRow kRows[20] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
};

}  // namespace

SobolSequence::SobolSequence(int dim, std::uint64_t scramble_seed) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim)
        throw std::invalid_argument("SobolSequence: dimension must be in [1," +
                                    std::to_string(kMaxDim) + "]");
    v_.assign(dim, std::vector<std::uint64_t>(kBits));
    for (int k = 0; k < kBits; ++k) v_[0][k] = 1ULL << (kBits - 1 - k);
    for (int d = 1; d < dim; ++d) {
        const JoeKuoRow& row = kRows[d - 1];
        const int s = row.s;
        std::vector<std::uint64_t> m(kBits);
        for (int k = 0; k < s && k < kBits; ++k) m[k] = row.m[k];
        for (int k = s; k < kBits; ++k) {
            std::uint64_t val = m[k - s] ^ (m[k - s] << s);
            for (int i = 1; i < s; ++i)
                if ((row.a >> (s - 1 - i)) & 1U) val ^= m[k - i] << i;
            m[k] = val;
        }
        for (int k = 0; k < kBits; ++k) v_[d][k] = m[k] << (kBits - 1 - k);
    }
    state_.assign(dim, 0);
    shift_.assign(dim, 0);
    if (scramble_seed != 0) {
        Rng rng(mix64(scramble_seed));
        constexpr std::uint64_t mask = (1ULL << kBits) - 1;
        for (int d = 0; d < dim; ++d) shift_[d] = rng.next_u64() & mask;
    }
}

void SobolSequence::next(double* out) {
    // Gray-code update: point i differs from point i-1 in direction ctz(i).
    const int c = std::countr_zero(index_ + 1);
    for (int d = 0; d < dim_; ++d) state_[d] ^= v_[d][c];
    ++index_;
    constexpr double scale = 0x1.0p-52;
    for (int d = 0; d < dim_; ++d)
        out[d] = static_cast<double>(state_[d] ^ shift_[d]) * scale;
}

std::vector<double> SobolSequence::next() {
    std::vector<double> p(dim_);
    next(p.data());
    return p;
}

void SobolSequence::skip(std::uint64_t n) {
    std::vector<double> tmp(dim_);
    for (std::uint64_t i = 0; i < n; ++i) next(tmp.data());
}

Eigen::MatrixXd sobol_points(int n, int dim, std::uint64_t scramble_seed) {
    SobolSequence seq(dim, scramble_seed);
    Eigen::MatrixXd pts(n, dim);
    std::vector<double> p(dim);
    for (int i = 0; i < n; ++i) {
        seq.next(p.data());
        for (int d = 0; d < dim; ++d) pts(i, d) = p[d];
    }
    return pts;
}

}  // namespace mfbo
