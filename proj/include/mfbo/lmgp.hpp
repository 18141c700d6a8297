#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfbo/domain.hpp"

namespace mfbo {

struct FitConfig {
    int dz = 2;
    int dh = 2;
    int n_starts = 8;
    int max_iters = 150;
    std::uint64_t seed = 0;
    double omega_lo = -10.0;
    double omega_hi = 4.0;
    double latent_init_box = 3.0;
    std::vector<double> jitter_ladder = {1e-10, 1e-8, 1e-6, 1e-4};
    bool estimate_nugget = false;  // one extra MLE parameter for noisy data
    std::vector<Eigen::VectorXd> warm_starts;  // packed thetas tried first
};

struct Hyperparameters {
    Eigen::VectorXd omega;  // dx, log10 roughness
    Eigen::MatrixXd A;      // (sum l_i) x dz latent map for categoricals
    Eigen::MatrixXd A_h;    // ds x dh latent map for sources
    double beta_hat = 0.0;
    double sigma2_hat = 0.0;
};

struct FidelityManifold {
    Eigen::MatrixXd h;     // ds x dh latent source positions
    Eigen::MatrixXd dist;  // pairwise Euclidean distances
    Eigen::MatrixXd corr;  // implied correlations exp(-d^2)
};

struct FitFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Gaussian process over mixed inputs whose categorical variables (and the
// source id) enter the kernel through learned low-dimensional latent points.
// Numeric inputs are scaled to [0,1] and responses standardized internally;
// predictions are returned in the units of the training responses.
class FittedEmulator {
public:
    static FittedEmulator fit(const MultiSourceDataset& data, const FitConfig& cfg);

    std::pair<double, double> predict(const MixedPoint& u) const;  // (mean, variance)
    // Batch prediction for points sharing (t, source); rows of x_unit are
    // already scaled to [0,1]^dx.
    void predict_scaled(const Eigen::MatrixXd& x_unit, const std::vector<int>& t,
                        int source, Eigen::VectorXd& mean, Eigen::VectorXd& var) const;

    // Posterior mean/sd at a single scaled point together with their
    // gradients with respect to the scaled numeric coordinates; used by the
    // acquisition search.
    void predict_with_gradient(const Eigen::VectorXd& x_unit, const std::vector<int>& t,
                               int source, double& mean, double& sd,
                               Eigen::VectorXd& dmean, Eigen::VectorXd& dsd) const;

    FidelityManifold manifold() const;

    const Hyperparameters& hyper() const { return hyper_; }
    const ProblemSpace& space() const { return space_; }
    double nll() const { return nll_; }
    double jitter() const { return jitter_; }
    bool degenerate() const { return degenerate_; }
    int train_n() const { return static_cast<int>(y_.size()); }
    Eigen::VectorXd theta() const { return theta_; }  // packed free parameters

    // Response standardization constants (mean, scale).
    double y_mean() const { return y_mean_; }
    double y_scale() const { return y_scale_; }

    // Read-only internals for fantasy updates (knowledge gradient): the
    // correlation vector of u against all training rows, the Cholesky factor
    // of R + delta*I, and the standardized responses.
    Eigen::VectorXd corr_vector(const MixedPoint& u) const;
    double corr_scalar(const MixedPoint& a, const MixedPoint& b) const;
    const Eigen::MatrixXd& chol_factor() const { return cholL_; }
    const Eigen::VectorXd& y_standardized() const { return y_; }

    // Self-describing export (hyperparameters + jitter + likelihood + data
    // checksum); import verifies the checksum against `data` and rebuilds the
    // caches so predictions are bit-identical.
    std::string export_text() const;
    static FittedEmulator import_text(const MultiSourceDataset& data,
                                      const std::string& text);

private:
    FittedEmulator() = default;
    void init_data(const MultiSourceDataset& data, const FitConfig& cfg);
    void rebuild_caches(const Eigen::VectorXd& theta, double jitter);
    double nll_value(const Eigen::VectorXd& theta, double jitter,
                     Eigen::VectorXd* grad) const;
    void unpack(const Eigen::VectorXd& theta, Eigen::VectorXd& omega,
                Eigen::MatrixXd& A, Eigen::MatrixXd& Ah, double* nugget) const;
    Eigen::MatrixXd latent_rows(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Ah) const;
    int packed_size() const;
    std::uint64_t data_checksum() const;

    friend struct LmgpTestAccess;

    ProblemSpace space_;
    FitConfig cfg_;
    Eigen::MatrixXd Xs_;      // n x dx, scaled
    Eigen::MatrixXd Zt_;      // n x (sum l_i) prior vectors
    std::vector<int> src_;    // n source ids
    Eigen::VectorXd y_;       // standardized responses
    double y_mean_ = 0.0, y_scale_ = 1.0;

    Eigen::VectorXd theta_;
    Hyperparameters hyper_;
    double jitter_ = 0.0;
    double nll_ = 0.0;
    bool degenerate_ = false;

    // prediction caches
    Eigen::MatrixXd cholL_;
    Eigen::VectorXd alpha_;   // R^{-1}(y - beta)
    Eigen::VectorXd Ri1_;     // R^{-1} 1
    double one_Ri1_ = 0.0;    // 1^T R^{-1} 1
    Eigen::MatrixXd Zrows_;   // n x dz latent categorical coordinates
    Eigen::MatrixXd Hrows_;   // n x dh latent source coordinates
    Eigen::VectorXd wpow_;    // 10^omega
};

// Kernel correlation between two points under given hyperparameters (numeric
// coordinates are scaled by `space` bounds first).
double correlation(const MixedPoint& a, const MixedPoint& b,
                   const Hyperparameters& hy, const ProblemSpace& space);

}  // namespace mfbo
