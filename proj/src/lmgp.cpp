#include "mfbo/lmgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "mfbo/optimize.hpp"
#include "mfbo/rng.hpp"

namespace mfbo {

namespace {
constexpr double kLn10 = 2.302585092994045684;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace

int FittedEmulator::packed_size() const {
    int p = space_.dx;
    if (space_.dt() > 0) p += (space_.zeta_t_len() - space_.dt()) * cfg_.dz;
    if (space_.num_sources > 1) p += (space_.num_sources - 1) * cfg_.dh;
    if (cfg_.estimate_nugget) p += 1;
    return p;
}

void FittedEmulator::unpack(const Eigen::VectorXd& theta, Eigen::VectorXd& omega,
                            Eigen::MatrixXd& A, Eigen::MatrixXd& Ah,
                            double* nugget) const {
    const int dx = space_.dx;
    omega = theta.head(dx);
    int pos = dx;
    A = Eigen::MatrixXd::Zero(space_.zeta_t_len(), cfg_.dz);
    if (space_.dt() > 0) {
        int row = 0;
        for (int b = 0; b < space_.dt(); ++b) {
            // first row of each block pinned at zero for identifiability
            for (int k = 1; k < space_.categorical_levels[b]; ++k)
                for (int c = 0; c < cfg_.dz; ++c) A(row + k, c) = theta[pos++];
            row += space_.categorical_levels[b];
        }
    }
    Ah = Eigen::MatrixXd::Zero(space_.num_sources, cfg_.dh);
    if (space_.num_sources > 1) {
        for (int s = 0; s < space_.num_sources; ++s) {
            if (s == space_.hf_index) continue;  // HF row pinned at zero
            for (int c = 0; c < cfg_.dh; ++c) Ah(s, c) = theta[pos++];
        }
    }
    if (nugget) *nugget = cfg_.estimate_nugget ? std::pow(10.0, theta[pos]) : 0.0;
}

Eigen::MatrixXd FittedEmulator::latent_rows(const Eigen::MatrixXd& A,
                                            const Eigen::MatrixXd& Ah) const {
    const int n = train_n();
    Eigen::MatrixXd H(n, cfg_.dh);
    for (int p = 0; p < n; ++p) H.row(p) = Ah.row(src_[p]);
    return H;
}

void FittedEmulator::init_data(const MultiSourceDataset& data, const FitConfig& cfg) {
    data.validate();
    space_ = data.space;
    cfg_ = cfg;
    const int n = data.n();
    if (n < 2) throw FitFailure("fit requires at least 2 samples");
    Xs_.resize(n, space_.dx);
    Zt_.resize(n, space_.zeta_t_len());
    src_.resize(n);
    for (int i = 0; i < n; ++i) {
        Xs_.row(i) = scale_to_unit(data.points[i].x, space_).transpose();
        if (space_.dt() > 0)
            Zt_.row(i) = encode_categorical(data.points[i].t, space_).transpose();
        src_[i] = data.points[i].s;
    }
    y_mean_ = data.responses.mean();
    const double var = (data.responses.array() - y_mean_).square().sum() / n;
    y_scale_ = std::sqrt(var);
    // Identical responses can still show ~1 ulp of spread through the rounded
    // mean; anything below rounding scale is constant for fitting purposes.
    degenerate_ = !(y_scale_ > 1e-12 * std::max(1.0, std::abs(y_mean_)));
    if (degenerate_) y_scale_ = 1.0;
    y_ = (data.responses.array() - y_mean_) / y_scale_;
}

double FittedEmulator::nll_value(const Eigen::VectorXd& theta, double jitter,
                                 Eigen::VectorXd* grad) const {
    const int n = train_n();
    Eigen::VectorXd omega;
    Eigen::MatrixXd A, Ah;
    double nugget = 0.0;
    unpack(theta, omega, A, Ah, &nugget);
    const Eigen::ArrayXd wpow = (kLn10 * omega.array()).exp();
    const Eigen::MatrixXd Z = (space_.dt() > 0)
                                  ? Eigen::MatrixXd(Zt_ * A)
                                  : Eigen::MatrixXd::Zero(n, 0);
    const Eigen::MatrixXd H = latent_rows(A, Ah);

    Eigen::MatrixXd K(n, n);
    for (int p = 0; p < n; ++p) {
        K(p, p) = 1.0;
        for (int q = p + 1; q < n; ++q) {
            double d = 0.0;
            for (int i = 0; i < space_.dx; ++i) {
                const double t = Xs_(p, i) - Xs_(q, i);
                d += wpow[i] * t * t;
            }
            for (int c = 0; c < Z.cols(); ++c) {
                const double t = Z(p, c) - Z(q, c);
                d += t * t;
            }
            for (int c = 0; c < H.cols(); ++c) {
                const double t = H(p, c) - H(q, c);
                d += t * t;
            }
            K(p, q) = K(q, p) = std::exp(-d);
        }
    }
    Eigen::MatrixXd R = K;
    R.diagonal().array() += jitter + nugget;

    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) return kInf;
    const Eigen::MatrixXd& Lc = llt.matrixLLT();
    double ldet = 0.0;
    for (int i = 0; i < n; ++i) ldet += std::log(Lc(i, i));
    ldet *= 2.0;

    const Eigen::VectorXd Ri1 = llt.solve(Eigen::VectorXd::Ones(n));
    const double one_Ri1 = Ri1.sum();
    if (!(one_Ri1 > 0)) return kInf;
    const double beta = Ri1.dot(y_) / one_Ri1;
    const Eigen::VectorXd e = (y_.array() - beta).matrix();
    const Eigen::VectorXd alpha = llt.solve(e);
    const double s2 = e.dot(alpha) / n;
    if (!(s2 > 0) || !std::isfinite(s2)) return kInf;
    const double L = n * std::log(s2) + ldet;

    if (grad) {
        grad->resize(theta.size());
        const Eigen::MatrixXd Rinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd E =
            (Rinv - (alpha * alpha.transpose()) / s2).cwiseProduct(K);
        int pos = 0;
        for (int i = 0; i < space_.dx; ++i) {
            double acc = 0.0;
            for (int p = 0; p < n; ++p)
                for (int q = p + 1; q < n; ++q) {
                    const double t = Xs_(p, i) - Xs_(q, i);
                    acc += E(p, q) * t * t;
                }
            (*grad)[pos++] = -kLn10 * wpow[i] * 2.0 * acc;
        }
        if (space_.dt() > 0 || space_.num_sources > 1) {
            const Eigen::VectorXd rs = E.rowwise().sum();
            if (space_.dt() > 0) {
                const Eigen::MatrixXd PZ = E * Z;
                int row = 0;
                for (int b = 0; b < space_.dt(); ++b) {
                    for (int k = 1; k < space_.categorical_levels[b]; ++k) {
                        for (int c = 0; c < cfg_.dz; ++c) {
                            double acc = 0.0;
                            for (int p = 0; p < n; ++p)
                                if (Zt_(p, row + k) == 1.0)
                                    acc += Z(p, c) * rs[p] - PZ(p, c);
                            (*grad)[pos++] = -4.0 * acc;
                        }
                    }
                    row += space_.categorical_levels[b];
                }
            }
            if (space_.num_sources > 1) {
                const Eigen::MatrixXd PH = E * H;
                for (int s = 0; s < space_.num_sources; ++s) {
                    if (s == space_.hf_index) continue;
                    for (int c = 0; c < cfg_.dh; ++c) {
                        double acc = 0.0;
                        for (int p = 0; p < n; ++p)
                            if (src_[p] == s) acc += H(p, c) * rs[p] - PH(p, c);
                        (*grad)[pos++] = -4.0 * acc;
                    }
                }
            }
        }
        if (cfg_.estimate_nugget)
            (*grad)[pos] = kLn10 * nugget *
                           (Rinv.trace() - alpha.squaredNorm() / s2);
    }
    return L;
}

void FittedEmulator::rebuild_caches(const Eigen::VectorXd& theta, double jitter) {
    const int n = train_n();
    theta_ = theta;
    jitter_ = jitter;
    Eigen::VectorXd omega;
    Eigen::MatrixXd A, Ah;
    double nugget = 0.0;
    unpack(theta, omega, A, Ah, &nugget);
    wpow_ = (kLn10 * omega.array()).exp().matrix();
    Zrows_ = (space_.dt() > 0) ? Eigen::MatrixXd(Zt_ * A)
                               : Eigen::MatrixXd::Zero(n, 0);
    Hrows_ = latent_rows(A, Ah);

    Eigen::MatrixXd R(n, n);
    for (int p = 0; p < n; ++p) {
        R(p, p) = 1.0 + jitter + nugget;
        for (int q = p + 1; q < n; ++q) {
            double d = 0.0;
            for (int i = 0; i < space_.dx; ++i) {
                const double t = Xs_(p, i) - Xs_(q, i);
                d += wpow_[i] * t * t;
            }
            for (int c = 0; c < Zrows_.cols(); ++c) {
                const double t = Zrows_(p, c) - Zrows_(q, c);
                d += t * t;
            }
            for (int c = 0; c < Hrows_.cols(); ++c) {
                const double t = Hrows_(p, c) - Hrows_(q, c);
                d += t * t;
            }
            R(p, q) = R(q, p) = std::exp(-d);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
        throw FitFailure("correlation matrix not positive definite at final jitter");
    cholL_ = llt.matrixL();
    Ri1_ = llt.solve(Eigen::VectorXd::Ones(n));
    one_Ri1_ = Ri1_.sum();
    const double beta = Ri1_.dot(y_) / one_Ri1_;
    const Eigen::VectorXd e = (y_.array() - beta).matrix();
    alpha_ = llt.solve(e);
    const double s2 = std::max(0.0, e.dot(alpha_) / n);

    hyper_.omega = omega;
    hyper_.A = A;
    hyper_.A_h = Ah;
    hyper_.beta_hat = beta;
    hyper_.sigma2_hat = s2;
}

FittedEmulator FittedEmulator::fit(const MultiSourceDataset& data, const FitConfig& cfg) {
    FittedEmulator em;
    em.init_data(data, cfg);
    const int p = em.packed_size();

    if (em.degenerate_) {
        em.rebuild_caches(Eigen::VectorXd::Zero(p), cfg.jitter_ladder.front());
        em.nll_ = 0.0;
        return em;
    }

    Eigen::VectorXd lo(p), hi(p);
    int pos = 0;
    for (int i = 0; i < em.space_.dx; ++i, ++pos) {
        lo[pos] = cfg.omega_lo;
        hi[pos] = cfg.omega_hi;
    }
    const int n_latent = p - em.space_.dx - (cfg.estimate_nugget ? 1 : 0);
    for (int i = 0; i < n_latent; ++i, ++pos) {
        lo[pos] = -30.0;
        hi[pos] = 30.0;
    }
    if (cfg.estimate_nugget) {
        lo[pos] = -12.0;
        hi[pos] = -2.0;
    }

    std::vector<Eigen::VectorXd> starts;
    for (const auto& w : cfg.warm_starts)
        if (w.size() == p) starts.push_back(w);
    Rng rng(derive_seed(cfg.seed, 0x10f1));
    {
        Eigen::VectorXd t0(p);
        int q = 0;
        for (int i = 0; i < em.space_.dx; ++i, ++q) t0[q] = 0.0;
        for (int i = 0; i < n_latent; ++i, ++q) t0[q] = rng.uniform(-0.5, 0.5);
        if (cfg.estimate_nugget) t0[q] = -8.0;
        starts.push_back(t0);
    }
    while (static_cast<int>(starts.size()) < std::max(cfg.n_starts, 1)) {
        Eigen::VectorXd t0(p);
        int q = 0;
        for (int i = 0; i < em.space_.dx; ++i, ++q)
            t0[q] = rng.uniform(cfg.omega_lo, cfg.omega_hi);
        for (int i = 0; i < n_latent; ++i, ++q)
            t0[q] = rng.uniform(-cfg.latent_init_box, cfg.latent_init_box);
        if (cfg.estimate_nugget) t0[q] = rng.uniform(-10.0, -4.0);
        starts.push_back(t0);
    }

    for (double delta : cfg.jitter_ladder) {
        bool any = false;
        double best_f = kInf;
        Eigen::VectorXd best_x;
        for (const auto& t0 : starts) {
            GradFn fn = [&em, delta](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
                return em.nll_value(th, delta, g);
            };
            MinimizeResult r = minimize_bounded(fn, t0, lo, hi, cfg.max_iters);
            if (std::isfinite(r.f) && r.f < best_f) {
                best_f = r.f;
                best_x = r.x;
                any = true;
            }
        }
        if (any) {
            em.rebuild_caches(best_x, delta);
            em.nll_ = best_f;
            return em;
        }
    }
    throw FitFailure("all starts failed at every jitter level");
}

Eigen::VectorXd FittedEmulator::corr_vector(const MixedPoint& u) const {
    const int n = train_n();
    const Eigen::VectorXd xs = scale_to_unit(u.x, space_);
    Eigen::RowVectorXd z(cfg_.dz), h(cfg_.dh);
    if (space_.dt() > 0)
        z = (encode_categorical(u.t, space_).transpose() * hyper_.A);
    h = hyper_.A_h.row(u.s);
    Eigen::VectorXd r(n);
    for (int q = 0; q < n; ++q) {
        double d = 0.0;
        for (int i = 0; i < space_.dx; ++i) {
            const double t = xs[i] - Xs_(q, i);
            d += wpow_[i] * t * t;
        }
        if (space_.dt() > 0)
            for (int c = 0; c < cfg_.dz; ++c) {
                const double t = z[c] - Zrows_(q, c);
                d += t * t;
            }
        for (int c = 0; c < cfg_.dh; ++c) {
            const double t = h[c] - Hrows_(q, c);
            d += t * t;
        }
        r[q] = std::exp(-d);
    }
    return r;
}

double FittedEmulator::corr_scalar(const MixedPoint& a, const MixedPoint& b) const {
    return correlation(a, b, hyper_, space_);
}

std::pair<double, double> FittedEmulator::predict(const MixedPoint& u) const {
    const Eigen::VectorXd r = corr_vector(u);
    const double mu = hyper_.beta_hat + r.dot(alpha_);
    const Eigen::VectorXd q =
        cholL_.triangularView<Eigen::Lower>().solve(r);
    const double g = 1.0 - r.dot(Ri1_);
    double var = hyper_.sigma2_hat *
                 (1.0 - q.squaredNorm() + g * g / one_Ri1_);
    var = std::max(0.0, var);
    return {mu * y_scale_ + y_mean_, var * y_scale_ * y_scale_};
}

void FittedEmulator::predict_scaled(const Eigen::MatrixXd& x_unit,
                                    const std::vector<int>& t, int source,
                                    Eigen::VectorXd& mean, Eigen::VectorXd& var) const {
    const int m = static_cast<int>(x_unit.rows());
    const int n = train_n();
    Eigen::RowVectorXd z(cfg_.dz), h(cfg_.dh);
    if (space_.dt() > 0)
        z = (encode_categorical(t, space_).transpose() * hyper_.A);
    h = hyper_.A_h.row(source);

    Eigen::MatrixXd Rm(m, n);
    for (int j = 0; j < m; ++j)
        for (int q = 0; q < n; ++q) {
            double d = 0.0;
            for (int i = 0; i < space_.dx; ++i) {
                const double tt = x_unit(j, i) - Xs_(q, i);
                d += wpow_[i] * tt * tt;
            }
            if (space_.dt() > 0)
                for (int c = 0; c < cfg_.dz; ++c) {
                    const double tt = z[c] - Zrows_(q, c);
                    d += tt * tt;
                }
            for (int c = 0; c < cfg_.dh; ++c) {
                const double tt = h[c] - Hrows_(q, c);
                d += tt * tt;
            }
            Rm(j, q) = std::exp(-d);
        }

    mean = ((Rm * alpha_).array() + hyper_.beta_hat).matrix();
    const Eigen::MatrixXd Q =
        cholL_.triangularView<Eigen::Lower>().solve(Rm.transpose());
    const Eigen::VectorXd rRr = Q.colwise().squaredNorm().transpose();
    const Eigen::ArrayXd g = 1.0 - (Rm * Ri1_).array();
    var = (hyper_.sigma2_hat * (1.0 - rRr.array() + g.square() / one_Ri1_))
              .max(0.0)
              .matrix();
    mean = (mean.array() * y_scale_ + y_mean_).matrix();
    var *= y_scale_ * y_scale_;
}

void FittedEmulator::predict_with_gradient(const Eigen::VectorXd& x_unit,
                                           const std::vector<int>& t, int source,
                                           double& mean, double& sd,
                                           Eigen::VectorXd& dmean,
                                           Eigen::VectorXd& dsd) const {
    const int n = train_n();
    const int dx = space_.dx;
    Eigen::RowVectorXd z(cfg_.dz), h(cfg_.dh);
    if (space_.dt() > 0)
        z = (encode_categorical(t, space_).transpose() * hyper_.A);
    h = hyper_.A_h.row(source);

    Eigen::VectorXd r(n);
    for (int q = 0; q < n; ++q) {
        double d = 0.0;
        for (int i = 0; i < dx; ++i) {
            const double tt = x_unit[i] - Xs_(q, i);
            d += wpow_[i] * tt * tt;
        }
        if (space_.dt() > 0)
            for (int c = 0; c < cfg_.dz; ++c) {
                const double tt = z[c] - Zrows_(q, c);
                d += tt * tt;
            }
        for (int c = 0; c < cfg_.dh; ++c) {
            const double tt = h[c] - Hrows_(q, c);
            d += tt * tt;
        }
        r[q] = std::exp(-d);
    }

    Eigen::VectorXd v = cholL_.triangularView<Eigen::Lower>().solve(r);
    cholL_.triangularView<Eigen::Lower>().transpose().solveInPlace(v);

    const double mu_std = hyper_.beta_hat + r.dot(alpha_);
    const double g = 1.0 - r.dot(Ri1_);
    double var_std =
        hyper_.sigma2_hat * (1.0 - r.dot(v) + g * g / one_Ri1_);
    var_std = std::max(0.0, var_std);

    // (J^T y)_i for J = dr/dx: r's derivative along scaled coordinate i is
    // -2 w_i (x_i - Xs_qi) r_q.
    auto jt = [&](const Eigen::VectorXd& y) {
        const Eigen::VectorXd u = r.cwiseProduct(y);
        const double s = u.sum();
        const Eigen::VectorXd xu = Xs_.transpose() * u;
        Eigen::VectorXd out(dx);
        for (int i = 0; i < dx; ++i)
            out[i] = -2.0 * wpow_[i] * (x_unit[i] * s - xu[i]);
        return out;
    };
    const Eigen::VectorXd dmu = jt(alpha_);
    const Eigen::VectorXd dvar =
        hyper_.sigma2_hat *
        (-2.0 * jt(v) - (2.0 * g / one_Ri1_) * jt(Ri1_));

    const double sd_std = std::sqrt(var_std);
    mean = mu_std * y_scale_ + y_mean_;
    sd = sd_std * y_scale_;
    dmean = dmu * y_scale_;
    if (sd_std > 1e-300)
        dsd = dvar * (y_scale_ / (2.0 * sd_std));
    else
        dsd = Eigen::VectorXd::Zero(dx);
}

FidelityManifold FittedEmulator::manifold() const {
    if (space_.num_sources < 2)
        throw std::invalid_argument("manifold requires at least 2 sources");
    FidelityManifold m;
    m.h = hyper_.A_h;
    const int ds = space_.num_sources;
    m.dist.resize(ds, ds);
    m.corr.resize(ds, ds);
    for (int a = 0; a < ds; ++a)
        for (int b = 0; b < ds; ++b) {
            const double d = (m.h.row(a) - m.h.row(b)).norm();
            m.dist(a, b) = d;
            m.corr(a, b) = std::exp(-d * d);
        }
    return m;
}

std::uint64_t FittedEmulator::data_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const int n = train_n();
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < space_.dx; ++c) {
            const double v = Xs_(i, c);
            h = fnv1a(h, &v, sizeof(v));
        }
        h = fnv1a(h, &src_[i], sizeof(int));
        const double v = y_[i];
        h = fnv1a(h, &v, sizeof(v));
    }
    return h;
}

std::string FittedEmulator::export_text() const {
    nlohmann::json j;
    j["format"] = "lmgp-emulator-v1";
    j["n"] = train_n();
    j["dx"] = space_.dx;
    j["dt"] = space_.dt();
    j["ds"] = space_.num_sources;
    j["dz"] = cfg_.dz;
    j["dh"] = cfg_.dh;
    j["hf_index"] = space_.hf_index;
    j["theta"] = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
    j["omega"] = std::vector<double>(hyper_.omega.data(),
                                     hyper_.omega.data() + hyper_.omega.size());
    auto mat = [](const Eigen::MatrixXd& M) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            rows.emplace_back(M.row(r).begin(), M.row(r).end());
        return rows;
    };
    j["A"] = mat(hyper_.A);
    j["A_h"] = mat(hyper_.A_h);
    j["beta_hat"] = hyper_.beta_hat;
    j["sigma2_hat"] = hyper_.sigma2_hat;
    j["y_mean"] = y_mean_;
    j["y_scale"] = y_scale_;
    j["jitter"] = jitter_;
    j["nll"] = nll_;
    j["degenerate"] = degenerate_;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(data_checksum()));
    j["data_checksum"] = buf;
    return j.dump(2);
}

FittedEmulator FittedEmulator::import_text(const MultiSourceDataset& data,
                                           const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "lmgp-emulator-v1")
        throw std::runtime_error("unknown emulator export format");
    FitConfig cfg;
    cfg.dz = j.at("dz");
    cfg.dh = j.at("dh");
    FittedEmulator em;
    em.init_data(data, cfg);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(em.data_checksum()));
    if (j.at("data_checksum") != std::string(buf))
        throw std::runtime_error("emulator import: data checksum mismatch");
    const auto tv = j.at("theta").get<std::vector<double>>();
    if (static_cast<int>(tv.size()) != em.packed_size())
        throw std::runtime_error("emulator import: theta size mismatch");
    Eigen::VectorXd theta =
        Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
    em.rebuild_caches(theta, j.at("jitter").get<double>());
    em.nll_ = j.at("nll").get<double>();
    return em;
}

double correlation(const MixedPoint& a, const MixedPoint& b,
                   const Hyperparameters& hy, const ProblemSpace& space) {
    const Eigen::VectorXd xa = scale_to_unit(a.x, space);
    const Eigen::VectorXd xb = scale_to_unit(b.x, space);
    double d = 0.0;
    for (int i = 0; i < space.dx; ++i) {
        const double t = xa[i] - xb[i];
        d += std::pow(10.0, hy.omega[i]) * t * t;
    }
    if (space.dt() > 0) {
        const Eigen::RowVectorXd za =
            encode_categorical(a.t, space).transpose() * hy.A;
        const Eigen::RowVectorXd zb =
            encode_categorical(b.t, space).transpose() * hy.A;
        d += (za - zb).squaredNorm();
    }
    if (space.num_sources > 1)
        d += (hy.A_h.row(a.s) - hy.A_h.row(b.s)).squaredNorm();
    return std::exp(-d);
}

}  // namespace mfbo
