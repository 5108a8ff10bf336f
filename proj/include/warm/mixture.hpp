#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "warm/blur.hpp"
#include "warm/grid.hpp"
#include "warm/noise.hpp"
#include "warm/prediction.hpp"
#include "warm/schedule.hpp"

namespace warm {

inline Eigen::VectorXd to_vector(const Grid& g) {
    return Eigen::Map<const Eigen::VectorXd>(g.values().data(),
                                             static_cast<Eigen::Index>(g.size()));
}

inline Grid to_grid(const Eigen::VectorXd& v, std::size_t height, std::size_t width) {
    return Grid(height, width, std::vector<double>(v.data(), v.data() + v.size()));
}

/// Dense matrix of V M_alpha V^T acting on row-major flattened grids.
inline Eigen::MatrixXd blur_operator(std::size_t height, std::size_t width, double alpha) {
    const std::size_t d = height * width;
    const BlurMask mask = make_blur_mask(height, width, alpha);
    Eigen::MatrixXd b(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
        Grid e(height, width);
        e[j] = 1.0;
        b.col(static_cast<Eigen::Index>(j)) = to_vector(apply_blur(e, mask));
    }
    return 0.5 * (b + b.transpose());
}

/// Gaussian mixture over flattened height x width grids.
class GaussianMixture {
public:
    GaussianMixture(std::size_t height, std::size_t width, std::vector<double> weights,
                    std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> covariances)
        : height_(height),
          width_(width),
          weights_(std::move(weights)),
          means_(std::move(means)),
          covs_(std::move(covariances)) {
        const auto d = static_cast<Eigen::Index>(height * width);
        const std::size_t k = weights_.size();
        if (k == 0 || means_.size() != k || covs_.size() != k)
            throw DomainError("mixture: need K >= 1 weights, means and covariances");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w > 0.0)) throw DomainError("mixture: weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture: weights must sum to 1");
        for (std::size_t i = 0; i < k; ++i) {
            if (means_[i].size() != d || covs_[i].rows() != d || covs_[i].cols() != d)
                throw ShapeError("mixture: component dimension does not match the grid");
            if (!covs_[i].isApprox(covs_[i].transpose(), 1e-12))
                throw DomainError("mixture: covariance not symmetric");
            Eigen::LLT<Eigen::MatrixXd> llt(covs_[i]);
            if (llt.info() != Eigen::Success)
                throw NumericalError("mixture: covariance not positive definite");
            chol_.push_back(llt.matrixL());
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t dim() const noexcept { return height_ * width_; }
    std::size_t components() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<Eigen::VectorXd>& means() const noexcept { return means_; }
    const std::vector<Eigen::MatrixXd>& covariances() const noexcept { return covs_; }
    const Eigen::MatrixXd& cholesky(std::size_t k) const { return chol_.at(k); }

    Grid draw(NoiseSource& rng) const {
        std::size_t k = 0;
        double u = rng.uniform(), acc = 0.0;
        for (; k + 1 < weights_.size(); ++k) {
            acc += weights_[k];
            if (u < acc) break;
        }
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim()));
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        return to_grid(means_[k] + chol_[k] * z, height_, width_);
    }

    std::vector<Grid> draw(std::size_t n, NoiseSource& rng) const {
        std::vector<Grid> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(draw(rng));
        return out;
    }

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<double> weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covs_;
    std::vector<Eigen::MatrixXd> chol_;
};

/// The law of x_t = B x0 + beta eps for x0 drawn from `gm`: again a mixture.
inline GaussianMixture corrupted_mixture(const GaussianMixture& gm, double alpha, double beta) {
    const Eigen::MatrixXd b = blur_operator(gm.height(), gm.width(), alpha);
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t k = 0; k < gm.components(); ++k) {
        means.push_back(b * gm.means()[k]);
        Eigen::MatrixXd c = b * gm.covariances()[k] * b.transpose();
        c.diagonal().array() += beta * beta;
        covs.push_back(0.5 * (c + c.transpose()));
    }
    return GaussianMixture(gm.height(), gm.width(), gm.weights(), std::move(means),
                           std::move(covs));
}

/// Per-pixel mean energy E|B x0|^2 / d of the blurred data at blur level alpha.
inline double blurred_signal_energy(const GaussianMixture& gm, double alpha) {
    const Eigen::MatrixXd b = blur_operator(gm.height(), gm.width(), alpha);
    double e = 0.0;
    for (std::size_t k = 0; k < gm.components(); ++k)
        e += gm.weights()[k] * ((b * gm.means()[k]).squaredNorm() +
                                (b * gm.covariances()[k] * b.transpose()).trace());
    return e / static_cast<double>(gm.dim());
}

/// Smallest Mahalanobis distance from x to any component.
inline double manifold_distance(const GaussianMixture& gm, const Grid& x) {
    if (x.size() != gm.dim()) throw ShapeError("manifold_distance: dimension mismatch");
    const Eigen::VectorXd v = to_vector(x);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gm.components(); ++k) {
        const Eigen::VectorXd z =
            gm.cholesky(k).triangularView<Eigen::Lower>().solve(v - gm.means()[k]);
        best = std::min(best, z.norm());
    }
    return best;
}

/// E[x0 | x_t] for the observation model x_t = B x0 + beta eps at one fixed (alpha, beta),
/// with the per-component solves factored once.
class MixturePosterior {
public:
    MixturePosterior(const GaussianMixture& gm, double alpha, double beta)
        : height_(gm.height()), width_(gm.width()), alpha_(alpha), beta_(beta) {
        if (!(beta > 0.0))
            throw DomainError("posterior mean: beta must be > 0 (noise-free conditioning)");
        blur_ = blur_operator(height_, width_, alpha);
        for (std::size_t k = 0; k < gm.components(); ++k) {
            Component c;
            c.prior_mean = gm.means()[k];
            c.observed_mean = blur_ * gm.means()[k];
            Eigen::MatrixXd cov = blur_ * gm.covariances()[k] * blur_.transpose();
            cov.diagonal().array() += beta * beta;
            cov = 0.5 * (cov + cov.transpose());
            c.llt.compute(cov);
            if (c.llt.info() != Eigen::Success)
                throw NumericalError("posterior mean: observation covariance not SPD");
            c.cross = gm.covariances()[k] * blur_.transpose();
            const Eigen::MatrixXd l = c.llt.matrixL();
            c.log_norm = std::log(gm.weights()[k]) - l.diagonal().array().log().sum() -
                         0.5 * static_cast<double>(gm.dim()) * std::log(2.0 * std::numbers::pi);
            components_.push_back(std::move(c));
        }
    }

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    const Eigen::MatrixXd& blur_matrix() const noexcept { return blur_; }

    Eigen::VectorXd mean(const Eigen::VectorXd& y) const {
        const std::size_t k = components_.size();
        std::vector<double> logp(k);
        std::vector<Eigen::VectorXd> solved(k);
        for (std::size_t i = 0; i < k; ++i) {
            const auto& c = components_[i];
            const Eigen::VectorXd r = y - c.observed_mean;
            solved[i] = c.llt.solve(r);
            logp[i] = c.log_norm - 0.5 * r.dot(solved[i]);
        }
        const double top = *std::max_element(logp.begin(), logp.end());
        double norm = 0.0;
        for (auto& l : logp) norm += (l = std::exp(l - top));
        Eigen::VectorXd out = Eigen::VectorXd::Zero(y.size());
        for (std::size_t i = 0; i < k; ++i) {
            const auto& c = components_[i];
            out += (logp[i] / norm) * (c.prior_mean + c.cross * solved[i]);
        }
        return out;
    }

    Grid mean(const Grid& x_t) const {
        if (x_t.height() != height_ || x_t.width() != width_)
            throw ShapeError("posterior mean: grid shape does not match the mixture");
        return to_grid(mean(to_vector(x_t)), height_, width_);
    }

    /// denoised = B x0_hat, residual = x0_hat - denoised.
    PredictionPair predictions(const Grid& x_t) const {
        const Eigen::VectorXd x0 = mean(to_vector(x_t));
        const Eigen::VectorXd blurry = blur_ * x0;
        return {to_grid(blurry, height_, width_), to_grid(x0 - blurry, height_, width_)};
    }

private:
    struct Component {
        Eigen::VectorXd prior_mean;
        Eigen::VectorXd observed_mean;
        Eigen::MatrixXd cross;  // Sigma_k B^T
        Eigen::LLT<Eigen::MatrixXd> llt;
        double log_norm = 0.0;
    };

    std::size_t height_;
    std::size_t width_;
    double alpha_;
    double beta_;
    Eigen::MatrixXd blur_;
    std::vector<Component> components_;
};

inline Grid posterior_mean_x0(const GaussianMixture& gm, const Grid& x_t,
                              const DiffusionSchedule& s, std::size_t t) {
    if (t < 1 || t > s.T) throw DomainError("posterior_mean_x0: t out of range 1..T");
    return MixturePosterior(gm, s.alpha[t], s.beta[t]).mean(x_t);
}

inline PredictionPair oracle_predictions(const GaussianMixture& gm, const Grid& x_t,
                                         const DiffusionSchedule& s, std::size_t t) {
    if (t < 1 || t > s.T) throw DomainError("oracle_predictions: t out of range 1..T");
    return MixturePosterior(gm, s.alpha[t], s.beta[t]).predictions(x_t);
}

/// The exact (D*, R*) pair as a Predictor. Posteriors for the levels of `schedules` are
/// factored up front; other levels are factored on demand.
class OracleDenoiser {
public:
    explicit OracleDenoiser(GaussianMixture gm, const std::vector<DiffusionSchedule>& schedules = {})
        : gm_(std::move(gm)) {
        for (const auto& s : schedules) prepare(s);
    }

    void prepare(const DiffusionSchedule& s) {
        for (std::size_t t = 1; t <= s.T; ++t) {
            const auto key = std::make_pair(s.alpha[t], s.beta[t]);
            if (s.beta[t] > 0.0 && !cache_.contains(key))
                cache_.emplace(key, MixturePosterior(gm_, s.alpha[t], s.beta[t]));
        }
    }

    PredictionPair operator()(const Grid& x_t, double alpha, double beta) const {
        auto it = cache_.find(std::make_pair(alpha, beta));
        if (it != cache_.end()) return it->second.predictions(x_t);
        return MixturePosterior(gm_, alpha, beta).predictions(x_t);
    }

    const GaussianMixture& mixture() const noexcept { return gm_; }

private:
    GaussianMixture gm_;
    std::map<std::pair<double, double>, MixturePosterior> cache_;
};

}  // namespace warm
