// E/M update kernels for spherical, uniform-weight Gaussian mixtures.
// All annealing drivers are built out of these functions.

#pragma once

#include "mixanneal/types.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mixanneal {

inline constexpr double kDegenerateWeight = 1e-12;

namespace detail {

inline void check_em_args(const MatrixXd& points, const MatrixXd& means, const VectorXd& variances) {
    if (means.rows() < 1) throw std::invalid_argument("mixture needs at least one component");
    if (means.cols() != points.cols())
        throw std::invalid_argument("mean dimension does not match point dimension");
    if (variances.size() != means.rows())
        throw std::invalid_argument("variance count does not match component count");
    if (!points.allFinite() || !means.allFinite() || !variances.allFinite())
        throw std::invalid_argument("non-finite input");
    if (!(variances.array() > 0.0).all())
        throw std::invalid_argument("variances must be strictly positive");
}

/// Squared Euclidean distances, N x K.  Clamped at zero: the expanded form
/// ||x||^2 - 2<x,mu> + ||mu||^2 can go slightly negative in floating point.
inline MatrixXd squared_distances(const MatrixXd& points, const MatrixXd& means) {
    const VectorXd xs = points.rowwise().squaredNorm();
    const VectorXd ms = means.rowwise().squaredNorm();
    MatrixXd d2 = -2.0 * (points * means.transpose());
    d2.colwise() += xs;
    d2.rowwise() += ms.transpose();
    return d2.cwiseMax(0.0);
}

/// Log N(x_i; mu_k, sigma_k^2 I) with full normalisation, N x K.
inline MatrixXd log_densities(const MatrixXd& points, const MatrixXd& means, const VectorXd& variances) {
    const auto d = static_cast<double>(points.cols());
    MatrixXd ld = squared_distances(points, means);
    const Eigen::RowVectorXd inv2v = (0.5 / variances.array()).transpose();
    ld = -(ld.array().rowwise() * inv2v.array()).matrix();
    const Eigen::RowVectorXd lognorm =
        (0.5 * d * (2.0 * std::numbers::pi * variances.array()).log()).transpose();
    ld.rowwise() -= lognorm;
    return ld;
}

}  // namespace detail

/// Posterior responsibilities p_ik, evaluated in the log domain with a
/// per-point max subtraction so the tail of the cooling schedule cannot
/// underflow everything at once.  For equal variances the normalisation
/// factors cancel and this is the plain Gibbs assignment.
inline MatrixXd e_step(const Dataset& data, const MatrixXd& means, const VectorXd& variances) {
    detail::check_em_args(data.points, means, variances);
    MatrixXd logp = detail::log_densities(data.points, means, variances);
    const VectorXd rowmax = logp.rowwise().maxCoeff();
    logp.colwise() -= rowmax;
    MatrixXd p = logp.array().exp();
    const VectorXd rowsum = p.rowwise().sum();
    p.array().colwise() /= rowsum.array();
    return p;
}

struct MStepResult {
    MatrixXd means;      // K x D
    VectorXd variances;  // K
    VectorXd weights;    // N_k
};

/// Responsibility-weighted means; throws degenerate_component_error when a
/// component's mass falls below eps_weight.
inline MatrixXd m_step_means(const Dataset& data, const MatrixXd& resp,
                             double eps_weight = kDegenerateWeight) {
    if (resp.rows() != data.points.rows())
        throw std::invalid_argument("responsibility rows do not match point count");
    const VectorXd nk = resp.colwise().sum();
    for (Eigen::Index k = 0; k < nk.size(); ++k)
        if (!(nk(k) > eps_weight)) throw degenerate_component_error(static_cast<int>(k));
    MatrixXd means = resp.transpose() * data.points;
    means.array().colwise() /= nk.array();
    return means;
}

/// Spherical variance of each component around the given (fixed) means.
inline VectorXd variance_update(const Dataset& data, const MatrixXd& resp, const MatrixXd& means,
                                double eps_weight = kDegenerateWeight) {
    const auto d = static_cast<double>(data.points.cols());
    const VectorXd nk = resp.colwise().sum();
    for (Eigen::Index k = 0; k < nk.size(); ++k)
        if (!(nk(k) > eps_weight)) throw degenerate_component_error(static_cast<int>(k));
    const VectorXd xs = data.points.rowwise().squaredNorm();
    const MatrixXd rx = resp.transpose() * data.points;  // K x D
    const VectorXd cross = (rx.array() * means.array()).rowwise().sum();
    const VectorXd ms = means.rowwise().squaredNorm();
    VectorXd sumsq = resp.transpose() * xs;
    sumsq += nk.cwiseProduct(ms) - 2.0 * cross;
    return (sumsq.array() / (d * nk.array())).cwiseMax(0.0);
}

/// Full M-step: weighted means, then spherical variances about them.
inline MStepResult m_step(const Dataset& data, const MatrixXd& resp,
                          double eps_weight = kDegenerateWeight) {
    MStepResult out;
    out.means = m_step_means(data, resp, eps_weight);
    out.variances = variance_update(data, resp, out.means, eps_weight);
    out.weights = resp.colwise().sum();
    return out;
}

/// Weighted covariance of the data about mean_k, weights being one
/// responsibility column.  Assembled from sqrt-weighted centred rows so the
/// result is symmetric PSD down to roundoff.
inline MatrixXd weighted_covariance(const Dataset& data, const VectorXd& weights,
                                    const VectorXd& mean_k) {
    if (weights.size() != data.points.rows())
        throw std::invalid_argument("weight vector length does not match point count");
    if (mean_k.size() != data.points.cols())
        throw std::invalid_argument("mean dimension does not match point dimension");
    const double total = weights.sum();
    if (!(total > 0.0)) throw degenerate_component_error(-1);
    MatrixXd centered = data.points.rowwise() - mean_k.transpose();
    centered.array().colwise() *= weights.cwiseMax(0.0).cwiseSqrt().array();
    return (centered.transpose() * centered) / total;
}

/// Extreme eigenvalues Gamma_k (max) and gamma_k (min) of every component's
/// weighted covariance.  D stays small here, so a full symmetric
/// decomposition is used rather than power iteration.
inline ComponentScales component_scales(const Dataset& data, const MixtureState& state) {
    const int k = state.components();
    ComponentScales scales;
    scales.gamma_max.resize(k);
    scales.gamma_min.resize(k);
    for (int c = 0; c < k; ++c) {
        if (!(state.responsibilities.col(c).sum() > 0.0)) throw degenerate_component_error(c);
        const MatrixXd sigma =
            weighted_covariance(data, state.responsibilities.col(c), state.means.row(c));
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("symmetric eigensolver failed on weighted covariance");
        scales.gamma_min(c) = es.eigenvalues()(0);
        scales.gamma_max(c) = es.eigenvalues()(sigma.rows() - 1);
    }
    return scales;
}

/// Log-likelihood of the uniform-weight mixture, sum_i log (1/K) sum_k N(x_i; theta_k).
inline double log_likelihood(const Dataset& data, const MatrixXd& means, const VectorXd& variances) {
    detail::check_em_args(data.points, means, variances);
    MatrixXd logp = detail::log_densities(data.points, means, variances);
    const VectorXd rowmax = logp.rowwise().maxCoeff();
    logp.colwise() -= rowmax;
    const VectorXd lse = logp.array().exp().rowwise().sum().log() + rowmax.array();
    return lse.sum() - static_cast<double>(data.points.rows()) *
                           std::log(static_cast<double>(means.rows()));
}

inline double log_likelihood(const Dataset& data, const MixtureState& state) {
    return log_likelihood(data, state.means, state.variances);
}

}  // namespace mixanneal
