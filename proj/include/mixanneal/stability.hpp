// Linear-stability analysis of the collapsed EM fixed point: critical
// temperatures for the hard, soft and graph-regularised annealing modes.

#pragma once

#include "mixanneal/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mixanneal {

struct StabilityReport {
    std::string mode;  // "hard" | "soft" | "graph"
    double t_c = 0.0;
    double spectral_radius_at_tc = 0.0;
    std::optional<double> sigma0_at_tc;  // soft mode only
    int matrix_dim = 0;
};

/// Bisection could not bracket the spectral-radius-equals-one root.
class bracket_error : public std::runtime_error {
public:
    bracket_error(double lo, double hi, double rho_lo, double rho_hi)
        : std::runtime_error(format(lo, hi, rho_lo, rho_hi)) {}

private:
    static std::string format(double lo, double hi, double rho_lo, double rho_hi) {
        std::ostringstream os;
        os << "no spectral-radius sign change in bracket [" << lo << ", " << hi
           << "]: rho(lo)=" << rho_lo << ", rho(hi)=" << rho_hi;
        return os.str();
    }
};

/// Biased (1/N) covariance of the full dataset.
inline MatrixXd data_covariance(const Dataset& data) {
    data.validate();
    const MatrixXd centered = data.points.rowwise() - data.points.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(data.points.rows());
}

/// Largest-magnitude eigenvalue over the full (possibly complex) spectrum.
inline double spectral_radius(const MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius needs a square matrix");
    if (!m.allFinite()) throw std::invalid_argument("spectral_radius needs finite entries");
    Eigen::EigenSolver<MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw std::runtime_error("general eigensolver did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Critical temperature of hard annealing: the largest eigenvalue of the
/// data covariance matrix.
inline StabilityReport tc_hard(const Dataset& data) {
    if (data.points.rows() < 2) throw std::invalid_argument("tc_hard needs at least two points");
    const MatrixXd c = data_covariance(data);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed on data covariance");
    StabilityReport report;
    report.mode = "hard";
    report.t_c = es.eigenvalues()(c.rows() - 1);
    report.spectral_radius_at_tc = 1.0;
    report.matrix_dim = static_cast<int>(c.rows());
    return report;
}

/// Common variance sigma_0^2 shared by all collapsed components in soft
/// annealing, in the high-temperature limit.  Data are centred internally.
inline double sigma0_fixed_point(const Dataset& data, int k, double lambda_sigma, double sigma2) {
    data.validate();
    if (k < 1) throw std::invalid_argument("component count must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const auto n = static_cast<double>(data.points.rows());
    const auto d = static_cast<double>(data.points.cols());
    const MatrixXd centered = data.points.rowwise() - data.points.colwise().mean();
    const double sum_sq = centered.squaredNorm();
    return (4.0 * lambda_sigma * k * sigma2 + sum_sq) / (n * d + 4.0 * lambda_sigma * k);
}

/// (D+1) x (D+1) block matrix governing the joint mean/variance
/// perturbations of the collapsed soft-annealing fixed point:
///   [ C/sigma0^2  a^T ]
///   [ b            c  ]
/// with a, b built from the third moments and c from the fourth.
inline MatrixXd soft_stability_matrix(const Dataset& data, int k, double lambda_sigma,
                                      double sigma2) {
    const auto n = static_cast<double>(data.points.rows());
    const auto d = data.points.cols();
    const double s0 = sigma0_fixed_point(data, k, lambda_sigma, sigma2);
    const double m = n * static_cast<double>(d) + 4.0 * lambda_sigma * k;

    const MatrixXd centered = data.points.rowwise() - data.points.colwise().mean();
    const MatrixXd c_data = (centered.transpose() * centered) / n;
    const VectorXd sq = centered.rowwise().squaredNorm();
    const VectorXd third = centered.transpose() * sq;  // sum_i ||x_i||^2 x_i
    const double s2 = sq.sum();
    const double s4 = sq.squaredNorm();

    MatrixXd mat(d + 1, d + 1);
    mat.topLeftCorner(d, d) = c_data / s0;
    mat.topRightCorner(d, 1) = third / (2.0 * n * s0 * s0);
    mat.bottomLeftCorner(1, d) = third.transpose() / (m * s0);
    mat(d, d) = (s4 / s0 - static_cast<double>(d) * s2) / (2.0 * s0 * m);
    return mat;
}

namespace detail {

/// Bisect rho(sigma2) = 1 on [lo, hi]; rho must exceed 1 at lo and fall
/// below 1 at hi.  The bracket is narrowed well past the documented 1e-6
/// root tolerance so reductions like lambda -> 0 hold to ~1e-12.
template <typename RadiusFn>
inline std::pair<double, double> bisect_unit_radius(const RadiusFn& rho_of, double lo, double hi,
                                                    int max_iter = 200) {
    double rho_lo = rho_of(lo);
    double rho_hi = rho_of(hi);
    if (!(rho_lo > 1.0) || !(rho_hi < 1.0)) throw bracket_error(lo, hi, rho_lo, rho_hi);
    double mid = 0.5 * (lo + hi);
    double rho_mid = rho_of(mid);
    for (int it = 0; it < max_iter && (hi - lo) > 1e-12 * mid; ++it) {
        if (rho_mid > 1.0)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        rho_mid = rho_of(mid);
    }
    return {mid, rho_mid};
}

inline MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace detail

/// Critical temperature of soft annealing: the sigma^2 at which the
/// spectral radius of the soft stability matrix crosses 1.
inline StabilityReport tc_soft(const Dataset& data, int k, double lambda_sigma) {
    if (k < 2) throw std::invalid_argument("tc_soft needs K >= 2");
    if (!(lambda_sigma > 0.0)) throw std::invalid_argument("tc_soft needs lambda_sigma > 0");
    const double t_hi = 10.0 * tc_hard(data).t_c;
    const auto rho_of = [&](double s2) {
        return spectral_radius(soft_stability_matrix(data, k, lambda_sigma, s2));
    };
    const auto [root, rho] = detail::bisect_unit_radius(rho_of, 1e-6 * t_hi, t_hi);
    StabilityReport report;
    report.mode = "soft";
    report.t_c = root;
    report.spectral_radius_at_tc = rho;
    report.sigma0_at_tc = sigma0_fixed_point(data, k, lambda_sigma, root);
    report.matrix_dim = static_cast<int>(data.points.cols()) + 1;
    return report;
}

namespace detail {

inline void check_adjacency(const MatrixXd& adjacency) {
    if (adjacency.rows() != adjacency.cols())
        throw std::invalid_argument("adjacency must be square");
    if (!adjacency.isApprox(adjacency.transpose()))
        throw std::invalid_argument("adjacency must be symmetric");
    if (adjacency.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("adjacency must have a zero diagonal");
}

}  // namespace detail

/// KD x KD perturbation matrix of graph-regularised hard annealing,
/// [(I - J/K) (x) C] [sigma^2 I + (2 lambda_mu K sigma^4 / N) L (x) I_D]^{-1}.
inline MatrixXd graph_stability_matrix(const Dataset& data, const MatrixXd& adjacency,
                                       double lambda_mu, double sigma2) {
    detail::check_adjacency(adjacency);
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (lambda_mu < 0.0) throw std::invalid_argument("lambda_mu must be non-negative");
    const auto k = adjacency.rows();
    const auto d = data.points.cols();
    const auto n = static_cast<double>(data.points.rows());
    const MatrixXd c_data = data_covariance(data);

    MatrixXd u = MatrixXd::Identity(k, k).array() - 1.0 / static_cast<double>(k);
    const MatrixXd laplacian = MatrixXd(adjacency.colwise().sum().asDiagonal()) - adjacency;

    const MatrixXd uc = detail::kronecker(u, c_data);
    MatrixXd bracket = detail::kronecker(laplacian, MatrixXd::Identity(d, d));
    bracket *= 2.0 * lambda_mu * static_cast<double>(k) * sigma2 * sigma2 / n;
    bracket += sigma2 * MatrixXd::Identity(k * d, k * d);

    Eigen::LDLT<MatrixXd> solver(bracket);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("graph stability bracket matrix is not factorisable");
    // bracket and uc are both symmetric, so (uc * bracket^-1) = (bracket^-1 * uc)^T.
    return solver.solve(uc).transpose();
}

/// Critical temperature of graph-regularised annealing for a fixed adjacency.
inline StabilityReport tc_graph(const Dataset& data, const MatrixXd& adjacency, double lambda_mu) {
    const double t_hi = 10.0 * tc_hard(data).t_c;
    const auto rho_of = [&](double s2) {
        return spectral_radius(graph_stability_matrix(data, adjacency, lambda_mu, s2));
    };
    const auto [root, rho] = detail::bisect_unit_radius(rho_of, 1e-6 * t_hi, t_hi);
    StabilityReport report;
    report.mode = "graph";
    report.t_c = root;
    report.spectral_radius_at_tc = rho;
    report.matrix_dim = static_cast<int>(adjacency.rows() * data.points.cols());
    return report;
}

}  // namespace mixanneal
