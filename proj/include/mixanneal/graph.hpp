// Graph-regularised mixtures: MST prior construction, Laplacian-smoothed
// mean updates and the annealing driver that freezes components at their
// local width to produce a multi-scale principal graph.

#pragma once

#include "mixanneal/annealing.hpp"
#include "mixanneal/core_em.hpp"
#include "mixanneal/datagen.hpp"
#include "mixanneal/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mixanneal {

/// Euclidean minimum spanning tree over K points (Boruvka).  Ties are broken
/// by lexicographic (i, j) order, which makes the edge order strict and the
/// result deterministic even for duplicate points.
inline MatrixXd minimum_spanning_tree(const MatrixXd& points) {
    const int k = static_cast<int>(points.rows());
    MatrixXd adjacency = MatrixXd::Zero(k, k);
    if (k <= 1) return adjacency;

    struct Edge {
        double w = std::numeric_limits<double>::infinity();
        int i = -1, j = -1;
        bool operator<(const Edge& o) const {
            if (w != o.w) return w < o.w;
            if (i != o.i) return i < o.i;
            return j < o.j;
        }
    };

    detail::UnionFind uf(k);
    int n_components = k;
    while (n_components > 1) {
        std::vector<Edge> best(k);  // cheapest outgoing edge per component root
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                const int ri = uf.find(i), rj = uf.find(j);
                if (ri == rj) continue;
                const Edge e{(points.row(i) - points.row(j)).squaredNorm(), i, j};
                if (e < best[ri]) best[ri] = e;
                if (e < best[rj]) best[rj] = e;
            }
        }
        for (int r = 0; r < k; ++r) {
            if (best[r].i < 0) continue;
            if (!uf.unite(best[r].i, best[r].j)) continue;
            adjacency(best[r].i, best[r].j) = 1.0;
            adjacency(best[r].j, best[r].i) = 1.0;
            --n_components;
        }
    }
    return adjacency;
}

/// L = D - A with D the diagonal degree matrix.
inline MatrixXd graph_laplacian(const MatrixXd& adjacency) {
    detail::check_adjacency(adjacency);
    return MatrixXd(adjacency.colwise().sum().asDiagonal()) - adjacency;
}

/// Graph smoothness sum_ij A_ij ||mu_i - mu_j||^2 (each edge counted twice,
/// matching the Laplacian quadratic form 2 tr(mu^T L mu)).
inline double smoothness(const MatrixXd& adjacency, const MatrixXd& means) {
    detail::check_adjacency(adjacency);
    if (means.rows() != adjacency.rows())
        throw std::invalid_argument("means rows must match adjacency size");
    double total = 0.0;
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
        for (Eigen::Index j = 0; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) total += (means.row(i) - means.row(j)).squaredNorm();
    return total;
}

/// Laplacian-coupled mean update: solves, per dimension,
///   (diag(N_k / sigma_k^2) + 2 lambda_mu L) mu = (sum_i p_ik x_i / sigma_k^2)
/// exactly, which is the fixed point of the implicit regularised update.
inline MatrixXd regularized_m_step_means(const Dataset& data, const MatrixXd& resp,
                                         const VectorXd& variances, double lambda_mu,
                                         const MatrixXd& adjacency) {
    detail::check_adjacency(adjacency);
    const auto k = adjacency.rows();
    if (resp.cols() != k || variances.size() != k)
        throw std::invalid_argument("responsibilities/variances do not match adjacency size");
    if (!(variances.array() > 0.0).all())
        throw std::invalid_argument("variances must be strictly positive");
    if (lambda_mu < 0.0) throw std::invalid_argument("lambda_mu must be >= 0");

    const VectorXd nk = resp.colwise().sum();
    if (lambda_mu == 0.0) {
        for (Eigen::Index c = 0; c < k; ++c)
            if (!(nk(c) > kDegenerateWeight)) throw degenerate_component_error(static_cast<int>(c));
    } else if (!(nk.maxCoeff() > kDegenerateWeight)) {
        throw degenerate_component_error(-1);
    }

    MatrixXd system = 2.0 * lambda_mu * graph_laplacian(adjacency);
    system += MatrixXd(nk.cwiseQuotient(variances).asDiagonal());
    MatrixXd rhs = resp.transpose() * data.points;
    rhs.array().colwise() /= variances.array();

    Eigen::LDLT<MatrixXd> solver(system);
    const MatrixXd means = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !means.allFinite())
        throw degenerate_component_error(-1);
    return means;
}

inline MatrixXd regularized_m_step_means(const Dataset& data, const MatrixXd& resp, double sigma2,
                                         double lambda_mu, const MatrixXd& adjacency) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    return regularized_m_step_means(data, resp, VectorXd::Constant(adjacency.rows(), sigma2),
                                    lambda_mu, adjacency);
}

struct PrincipalGraph {
    MatrixXd adjacency;          // K x K 0/1, MST of the final means
    MatrixXd means;              // K x D
    VectorXd frozen_variances;   // sigma^2 each component was stopped at
    std::vector<bool> frozen_flags;
};

/// Fixed MST adjacency built over a seeded K-point subsample of the data;
/// used for the graph critical temperature when no adjacency is supplied.
inline MatrixXd mst_adjacency_from_data(const Dataset& data, int k, std::uint64_t seed) {
    data.validate();
    if (k < 1) throw std::invalid_argument("adjacency needs K >= 1");
    if (data.points.rows() < k)
        throw std::invalid_argument("not enough points to anchor a K-node adjacency");
    const Dataset sample =
        subsample(data, static_cast<double>(k) / static_cast<double>(data.points.rows()), seed);
    return minimum_spanning_tree(sample.points.topRows(k));
}

/// Hard annealing with the MST smoothness prior.  The adjacency is rebuilt
/// from the current means every inner iteration; a component freezes its
/// personal variance the first time its local width gamma_k catches up with
/// the schedule (only below T_c^graph, where the spread has begun).  Frozen
/// components keep updating their means.
inline std::pair<PrincipalGraph, AnnealTrace> principal_graph_anneal(const Dataset& data, int k,
                                                                     double lambda_mu,
                                                                     AnnealConfig config) {
    data.validate();
    config.k = k;
    config.validate();
    if (config.mode != AnnealMode::hard)
        throw std::invalid_argument("principal_graph_anneal needs a hard-mode config");
    if (lambda_mu < 0.0) throw std::invalid_argument("lambda_mu must be >= 0");

    const double t_c =
        lambda_mu > 0.0
            ? tc_graph(data, mst_adjacency_from_data(data, k, config.seed ^ 0x9e3779b97f4a7c15ULL),
                       lambda_mu)
                  .t_c
            : tc_hard(data).t_c;
    const double t_start = config.t_start.value_or(1.5 * t_c);
    const double t_end = config.t_end.value_or(t_start / 1000.0);
    const auto schedule = cooling_schedule(t_start, t_end, config.cool_factor);

    std::mt19937_64 rng(config.seed);
    detail::AnnealScratch st;
    st.center_of_mass = data.points.colwise().mean();
    st.means = st.center_of_mass.transpose().replicate(k, 1) +
               detail::gaussian_jitter(rng, k, data.points.cols(),
                                       config.jitter * std::sqrt(t_start / 1.5));
    st.variances = VectorXd::Constant(k, schedule.front());
    std::vector<bool> frozen(k, false);

    AnnealTrace trace;
    trace.mode = AnnealMode::hard;

    for (std::size_t si = 0; si < schedule.size(); ++si) {
        const double sigma2 = schedule[si];
        st.warnings.clear();
        if (si > 0)
            st.means += detail::gaussian_jitter(rng, k, data.points.cols(),
                                                config.jitter * std::sqrt(sigma2));
        for (int c = 0; c < k; ++c)
            if (!frozen[c]) st.variances(c) = sigma2;

        const double move_tol =
            (config.jitter > 0.0 ? 1e-4 * config.jitter : config.inner_tol) * std::sqrt(sigma2);
        double prev_ll = std::numeric_limits<double>::quiet_NaN();
        int respawns = 0;
        for (int iter = 0; iter < config.inner_max_iter; ++iter) {
            st.resp = e_step(data, st.means, st.variances);
            if (detail::respawn_degenerate(data, st, rng, config.jitter, sigma2,
                                           /*reset_variance=*/false)) {
                if (++respawns > 10 * k)
                    throw std::runtime_error("annealing stalled: persistent degenerate components");
                --iter;
                continue;
            }
            const MatrixXd adjacency = minimum_spanning_tree(st.means);
            const MatrixXd new_means =
                regularized_m_step_means(data, st.resp, st.variances, lambda_mu, adjacency);
            const double move = (new_means - st.means).rowwise().norm().maxCoeff();
            st.means = new_means;
            const double ll = log_likelihood(data, st.means, st.variances);
            if (iter > 0 && std::abs(ll - prev_ll) <= config.inner_tol * (1.0 + std::abs(prev_ll)) &&
                move <= move_tol)
                break;
            prev_ll = ll;
        }
        st.resp = e_step(data, st.means, st.variances);
        st.weights = st.resp.colwise().sum();
        trace.steps.push_back(
            detail::record_step(data, st, sigma2, detail::RatioDef::gamma_min_over_own));

        if (sigma2 < t_c) {
            const auto& comps = trace.steps.back().components;
            for (int c = 0; c < k; ++c)
                if (!frozen[c] && comps[c].gamma_min >= sigma2) frozen[c] = true;
        }
        if (std::all_of(frozen.begin(), frozen.end(), [](bool f) { return f; })) break;
    }

    PrincipalGraph graph;
    graph.adjacency = minimum_spanning_tree(st.means);
    graph.means = st.means;
    graph.frozen_variances = st.variances;
    graph.frozen_flags = std::move(frozen);
    return {std::move(graph), std::move(trace)};
}

}  // namespace mixanneal
