// Overlap order parameter: permutation-maximised agreement between inferred
// and ground-truth labels, its theoretical value under the true mixture
// parameters, and its evolution along an annealing trace.

#pragma once

#include "mixanneal/core_em.hpp"
#include "mixanneal/trace.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mixanneal {

struct OverlapResult {
    std::optional<double> q_value;       // unset when not applicable
    std::vector<int> best_permutation;   // per true label 1..q: matched estimated label, 0 if none
    bool applicable = true;              // false when the estimate uses more labels than q
};

namespace detail {

/// O(n^3) Hungarian algorithm (potentials formulation) for a square
/// min-cost assignment; returns the column matched to each row.
inline std::vector<int> min_cost_assignment(const MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

}  // namespace detail

/// Q = (max_pi (1/N) sum_i delta(est_i, pi(true_i)) - 1/q) / (1 - 1/q).
/// The maximisation over label permutations is solved exactly as a linear
/// assignment on the confusion matrix.  Not applicable when the estimate
/// uses more than q distinct labels.
inline OverlapResult overlap(const VectorXi& estimated, const VectorXi& truth, int q) {
    if (estimated.size() != truth.size())
        throw std::invalid_argument("label vectors must have equal length");
    if (estimated.size() == 0) throw std::invalid_argument("label vectors are empty");
    if (q < 2) throw std::invalid_argument("overlap needs q >= 2");
    if ((truth.array() < 1).any() || (truth.array() > q).any())
        throw std::invalid_argument("true labels must lie in {1..q}");
    if ((estimated.array() < 1).any())
        throw std::invalid_argument("estimated labels must be positive");

    std::vector<int> alphabet(estimated.data(), estimated.data() + estimated.size());
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());

    OverlapResult result;
    if (static_cast<int>(alphabet.size()) > q) {
        result.applicable = false;
        return result;
    }

    MatrixXd confusion = MatrixXd::Zero(q, q);  // rows: estimated (compacted), cols: true
    for (Eigen::Index i = 0; i < estimated.size(); ++i) {
        const auto row = std::lower_bound(alphabet.begin(), alphabet.end(), estimated(i)) -
                         alphabet.begin();
        confusion(row, truth(i) - 1) += 1.0;
    }

    const MatrixXd cost = MatrixXd::Constant(q, q, confusion.maxCoeff()) - confusion;
    const std::vector<int> col_of_row = detail::min_cost_assignment(cost);

    double matches = 0.0;
    result.best_permutation.assign(q, 0);
    for (int row = 0; row < q; ++row) {
        matches += confusion(row, col_of_row[row]);
        if (row < static_cast<int>(alphabet.size()))
            result.best_permutation[col_of_row[row]] = alphabet[row];
    }
    const double frac = matches / static_cast<double>(estimated.size());
    const double inv_q = 1.0 / static_cast<double>(q);
    result.q_value = (frac - inv_q) / (1.0 - inv_q);
    return result;
}

/// Overlap achievable from the ground-truth parameters themselves: assign
/// each point to its posterior argmax under the true mixture and score it.
inline double theoretical_overlap(const Dataset& data, const MatrixXd& true_means,
                                  const VectorXd& true_variances) {
    data.validate();
    if (!data.labels || !data.q)
        throw std::invalid_argument("theoretical_overlap needs a labeled dataset");
    const MatrixXd resp = e_step(data, true_means, true_variances);
    VectorXi estimated(resp.rows());
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
        Eigen::Index best = 0;
        resp.row(i).maxCoeff(&best);
        estimated(i) = static_cast<int>(best) + 1;
    }
    const OverlapResult result = overlap(estimated, *data.labels, *data.q);
    if (!result.applicable)
        throw std::runtime_error("theoretical overlap is not applicable: more components than q");
    return *result.q_value;
}

/// Q along a trace: points are hard-assigned to the macro clusters of each
/// step (posterior argmax over the macro centres, using the mean member
/// variance); steps with K_r > q are marked not applicable.
inline std::vector<std::pair<double, std::optional<double>>> overlap_series(
    const AnnealTrace& trace, const Dataset& data) {
    data.validate();
    if (!data.labels || !data.q) throw std::invalid_argument("overlap_series needs a labeled dataset");
    const int q = *data.q;
    const int k = trace.components();

    std::vector<std::pair<double, std::optional<double>>> series;
    series.reserve(trace.steps.size());
    for (const auto& step : trace.steps) {
        if (step.k_r > q) {
            series.emplace_back(step.sigma2, std::nullopt);
            continue;
        }
        MatrixXd centers = MatrixXd::Zero(step.k_r, data.points.cols());
        VectorXd variances = VectorXd::Zero(step.k_r);
        VectorXd counts = VectorXd::Zero(step.k_r);
        for (int c = 0; c < k; ++c) {
            const int g = step.macro_labels(c) - 1;
            centers.row(g) += step.components[c].mean.transpose();
            variances(g) += step.components[c].variance;
            counts(g) += 1.0;
        }
        centers.array().colwise() /= counts.array();
        variances.array() /= counts.array();

        const MatrixXd resp = e_step(data, centers, variances);
        VectorXi estimated(resp.rows());
        for (Eigen::Index i = 0; i < resp.rows(); ++i) {
            Eigen::Index best = 0;
            resp.row(i).maxCoeff(&best);
            estimated(i) = static_cast<int>(best) + 1;
        }
        const OverlapResult result = overlap(estimated, *data.labels, q);
        series.emplace_back(step.sigma2, result.q_value);
    }
    return series;
}

}  // namespace mixanneal
