// Hard and soft deterministic-annealing drivers: geometric cooling, inner
// EM loops with symmetry-breaking jitter, trace recording and the freezing
// protocol that recovers per-cluster variances from a hard trace.

#pragma once

#include "mixanneal/core_em.hpp"
#include "mixanneal/stability.hpp"
#include "mixanneal/trace.hpp"
#include "mixanneal/transitions.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixanneal {

/// Geometric sequence t_start * cool^n, truncated at the first value below
/// t_end, with t_end appended.
inline std::vector<double> cooling_schedule(double t_start, double t_end, double cool_factor) {
    if (!(t_end > 0.0) || !(t_end < t_start))
        throw std::invalid_argument("cooling schedule needs 0 < t_end < t_start");
    if (!(cool_factor > 0.0) || !(cool_factor < 1.0))
        throw std::invalid_argument("cool_factor must lie in (0, 1)");
    std::vector<double> sigma2s;
    for (double v = t_start; v >= t_end; v *= cool_factor) sigma2s.push_back(v);
    if (sigma2s.back() != t_end) sigma2s.push_back(t_end);
    return sigma2s;
}

namespace detail {

inline MatrixXd gaussian_jitter(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                double scale) {
    std::normal_distribution<double> normal;
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
    return m;
}

/// The collapse scale used to merge component positions into macro clusters:
/// temperature-aware so the merge radius follows the annealing.
inline double collapse_epsilon(double sigma2) { return 1e-3 * std::sqrt(sigma2); }

struct AnnealScratch {
    MatrixXd means;
    VectorXd variances;
    MatrixXd resp;
    VectorXd weights;
    VectorXd center_of_mass;
    std::vector<std::string> warnings;
};

/// Respawn components whose responsibility mass vanished; returns true when
/// something was respawned (the E-step must then be redone).
inline bool respawn_degenerate(const Dataset& data, AnnealScratch& st, std::mt19937_64& rng,
                               double jitter, double sigma2, bool reset_variance) {
    const VectorXd nk = st.resp.colwise().sum();
    bool any = false;
    for (Eigen::Index k = 0; k < nk.size(); ++k) {
        if (nk(k) > kDegenerateWeight) continue;
        st.means.row(k) = st.center_of_mass.transpose() +
                          gaussian_jitter(rng, 1, data.points.cols(), jitter * std::sqrt(sigma2));
        if (reset_variance) st.variances(k) = sigma2;
        st.warnings.push_back("respawned degenerate component " + std::to_string(k));
        any = true;
    }
    return any;
}

/// Spherical variance update under the inverse-Gamma prior with mode sigma2:
/// (sum_i p_ik ||x_i - mu_k||^2 + 4 lambda sigma^2) / (D N_k + 4 lambda).
inline VectorXd soft_variance_update_impl(const Dataset& data, const MatrixXd& resp,
                                          const MatrixXd& means, double lambda_sigma,
                                          double sigma2) {
    const auto d = static_cast<double>(data.points.cols());
    const VectorXd nk = resp.colwise().sum();
    const VectorXd xs = data.points.rowwise().squaredNorm();
    const MatrixXd rx = resp.transpose() * data.points;
    const VectorXd cross = (rx.array() * means.array()).rowwise().sum();
    const VectorXd ms = means.rowwise().squaredNorm();
    VectorXd sumsq = resp.transpose() * xs;
    sumsq += nk.cwiseProduct(ms) - 2.0 * cross;
    sumsq = sumsq.cwiseMax(0.0);
    return (sumsq.array() + 4.0 * lambda_sigma * sigma2) /
           (d * nk.array() + 4.0 * lambda_sigma);
}

// Which scale-to-temperature ratio a trace records: Gamma_k/sigma^2 in hard
// mode, Gamma_k/sigma_k^2 in soft mode, gamma_k/sigma_k^2 for principal
// graphs where the local width is the scale of interest.
enum class RatioDef { gamma_max_over_schedule, gamma_max_over_own, gamma_min_over_own };

inline TraceStep record_step(const Dataset& data, const AnnealScratch& st, double sigma2,
                             RatioDef ratio_def) {
    MixtureState state{st.means, st.variances, st.resp, st.weights};
    const ComponentScales scales = component_scales(data, state);
    const MacroClustering macro = detect_macro_clusters(st.means, collapse_epsilon(sigma2));

    TraceStep step;
    step.sigma2 = sigma2;
    step.k_r = macro.k_r;
    step.macro_labels = macro.labels;
    step.warnings = st.warnings;
    const int k = static_cast<int>(st.means.rows());
    step.components.resize(k);
    for (int c = 0; c < k; ++c) {
        auto& tc = step.components[c];
        tc.mean = st.means.row(c);
        tc.variance = st.variances(c);
        tc.gamma_max = scales.gamma_max(c);
        tc.gamma_min = scales.gamma_min(c);
        tc.weight = st.weights(c);
        switch (ratio_def) {
            case RatioDef::gamma_max_over_schedule: tc.ratio = scales.gamma_max(c) / sigma2; break;
            case RatioDef::gamma_max_over_own: tc.ratio = scales.gamma_max(c) / st.variances(c); break;
            case RatioDef::gamma_min_over_own: tc.ratio = scales.gamma_min(c) / st.variances(c); break;
        }
    }
    return step;
}

inline AnnealTrace anneal_impl(const Dataset& data, const AnnealConfig& config) {
    data.validate();
    config.validate();
    const bool soft = config.mode == AnnealMode::soft;

    // The mode's critical temperature is only computed when the caller asks
    // for an automatic start; an explicit t_start must not depend on it.
    const double t_start = config.t_start
                               ? *config.t_start
                               : 1.5 * (soft ? tc_soft(data, config.k, config.lambda_sigma).t_c
                                             : tc_hard(data).t_c);
    const double t_end = config.t_end.value_or(t_start / 1000.0);
    const auto schedule = cooling_schedule(t_start, t_end, config.cool_factor);

    std::mt19937_64 rng(config.seed);
    AnnealScratch st;
    st.center_of_mass = data.points.colwise().mean();
    st.means = st.center_of_mass.transpose().replicate(config.k, 1) +
               gaussian_jitter(rng, config.k, data.points.cols(),
                               config.jitter * std::sqrt(t_start / 1.5));
    st.variances = VectorXd::Constant(config.k, schedule.front());

    AnnealTrace trace;
    trace.mode = config.mode;
    trace.steps.reserve(schedule.size());

    for (std::size_t si = 0; si < schedule.size(); ++si) {
        const double sigma2 = schedule[si];
        st.warnings.clear();
        if (si > 0)
            st.means += gaussian_jitter(rng, config.k, data.points.cols(),
                                        config.jitter * std::sqrt(sigma2));
        if (!soft) st.variances.setConstant(sigma2);

        // Convergence needs both a log-likelihood plateau and settled means:
        // near a marginal instability the likelihood is flat long before the
        // unstable mode has finished growing.
        const double move_tol =
            (config.jitter > 0.0 ? 1e-4 * config.jitter : config.inner_tol) * std::sqrt(sigma2);
        double prev_ll = std::numeric_limits<double>::quiet_NaN();
        int respawns = 0;
        for (int iter = 0; iter < config.inner_max_iter; ++iter) {
            st.resp = e_step(data, st.means, st.variances);
            if (respawn_degenerate(data, st, rng, config.jitter, sigma2, soft)) {
                if (++respawns > 10 * config.k)
                    throw std::runtime_error("annealing stalled: persistent degenerate components");
                --iter;
                continue;
            }
            const MatrixXd new_means = m_step_means(data, st.resp);
            if (soft)
                st.variances = soft_variance_update_impl(data, st.resp, new_means,
                                                         config.lambda_sigma, sigma2);
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
        trace.steps.push_back(record_step(
            data, st, sigma2,
            soft ? RatioDef::gamma_max_over_own : RatioDef::gamma_max_over_schedule));
    }
    return trace;
}

}  // namespace detail

/// Classical annealing: all component variances pinned to the schedule.
inline AnnealTrace hard_anneal(const Dataset& data, const AnnealConfig& config) {
    if (config.mode != AnnealMode::hard)
        throw std::invalid_argument("hard_anneal needs a hard-mode config");
    return detail::anneal_impl(data, config);
}

/// Relaxed annealing: variances follow the inverse-Gamma prior centred on
/// the schedule value, so each component can adapt to its local scale.
inline AnnealTrace soft_anneal(const Dataset& data, const AnnealConfig& config) {
    if (config.mode != AnnealMode::soft)
        throw std::invalid_argument("soft_anneal needs a soft-mode config");
    return detail::anneal_impl(data, config);
}

/// Prior-regularised variance update (exposed for tests; lambda_sigma = 0
/// reduces it to the plain M-step variance line).
inline VectorXd soft_variance_update(const Dataset& data, const MatrixXd& resp,
                                     const MatrixXd& means, double lambda_sigma, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (lambda_sigma < 0.0) throw std::invalid_argument("lambda_sigma must be >= 0");
    return detail::soft_variance_update_impl(data, resp, means, lambda_sigma, sigma2);
}

struct FreezeResult {
    MatrixXd means;              // K x D, position each component was frozen at
    VectorXd variances;          // sigma_hat^2 per component
    std::vector<int> freeze_steps;
    std::vector<bool> flagged;   // no clean split event was found
};

namespace detail {

/// A split counts as a physical (between-cluster) one when the ratio had
/// reached the unit line just before and drops far below it right after;
/// splits inside a cluster leave the ratio hovering near 1.
inline bool physical_split(double pre_ratio, double post_ratio, double cool_factor,
                           double drop_threshold) {
    return pre_ratio >= cool_factor && post_ratio <= drop_threshold;
}

}  // namespace detail

/// Fig.-2-style variance recovery: fix every component's mean at the
/// position it held at its last physical split, then let the variances
/// evolve freely to convergence.
inline FreezeResult freeze_variances(const Dataset& data, const AnnealTrace& trace,
                                     const AnnealConfig& config, double drop_threshold = 0.5) {
    if (trace.mode != AnnealMode::hard)
        throw std::invalid_argument("freeze_variances needs a hard-mode trace");
    if (trace.steps.size() < 2) throw std::invalid_argument("trace too short to freeze");
    const auto& steps = trace.steps;
    const int k = trace.components();

    std::vector<std::vector<std::vector<int>>> groups(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) groups[t] = detail::groups_of_step(steps[t]);
    const auto group_of = [&](std::size_t t, int c) -> const std::vector<int>& {
        return groups[t][steps[t].macro_labels(c) - 1];
    };

    std::vector<int> freeze_step(k, -1);
    for (int c = 0; c < k; ++c) {
        for (std::size_t t = 1; t < steps.size(); ++t) {
            if (!detail::strict_subset(group_of(t, c), group_of(t - 1, c))) continue;
            if (detail::physical_split(steps[t - 1].components[c].ratio,
                                       steps[t].components[c].ratio, config.cool_factor,
                                       drop_threshold))
                freeze_step[c] = static_cast<int>(t);
        }
    }

    FreezeResult out;
    out.flagged.assign(k, false);
    for (int c = 0; c < k; ++c) {
        if (freeze_step[c] >= 0) continue;
        out.flagged[c] = true;
        // Inherit the freeze point of the last group the component shared
        // with somebody who has one.
        for (std::size_t t = steps.size(); t-- > 0 && freeze_step[c] < 0;) {
            for (int member : group_of(t, c))
                if (member != c && freeze_step[member] >= 0) {
                    freeze_step[c] = freeze_step[member];
                    break;
                }
        }
        if (freeze_step[c] < 0) {
            // No split anywhere (single physical cluster): freeze where the
            // ratio comes closest to 1 from above, or failing that, closest
            // from below.
            double best_above = std::numeric_limits<double>::infinity();
            double best_below = -std::numeric_limits<double>::infinity();
            int above = -1, below = 0;
            for (std::size_t t = 0; t < steps.size(); ++t) {
                const double r = steps[t].components[c].ratio;
                if (r >= 1.0 && r - 1.0 < best_above) {
                    best_above = r - 1.0;
                    above = static_cast<int>(t);
                }
                if (r < 1.0 && r > best_below) {
                    best_below = r;
                    below = static_cast<int>(t);
                }
            }
            freeze_step[c] = above >= 0 ? above : below;
        }
    }

    out.means.resize(k, data.points.cols());
    out.variances.resize(k);
    for (int c = 0; c < k; ++c) {
        out.means.row(c) = steps[freeze_step[c]].components[c].mean;
        out.variances(c) = steps[freeze_step[c]].sigma2;
    }
    out.freeze_steps = freeze_step;

    // Variance-only EM around the frozen positions.
    for (int iter = 0; iter < config.inner_max_iter; ++iter) {
        const MatrixXd resp = e_step(data, out.means, out.variances);
        const VectorXd nk = resp.colwise().sum();
        VectorXd next = out.variances;
        const VectorXd updated = [&] {
            // Guard degenerate columns by hand: a starved component keeps its
            // current variance instead of aborting the whole freeze.
            VectorXd v(k);
            const VectorXd xs = data.points.rowwise().squaredNorm();
            const MatrixXd rx = resp.transpose() * data.points;
            const VectorXd cross = (rx.array() * out.means.array()).rowwise().sum();
            const VectorXd ms = out.means.rowwise().squaredNorm();
            const VectorXd sumsq =
                (VectorXd(resp.transpose() * xs) + nk.cwiseProduct(ms) - 2.0 * cross).cwiseMax(0.0);
            for (int c = 0; c < k; ++c)
                v(c) = nk(c) > kDegenerateWeight
                           ? sumsq(c) / (static_cast<double>(data.points.cols()) * nk(c))
                           : out.variances(c);
            return v;
        }();
        next = updated.cwiseMax(1e-300);
        const double rel_change =
            ((next - out.variances).cwiseAbs().array() / out.variances.array()).maxCoeff();
        out.variances = next;
        if (rel_change < 1e-10) break;
    }
    return out;
}

}  // namespace mixanneal
