// Annealing configuration and the per-temperature trace record that every
// driver produces and the analysis module consumes.

#pragma once

#include "mixanneal/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixanneal {

enum class AnnealMode { hard, soft };

struct AnnealConfig {
    AnnealMode mode = AnnealMode::hard;
    int k = 25;
    std::optional<double> t_start;  // nullopt: auto, 1.5 x T_c for the mode
    std::optional<double> t_end;    // nullopt: resolved t_start / 1000
    double cool_factor = 0.99;
    int inner_max_iter = 500;
    double inner_tol = 1e-8;        // relative log-likelihood change
    double lambda_sigma = 2.0;      // soft mode prior strength
    double jitter = 1e-4;           // symmetry-breaking perturbation scale
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 2) throw std::invalid_argument("annealing needs K >= 2");
        if (!(cool_factor > 0.0) || !(cool_factor < 1.0))
            throw std::invalid_argument("cool_factor must lie in (0, 1)");
        if (t_start && !(*t_start > 0.0)) throw std::invalid_argument("t_start must be positive");
        if (t_end && !(*t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
        if (t_start && t_end && !(*t_end < *t_start))
            throw std::invalid_argument("need t_end < t_start");
        if (inner_max_iter < 1) throw std::invalid_argument("inner_max_iter must be >= 1");
        if (!(inner_tol > 0.0)) throw std::invalid_argument("inner_tol must be positive");
        if (lambda_sigma < 0.0) throw std::invalid_argument("lambda_sigma must be >= 0");
        if (jitter < 0.0) throw std::invalid_argument("jitter must be >= 0");
    }
};

struct TraceComponent {
    VectorXd mean;
    double variance = 0.0;   // sigma_k^2 (equals sigma2 in hard mode)
    double gamma_max = 0.0;  // largest weighted-covariance eigenvalue
    double gamma_min = 0.0;  // smallest weighted-covariance eigenvalue
    double weight = 0.0;     // N_k
    double ratio = 0.0;      // Gamma_k / sigma^2 (hard) or Gamma_k / sigma_k^2 (soft)
};

struct TraceStep {
    double sigma2 = 0.0;
    std::vector<TraceComponent> components;
    int k_r = 0;
    VectorXi macro_labels;              // 1-based, length K
    std::vector<std::string> warnings;  // e.g. degenerate-component respawns
};

struct AnnealTrace {
    AnnealMode mode = AnnealMode::hard;
    std::vector<TraceStep> steps;

    int components() const {
        return steps.empty() ? 0 : static_cast<int>(steps.front().components.size());
    }
};

}  // namespace mixanneal
