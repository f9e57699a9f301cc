// Core domain types shared by every module: the dataset, the mixture state
// and the error types surfaced by the update kernels.

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace mixanneal {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// N x D point cloud with optional ground-truth labels in {1..q}.
struct Dataset {
    MatrixXd points;
    std::optional<VectorXi> labels;
    std::optional<int> q;

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    void validate() const {
        if (points.rows() < 1 || points.cols() < 1)
            throw std::invalid_argument("dataset must contain at least one point and one dimension");
        if (!points.allFinite())
            throw std::invalid_argument("dataset contains non-finite coordinates");
        if (labels) {
            if (labels->size() != points.rows())
                throw std::invalid_argument("label vector length does not match point count");
            if (!q || *q < 1)
                throw std::invalid_argument("labeled dataset must declare q >= 1");
            if ((labels->array() < 1).any() || (labels->array() > *q).any())
                throw std::invalid_argument("labels must lie in {1..q}");
        }
    }
};

/// Raised when a component's responsibility mass vanishes; carries the
/// component index so the annealing policy can decide what to do.
class degenerate_component_error : public std::runtime_error {
public:
    explicit degenerate_component_error(int component)
        : std::runtime_error("degenerate mixture component " + std::to_string(component) +
                             ": responsibility mass below threshold"),
          component_(component) {}
    int component() const noexcept { return component_; }

private:
    int component_;
};

/// Spherical uniform-weight mixture state: K means, K variances and the
/// posterior responsibilities they induce.
struct MixtureState {
    MatrixXd means;             // K x D
    VectorXd variances;         // K, all > 0
    MatrixXd responsibilities;  // N x K, rows sum to 1
    VectorXd weights_sum;       // N_k = sum_i p_ik

    int components() const { return static_cast<int>(means.rows()); }
};

/// Extreme eigenvalues of each component's weighted covariance matrix.
struct ComponentScales {
    VectorXd gamma_max;  // largest eigenvalue per component
    VectorXd gamma_min;  // smallest eigenvalue per component
};

}  // namespace mixanneal
