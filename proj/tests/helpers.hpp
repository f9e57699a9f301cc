#pragma once

#include "mixanneal/types.hpp"

#include <random>

namespace test_helpers {

inline mixanneal::MatrixXd randn(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal;
    mixanneal::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline mixanneal::Dataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d,
                                         double spread = 1.0) {
    mixanneal::Dataset data;
    data.points = spread * randn(rng, n, d);
    return data;
}

/// Random responsibility matrix with normalised rows.
inline mixanneal::MatrixXd random_responsibilities(std::mt19937_64& rng, Eigen::Index n,
                                                   Eigen::Index k) {
    std::uniform_real_distribution<double> uniform(0.01, 1.0);
    mixanneal::MatrixXd resp(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index c = 0; c < k; ++c) total += (resp(i, c) = uniform(rng));
        resp.row(i) /= total;
    }
    return resp;
}

}  // namespace test_helpers
