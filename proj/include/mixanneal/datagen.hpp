// Seeded synthetic datasets: isotropic Gaussian blob mixtures, the preset
// geometries used by the test experiments, and subsampling.

#pragma once

#include "mixanneal/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixanneal {

struct BlobSpec {
    MatrixXd centers;         // B x D
    VectorXd variances;       // B, isotropic
    std::vector<int> counts;  // B
    std::uint64_t seed = 0;

    void validate() const {
        const auto b = centers.rows();
        if (b < 1) throw std::invalid_argument("blob spec needs at least one blob");
        if (variances.size() != b || static_cast<Eigen::Index>(counts.size()) != b)
            throw std::invalid_argument("blob spec lists must have equal lengths");
        if ((variances.array() < 0.0).any())
            throw std::invalid_argument("blob variances must be non-negative");
        for (int c : counts)
            if (c < 1) throw std::invalid_argument("blob counts must be >= 1");
    }
};

/// Per-cluster ground truth emitted alongside generated data.
struct ClusterTruth {
    VectorXd center;                     // generating
    double variance = 0.0;               // generating isotropic variance (width^2 for branches)
    int count = 0;
    VectorXd empirical_mean;
    VectorXd empirical_cov_eigenvalues;  // ascending
    double empirical_variance = 0.0;     // mean squared deviation / D (transverse for branches)
};

struct DatasetTruth {
    std::string preset_name;
    int q = 0;
    std::vector<ClusterTruth> clusters;
    std::vector<int> macro_of_cluster;  // empty when the preset has no macro level
    std::optional<double> contrast;
};

struct PresetResult {
    Dataset data;
    DatasetTruth truth;
};

namespace detail {

inline MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal;
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline ClusterTruth cluster_truth_from_points(const MatrixXd& pts, const VectorXd& center,
                                              double variance) {
    ClusterTruth t;
    t.center = center;
    t.variance = variance;
    t.count = static_cast<int>(pts.rows());
    t.empirical_mean = pts.colwise().mean();
    const MatrixXd centered = pts.rowwise() - t.empirical_mean.transpose();
    const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(pts.rows());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    t.empirical_cov_eigenvalues = es.eigenvalues();
    t.empirical_variance = cov.trace() / static_cast<double>(pts.cols());
    return t;
}

}  // namespace detail

/// Sample the blob mixture; labels are 1-based blob indices.
inline Dataset generate(const BlobSpec& spec) {
    spec.validate();
    const auto b = spec.centers.rows();
    const auto d = spec.centers.cols();
    const int total = std::accumulate(spec.counts.begin(), spec.counts.end(), 0);
    std::mt19937_64 rng(spec.seed);

    Dataset data;
    data.points.resize(total, d);
    VectorXi labels(total);
    Eigen::Index row = 0;
    for (Eigen::Index blob = 0; blob < b; ++blob) {
        const double sd = std::sqrt(spec.variances(blob));
        const MatrixXd noise = detail::gaussian_matrix(rng, spec.counts[blob], d);
        data.points.middleRows(row, spec.counts[blob]) =
            (sd * noise).rowwise() + spec.centers.row(blob);
        labels.segment(row, spec.counts[blob]).setConstant(static_cast<int>(blob) + 1);
        row += spec.counts[blob];
    }
    data.labels = labels;
    data.q = static_cast<int>(b);
    return data;
}

namespace detail {

inline PresetResult blob_preset(const std::string& name, const BlobSpec& spec,
                                std::vector<int> macro_of_cluster = {},
                                std::optional<double> contrast = {}) {
    PresetResult out;
    out.data = generate(spec);
    out.truth.preset_name = name;
    out.truth.q = static_cast<int>(spec.centers.rows());
    out.truth.macro_of_cluster = std::move(macro_of_cluster);
    out.truth.contrast = contrast;
    Eigen::Index row = 0;
    for (Eigen::Index blob = 0; blob < spec.centers.rows(); ++blob) {
        out.truth.clusters.push_back(cluster_truth_from_points(
            out.data.points.middleRows(row, spec.counts[blob]), spec.centers.row(blob),
            spec.variances(blob)));
        row += spec.counts[blob];
    }
    return out;
}

struct BranchSpec {
    Eigen::Vector2d start;
    Eigen::Vector2d end;
    double width;  // transverse standard deviation
    int count;
};

inline PresetResult tree_preset(const std::vector<BranchSpec>& branches, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal;

    int total = 0;
    for (const auto& br : branches) total += br.count;

    PresetResult out;
    out.truth.preset_name = "tree_branches_2d";
    out.truth.q = static_cast<int>(branches.size());
    out.data.points.resize(total, 2);
    VectorXi labels(total);

    Eigen::Index row = 0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto& br = branches[b];
        const Eigen::Vector2d axis = br.end - br.start;
        const Eigen::Vector2d perp = Eigen::Vector2d(-axis.y(), axis.x()).normalized();
        const Eigen::Index first = row;
        double sumsq_offset = 0.0;
        for (int i = 0; i < br.count; ++i, ++row) {
            const double t = uniform(rng);
            const double offset = br.width * normal(rng);
            sumsq_offset += offset * offset;
            out.data.points.row(row) = (br.start + t * axis + offset * perp).transpose();
            labels(row) = static_cast<int>(b) + 1;
        }
        ClusterTruth truth =
            cluster_truth_from_points(out.data.points.middleRows(first, br.count),
                                      0.5 * (br.start + br.end), br.width * br.width);
        // For a branch the scale of interest is the transverse spread, not the
        // isotropic one.
        truth.empirical_variance = sumsq_offset / br.count;
        out.truth.clusters.push_back(std::move(truth));
    }
    out.data.labels = labels;
    out.data.q = static_cast<int>(branches.size());
    return out;
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "five_blobs_2d", "ten_blobs_5d_three_macro", "six_nested_2d", "nested_pair_contrast",
        "tree_branches_2d"};
    return names;
}

/// Build a named preset.  `contrast` only applies to nested_pair_contrast,
/// where it fixes the ratio of the two clusters' signal-to-noise ratios
/// sigma/sqrt(N) by adjusting the inner cluster's point count.
inline PresetResult preset(const std::string& name, std::uint64_t seed,
                           std::optional<double> contrast = {}) {
    if (name == "five_blobs_2d") {
        BlobSpec spec;
        spec.centers.resize(5, 2);
        spec.centers << -16.0, -12.0, 16.0, -14.0, 0.0, 16.0, -14.0, 14.0, 18.0, 12.0;
        spec.variances.resize(5);
        spec.variances << 2.0, 1.2, 0.7, 1.6, 1.0;
        spec.counts = {400, 400, 400, 400, 400};
        spec.seed = seed;
        return detail::blob_preset(name, spec);
    }
    if (name == "ten_blobs_5d_three_macro") {
        MatrixXd macro(3, 5);
        macro << -28.0, -8.0, 0.0, 0.0, 0.0, 28.0, -8.0, 4.0, 0.0, 0.0, 0.0, 22.0, -4.0, 2.0, 0.0;
        MatrixXd offsets(10, 5);
        offsets << -5.0, -3.0, 0.0, 1.0, 0.0, 5.0, -2.0, 1.0, -1.0, 0.0, 0.0, 5.0, -2.0, 0.0, 1.0,
            -5.0, 2.0, -1.0, 0.0, 1.0, 4.0, 4.0, 1.0, 1.0, -1.0, 1.0, -5.0, 0.0, -1.0, 0.0, -6.0,
            -2.0, 1.0, 0.0, 0.0, 6.0, -2.0, -1.0, 1.0, 0.0, 0.0, 4.0, 2.0, -1.0, 1.0, 0.0, -3.0,
            -2.0, 1.0, -1.0;
        const std::vector<int> macro_of = {1, 1, 1, 2, 2, 2, 3, 3, 3, 3};
        BlobSpec spec;
        spec.centers.resize(10, 5);
        for (int c = 0; c < 10; ++c)
            spec.centers.row(c) = macro.row(macro_of[c] - 1) + offsets.row(c);
        spec.variances.resize(10);
        spec.variances << 1.0, 0.8, 1.2, 0.9, 1.1, 0.7, 1.0, 0.8, 1.2, 0.9;
        spec.counts.assign(10, 180);
        spec.seed = seed;
        return detail::blob_preset(name, spec, macro_of);
    }
    if (name == "six_nested_2d") {
        BlobSpec spec;
        spec.centers.resize(6, 2);
        spec.centers << -22.0, 0.0, -8.0, 6.0, -8.0, -6.0, 8.0, 6.0, 14.0, -5.0, 14.9, -4.5;
        spec.variances.resize(6);
        spec.variances << 1.2, 0.9, 0.7, 1.0, 2.25, 0.0625;
        spec.counts = {250, 250, 250, 250, 500, 300};
        spec.seed = seed;
        return detail::blob_preset(name, spec);
    }
    if (name == "nested_pair_contrast") {
        const double c = contrast.value_or(2.0);
        if (!(c > 0.0)) throw std::invalid_argument("contrast must be positive");
        const double sd_outer = 1.5, sd_inner = 0.3;
        const int n_outer = 1600;
        const int n_inner = static_cast<int>(
            std::lround(n_outer * std::pow(c * sd_inner / sd_outer, 2.0)));
        if (n_inner < 1) throw std::invalid_argument("contrast too small for a non-empty inner cluster");
        BlobSpec spec;
        spec.centers.resize(2, 2);
        spec.centers << 0.0, 0.0, 0.7, 0.35;
        spec.variances.resize(2);
        spec.variances << sd_outer * sd_outer, sd_inner * sd_inner;
        spec.counts = {n_outer, n_inner};
        spec.seed = seed;
        const double achieved =
            (sd_outer / std::sqrt(n_outer)) / (sd_inner / std::sqrt(static_cast<double>(n_inner)));
        return detail::blob_preset(name, spec, {}, achieved);
    }
    if (name == "tree_branches_2d") {
        // Four branch widths spanning one decade; junction layout keeps the
        // narrow branches away from the wide trunk.
        const std::vector<detail::BranchSpec> branches = {
            {{-10.0, 0.0}, {0.0, 0.0}, 0.30, 800},
            {{0.0, 0.0}, {7.0, 3.0}, 0.14, 700},
            {{0.0, 0.0}, {7.0, -3.0}, 0.065, 650},
            {{7.0, 3.0}, {13.0, 4.5}, 0.03, 550},
        };
        return detail::tree_preset(branches, seed);
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "' (known presets: " + known + ")");
}

/// Keep a uniform without-replacement fraction rho of the points, labels
/// carried along; original point order is preserved.
inline Dataset subsample(const Dataset& data, double rho, std::uint64_t seed) {
    data.validate();
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("rho must lie in (0, 1]");
    const auto n = data.points.rows();
    const auto m = static_cast<Eigen::Index>(std::ceil(rho * static_cast<double>(n)));
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());

    Dataset out;
    out.points.resize(m, data.points.cols());
    out.q = data.q;
    VectorXi labels;
    if (data.labels) labels.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.points.row(i) = data.points.row(idx[i]);
        if (data.labels) labels(i) = (*data.labels)(idx[i]);
    }
    if (data.labels) out.labels = labels;
    return out;
}

}  // namespace mixanneal
