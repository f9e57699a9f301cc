#include "mixanneal/transitions.hpp"

#include "mixanneal/annealing.hpp"
#include "mixanneal/datagen.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

using namespace mixanneal;

namespace {

MatrixXd means_1d(std::initializer_list<double> xs) {
    MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

/// Hand-built trace: per step, the component ratios and macro labels.
AnnealTrace synthetic_trace(const std::vector<double>& sigma2s,
                            const std::vector<std::vector<double>>& ratios,
                            const std::vector<std::vector<int>>& labels,
                            AnnealMode mode = AnnealMode::hard) {
    AnnealTrace trace;
    trace.mode = mode;
    const int k = static_cast<int>(ratios.front().size());
    for (std::size_t t = 0; t < sigma2s.size(); ++t) {
        TraceStep step;
        step.sigma2 = sigma2s[t];
        step.macro_labels.resize(k);
        int k_r = 0;
        for (int c = 0; c < k; ++c) {
            step.macro_labels(c) = labels[t][c];
            k_r = std::max(k_r, labels[t][c]);
        }
        step.k_r = k_r;
        for (int c = 0; c < k; ++c) {
            TraceComponent comp;
            comp.mean = VectorXd::Constant(1, static_cast<double>(labels[t][c]));
            comp.variance = mode == AnnealMode::hard ? sigma2s[t] : 1.0;
            comp.ratio = ratios[t][c];
            comp.gamma_max = comp.ratio * comp.variance;
            comp.gamma_min = comp.gamma_max;
            comp.weight = 1.0;
            step.components.push_back(std::move(comp));
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

}  // namespace

TEST_CASE("detect_macro_clusters: identical means collapse to one group") {
    const MatrixXd means = MatrixXd::Zero(6, 2);
    const auto macro = detect_macro_clusters(means, 0.1);
    CHECK(macro.k_r == 1);
    CHECK((macro.labels.array() == 1).all());
}

TEST_CASE("detect_macro_clusters: far groups stay apart") {
    MatrixXd means(4, 1);
    means << 0.0, 0.001, 100.0, 100.001;
    const auto macro = detect_macro_clusters(means, 1.0);
    CHECK(macro.k_r == 2);
    CHECK(macro.labels(0) == macro.labels(1));
    CHECK(macro.labels(2) == macro.labels(3));
    CHECK(macro.labels(0) != macro.labels(2));
    CHECK(macro.centers.rows() == 2);
}

TEST_CASE("detect_macro_clusters: chaining follows transitive closure") {
    const double eps = 0.01;
    const MatrixXd means = means_1d({0.0, 0.9 * eps, 2.5 * eps});
    const auto macro = detect_macro_clusters(means, eps);

    // Brute-force transitive closure over the 3x3 distance matrix.
    bool adj[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            adj[i][j] = std::abs(means(i, 0) - means(j, 0)) <= eps;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) adj[i][j] = adj[i][j] || (adj[i][k] && adj[k][j]);

    CHECK(macro.k_r == 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK((macro.labels(i) == macro.labels(j)) == adj[i][j]);
}

TEST_CASE("predict_next_transitions: K_r = 1 reproduces tc_hard exactly") {
    const auto pr = preset("five_blobs_2d", 13);
    MacroClustering macro;
    macro.k_r = 1;
    macro.labels = VectorXi::Ones(25);
    macro.centers = pr.data.points.colwise().mean();
    const auto next = predict_next_transitions(pr.data, macro);
    CHECK(next.thresholds(0) == tc_hard(pr.data).t_c);  // bit-identical path
}

TEST_CASE("predict_next_transitions: two far blobs give unit thresholds") {
    BlobSpec spec;
    spec.centers.resize(2, 1);
    spec.centers << -50.0, 50.0;
    spec.variances = VectorXd::Ones(2);
    spec.counts = {2000, 2000};
    spec.seed = 3;
    const auto data = generate(spec);
    MacroClustering macro;
    macro.k_r = 2;
    macro.labels.resize(2);
    macro.labels << 1, 2;
    macro.centers.resize(2, 1);
    macro.centers << -50.0, 50.0;
    const auto next = predict_next_transitions(data, macro);

    // Per-half sample covariance oracle.
    for (int g = 0; g < 2; ++g) {
        const auto half = data.points.col(0).segment(g * 2000, 2000);
        const double var = (half.array() - half.mean()).square().mean();
        CHECK(next.thresholds(g) == Catch::Approx(var).epsilon(1e-12));
        CHECK(next.thresholds(g) == Catch::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("predict_next_transitions: singletons give zero, empties are flagged") {
    Dataset data;
    data.points = means_1d({-1.0, 1.0});
    MacroClustering macro;
    macro.k_r = 2;
    macro.labels.resize(2);
    macro.labels << 1, 2;
    macro.centers = means_1d({-1.0, 1.0});
    auto next = predict_next_transitions(data, macro);
    CHECK(next.thresholds(0) == 0.0);
    CHECK(next.thresholds(1) == 0.0);
    CHECK_FALSE(next.empty_macro[0]);

    macro.centers = means_1d({0.0, 100.0});  // nobody near the second centre
    next = predict_next_transitions(data, macro);
    CHECK(next.empty_macro[1]);
    CHECK(next.thresholds(1) == 0.0);
}

TEST_CASE("classify_events: one clean downward crossing") {
    const auto trace = synthetic_trace({4.0, 3.0, 2.0, 1.0},
                                       {{1.8}, {1.3}, {0.8}, {0.4}},
                                       {{1}, {1}, {1}, {1}});
    const auto events = classify_events(trace);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::cross);
    CHECK(events[0].sigma2 == 2.0);
    CHECK(events[0].components == std::vector<int>{0});
    CHECK(events[0].parent_macro == 1);
}

TEST_CASE("classify_events: K_r sequence 1 -> 3 -> 5 gives exactly two split events") {
    const auto trace = synthetic_trace(
        {5.0, 4.0, 3.0},
        {{0.5, 0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5, 0.5}},
        {{1, 1, 1, 1, 1}, {1, 2, 3, 1, 2}, {1, 2, 3, 4, 5}});
    const auto events = classify_events(trace);
    int splits = 0;
    for (const auto& ev : events) splits += ev.kind == EventKind::split;
    CHECK(splits == static_cast<int>(events.size()));
    CHECK(splits == 2);
    CHECK(events.front().components.size() == 5);
}

TEST_CASE("classify_events: a shallow local minimum on the unit line is a bounce") {
    const auto trace = synthetic_trace({5.0, 4.0, 3.0, 2.0},
                                       {{1.6}, {1.08}, {1.3}, {1.5}},
                                       {{1}, {1}, {1}, {1}});
    const auto events = classify_events(trace);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::bounce);
    CHECK(events[0].sigma2 == 4.0);
}

TEST_CASE("classify_events: band edges exclude deep minima") {
    const auto trace = synthetic_trace({5.0, 4.0, 3.0, 2.0},
                                       {{1.6}, {1.2}, {1.4}, {1.6}},
                                       {{1}, {1}, {1}, {1}});
    CHECK(classify_events(trace).empty());  // min at 1.2 is outside [1, 1.15]
    CHECK(classify_events(trace, 0.3).size() == 1);
}

TEST_CASE("build_hierarchy: single blob keeps a root-only tree") {
    const auto data = [&] {
        BlobSpec spec;
        spec.centers = MatrixXd::Zero(1, 2);
        spec.variances = VectorXd::Constant(1, 1.0);
        spec.counts = {300};
        spec.seed = 2;
        return generate(spec);
    }();
    AnnealConfig config;
    config.k = 4;
    config.t_end = 1.3;  // stop above the blob scale: no split ever happens
    config.cool_factor = 0.95;
    const auto trace = hard_anneal(data, config);
    const auto h = build_hierarchy(trace, data);
    REQUIRE(h.nodes.size() == 1);
    CHECK(h.nodes[0].members.size() == 4);
    CHECK(h.nodes[0].size_estimate == Catch::Approx(tc_hard(data).t_c));
}

TEST_CASE("build_hierarchy: two blobs split into children with blob-sized estimates") {
    BlobSpec spec;
    spec.centers.resize(2, 2);
    spec.centers << -12.0, 0.0, 12.0, 0.0;
    spec.variances.resize(2);
    spec.variances << 1.0, 2.0;
    spec.counts = {400, 400};
    spec.seed = 5;
    const auto data = generate(spec);
    AnnealConfig config;
    config.k = 6;
    config.t_end = 3.5;  // below the separation scale, above the blob scales
    config.cool_factor = 0.97;
    config.seed = 8;
    const auto trace = hard_anneal(data, config);
    const auto h = build_hierarchy(trace, data);

    REQUIRE(h.nodes.size() == 3);
    CHECK(h.nodes[h.root].children.size() == 2);
    // Size estimates of the children match the per-blob covariance oracle.
    for (int child : h.nodes[h.root].children) {
        const auto& node = h.nodes[child];
        CHECK(node.birth_sigma2 < h.nodes[h.root].birth_sigma2);
        Dataset blob;
        const bool left = h.nodes[child].members.size() > 0 &&
                          trace.steps.back().components[node.members[0]].mean(0) < 0;
        blob.points = left ? data.points.topRows(400) : data.points.bottomRows(400);
        CHECK(node.size_estimate == Catch::Approx(tc_hard(blob).t_c).epsilon(0.1));
    }

    // Leaves partition the component set.
    std::set<int> seen;
    for (int leaf : h.leaf_ids())
        for (int m : h.nodes[leaf].members) CHECK(seen.insert(m).second);
    CHECK(seen.size() == 6);
}

TEST_CASE("build_hierarchy: ten 5D clusters nest as three macro groups") {
    const auto pr = preset("ten_blobs_5d_three_macro", 4);
    AnnealConfig config;
    config.k = 25;
    config.cool_factor = 0.98;
    config.t_end = 0.35;
    config.seed = 12;
    const auto trace = hard_anneal(pr.data, config);

    // First within-cluster split bounds the window of physical partitions.
    const auto events = classify_events(trace);
    double first_cross = 0.0;
    for (const auto& ev : events)
        if (ev.kind == EventKind::cross) first_cross = std::max(first_cross, ev.sigma2);

    // A plateau with exactly three macro clusters must exist on the way.
    bool saw_three = false;
    for (const auto& step : trace.steps) saw_three = saw_three || step.k_r == 3;
    CHECK(saw_three);

    const auto h = build_hierarchy(trace, pr.data);
    // Count leaves of the subtree restricted to nodes born before the noise
    // regime: these are the physical clusters.
    int physical_leaves = 0;
    for (const auto& node : h.nodes) {
        if (node.birth_sigma2 <= first_cross) continue;
        bool has_physical_child = false;
        for (int child : node.children)
            has_physical_child = has_physical_child || h.nodes[child].birth_sigma2 > first_cross;
        if (!has_physical_child) ++physical_leaves;
    }
    CHECK(physical_leaves == 10);

    // K_r is non-decreasing at event steps (transient dips tolerated).
    int cummax = 0;
    for (std::size_t t = 1; t < trace.steps.size(); ++t) {
        cummax = std::max(cummax, trace.steps[t - 1].k_r);
        if (trace.steps[t].k_r > trace.steps[t - 1].k_r)
            CHECK(trace.steps[t].k_r >= cummax);
    }
}

TEST_CASE("extract_clusters_soft: single blob with five components reports one cluster") {
    BlobSpec spec;
    spec.centers = MatrixXd::Zero(1, 2);
    spec.variances = VectorXd::Constant(1, 1.21);
    spec.counts = {2000};
    spec.seed = 9;
    const auto data = generate(spec);
    AnnealConfig config;
    config.mode = AnnealMode::soft;
    config.k = 5;
    config.cool_factor = 0.97;
    config.t_end = 0.05;
    config.seed = 3;
    const auto trace = soft_anneal(data, config);
    const auto clusters = extract_clusters_soft(trace);
    REQUIRE(clusters.size() == 1);
    const Eigen::RowVectorXd cm = data.points.colwise().mean();
    CHECK((clusters[0].mean.transpose() - cm).norm() < 0.3);
    const double empirical = (data.points.rowwise() - cm).squaredNorm() / (2.0 * 500.0);
    CHECK(clusters[0].variance == Catch::Approx(empirical).epsilon(0.10));
}

TEST_CASE("extract_clusters_soft: nested pair at high contrast gives two clusters") {
    const auto pr = preset("nested_pair_contrast", 5, 2.5);
    AnnealConfig config;
    config.mode = AnnealMode::soft;
    config.k = 8;
    config.cool_factor = 0.98;
    config.t_start = 3.0 * tc_hard(pr.data).t_c;
    config.t_end = 0.01;
    config.seed = 2;
    const auto trace = soft_anneal(pr.data, config);
    const auto clusters = extract_clusters_soft(trace);
    REQUIRE(clusters.size() == 2);
    for (const auto& c : clusters) CHECK(c.variance > 0.0);
}

TEST_CASE("extract_clusters_soft: refuses hard traces") {
    AnnealTrace trace;
    trace.mode = AnnealMode::hard;
    trace.steps.emplace_back();
    CHECK_THROWS_AS(extract_clusters_soft(trace), std::invalid_argument);
}
