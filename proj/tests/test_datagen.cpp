#include "mixanneal/datagen.hpp"

#include "mixanneal/stability.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace mixanneal;

TEST_CASE("generate: sample variance tracks the generating variance") {
    BlobSpec spec;
    spec.centers = MatrixXd::Zero(1, 2);
    spec.variances = VectorXd::Constant(1, 1.7);
    spec.counts = {10000};
    spec.seed = 4;
    const auto data = generate(spec);
    REQUIRE(data.points.rows() == 10000);
    for (int d = 0; d < 2; ++d) {
        const double mean = data.points.col(d).mean();
        const double var = (data.points.col(d).array() - mean).square().mean();
        CHECK(var == Catch::Approx(1.7).epsilon(0.05));
    }
}

TEST_CASE("generate: zero variance gives identical points") {
    BlobSpec spec;
    spec.centers = MatrixXd::Zero(1, 2);
    spec.variances = VectorXd::Zero(1);
    spec.counts = {3};
    const auto data = generate(spec);
    REQUIRE(data.points.rows() == 3);
    CHECK(data.points.isZero(0.0));
    REQUIRE(data.labels.has_value());
    CHECK((data.labels->array() == 1).all());
}

TEST_CASE("generate: balanced opposite blobs centre near the origin") {
    BlobSpec spec;
    spec.centers.resize(2, 2);
    spec.centers << 10.0, 0.0, -10.0, 0.0;
    spec.variances = VectorXd::Ones(2);
    spec.counts = {500, 500};
    spec.seed = 9;
    const auto data = generate(spec);
    CHECK(data.points.colwise().mean().norm() < 0.5);
}

TEST_CASE("generate: deterministic per seed") {
    BlobSpec spec;
    spec.centers = MatrixXd::Zero(1, 3);
    spec.variances = VectorXd::Ones(1);
    spec.counts = {100};
    spec.seed = 77;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(a.points == b.points);
}

TEST_CASE("preset: five_blobs_2d contract") {
    const auto pr = preset("five_blobs_2d", 7);
    CHECK(pr.data.q == 5);
    REQUIRE(pr.data.labels.has_value());
    CHECK(pr.truth.q == 5);
    REQUIRE(pr.truth.clusters.size() == 5);

    // The between-cluster scale dominates every within-cluster scale by 5x.
    const double t_hard = tc_hard(pr.data).t_c;
    for (const auto& c : pr.truth.clusters) {
        CHECK(t_hard >= 5.0 * c.empirical_cov_eigenvalues.maxCoeff());
        CHECK(c.empirical_variance == Catch::Approx(c.variance).epsilon(0.2));
    }
}

TEST_CASE("preset: ten_blobs_5d_three_macro keeps three separation levels") {
    const auto pr = preset("ten_blobs_5d_three_macro", 7);
    CHECK(pr.data.q == 10);
    REQUIRE(pr.truth.macro_of_cluster.size() == 10);
    CHECK(*std::max_element(pr.truth.macro_of_cluster.begin(), pr.truth.macro_of_cluster.end()) == 3);

    // Macro scale >> within-macro scale >> within-cluster scale.
    const double t_hard = tc_hard(pr.data).t_c;
    double max_macro_sub = 0.0;
    for (int m = 1; m <= 3; ++m) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < pr.data.points.rows(); ++i)
            if (pr.truth.macro_of_cluster[(*pr.data.labels)(i) - 1] == m) rows.push_back(i);
        MatrixXd sub(rows.size(), 5);
        for (std::size_t r = 0; r < rows.size(); ++r) sub.row(r) = pr.data.points.row(rows[r]);
        Dataset subset;
        subset.points = sub;
        max_macro_sub = std::max(max_macro_sub, tc_hard(subset).t_c);
    }
    double max_cluster = 0.0;
    for (const auto& c : pr.truth.clusters)
        max_cluster = std::max(max_cluster, c.empirical_cov_eigenvalues.maxCoeff());
    CHECK(t_hard >= 5.0 * max_macro_sub);
    CHECK(max_macro_sub >= 5.0 * max_cluster);
}

TEST_CASE("preset: six_nested_2d nesting contract") {
    const auto pr = preset("six_nested_2d", 7);
    CHECK(pr.data.q == 6);
    const auto& outer = pr.truth.clusters[4];
    const auto& inner = pr.truth.clusters[5];
    CHECK(std::sqrt(outer.variance / inner.variance) >= 3.0);  // radius ratio
    // Inner centre sits inside the outer cluster.
    CHECK((outer.center - inner.center).norm() < std::sqrt(outer.variance));
}

TEST_CASE("preset: nested_pair_contrast hits the requested contrast within 1%") {
    for (double c : {0.8, 1.0, 1.5, 2.0, 3.0}) {
        const auto pr = preset("nested_pair_contrast", 3, c);
        REQUIRE(pr.truth.contrast.has_value());
        CHECK(*pr.truth.contrast == Catch::Approx(c).epsilon(0.01));
        CHECK(pr.data.q == 2);
    }
}

TEST_CASE("preset: tree_branches_2d spans a decade of widths") {
    const auto pr = preset("tree_branches_2d", 7);
    CHECK(pr.data.q == 4);
    REQUIRE(pr.truth.clusters.size() == 4);
    std::vector<double> widths;
    for (const auto& c : pr.truth.clusters) {
        widths.push_back(std::sqrt(c.variance));
        // Transverse sample width close to the generating one.
        CHECK(c.empirical_variance == Catch::Approx(c.variance).epsilon(0.15));
    }
    std::sort(widths.begin(), widths.end());
    CHECK(widths.back() / widths.front() >= 10.0);
    CHECK(std::unique(widths.begin(), widths.end()) == widths.end());
}

TEST_CASE("preset: unknown name lists the valid ones") {
    try {
        preset("donut", 1);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const auto& name : preset_names()) CHECK(msg.find(name) != std::string::npos);
    }
}

TEST_CASE("subsample: rho = 1 is the identity") {
    const auto pr = preset("five_blobs_2d", 2);
    const auto sub = subsample(pr.data, 1.0, 5);
    CHECK(sub.points == pr.data.points);
    CHECK(*sub.labels == *pr.data.labels);
}

TEST_CASE("subsample: exact count and carried labels") {
    const auto pr = preset("five_blobs_2d", 2);
    Dataset hundred;
    hundred.points = pr.data.points.topRows(100);
    hundred.labels = pr.data.labels->head(100);
    hundred.q = pr.data.q;
    const auto sub = subsample(hundred, 0.5, 5);
    CHECK(sub.points.rows() == 50);
    REQUIRE(sub.labels.has_value());
    CHECK(sub.labels->size() == 50);
}

TEST_CASE("subsample: label proportions are roughly preserved") {
    const auto pr = preset("five_blobs_2d", 2);
    const double n = static_cast<double>(pr.data.points.rows());
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto sub = subsample(pr.data, 0.4, seed);
        const double m = static_cast<double>(sub.points.rows());
        for (int lab = 1; lab <= 5; ++lab) {
            const double before = (pr.data.labels->array() == lab).count() / n;
            const double after = (sub.labels->array() == lab).count() / m;
            CHECK(std::abs(after - before) <= 4.0 / std::sqrt(n));
        }
    }
}

TEST_CASE("subsample: rejects a bad fraction") {
    const auto pr = preset("five_blobs_2d", 2);
    CHECK_THROWS_AS(subsample(pr.data, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(subsample(pr.data, 1.5, 1), std::invalid_argument);
}
