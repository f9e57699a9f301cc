// Trace analysis: macro-cluster detection, transition-event classification,
// next-transition prediction, hierarchy construction and the a-posteriori
// extraction of frozen clusters from soft traces.

#pragma once

#include "mixanneal/core_em.hpp"
#include "mixanneal/trace.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mixanneal {

struct MacroClustering {
    VectorXi labels;  // 1-based, length K
    int k_r = 0;
    MatrixXd centers;  // K_r x D, group means
};

enum class EventKind { split, bounce, cross };

inline const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::split: return "split";
        case EventKind::bounce: return "bounce";
        case EventKind::cross: return "cross";
    }
    return "?";
}

struct TransitionEvent {
    double sigma2 = 0.0;
    EventKind kind = EventKind::split;
    std::vector<int> components;  // sorted ascending
    int parent_macro = 0;         // macro label before the event
};

struct NextTransitions {
    VectorXd thresholds;             // per macro label, max sub-covariance eigenvalue
    std::vector<bool> empty_macro;   // true when no point was assigned
};

struct HierarchyNode {
    std::vector<int> members;      // component indices
    double birth_sigma2 = 0.0;     // temperature at which the group formed
    double death_sigma2 = 0.0;     // temperature of its split (or end of trace)
    double size_estimate = 0.0;    // predicted next-transition scale at birth
    int parent = -1;
    std::vector<int> children;
};

struct Hierarchy {
    std::vector<HierarchyNode> nodes;
    int root = 0;

    std::vector<int> leaf_ids() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].children.empty()) out.push_back(static_cast<int>(i));
        return out;
    }
};

struct FrozenCluster {
    VectorXd mean;
    double variance = 0.0;
    bool flagged = false;  // no clean split was found for this cluster
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    int find(int a) {
        while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[std::max(a, b)] = std::min(a, b);
        return true;
    }

private:
    std::vector<int> parent_;
};

/// Groups of a trace step, indexed by macro label - 1; members ascending.
inline std::vector<std::vector<int>> groups_of_step(const TraceStep& step) {
    std::vector<std::vector<int>> groups(step.k_r);
    for (int k = 0; k < step.macro_labels.size(); ++k)
        groups[step.macro_labels(k) - 1].push_back(k);
    return groups;
}

inline bool strict_subset(const std::vector<int>& small, const std::vector<int>& big) {
    return small.size() < big.size() &&
           std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace detail

/// Single-linkage grouping of component means: two components share a label
/// iff they are connected by a chain of pairwise distances <= epsilon.
/// Labels are assigned in order of first appearance, so they are stable
/// under component index order.
inline MacroClustering detect_macro_clusters(const MatrixXd& means, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    const int k = static_cast<int>(means.rows());
    detail::UnionFind uf(k);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if ((means.row(i) - means.row(j)).norm() <= epsilon) uf.unite(i, j);

    MacroClustering macro;
    macro.labels.resize(k);
    std::map<int, int> label_of_root;
    for (int i = 0; i < k; ++i) {
        const int root = uf.find(i);
        auto [it, inserted] = label_of_root.try_emplace(root, static_cast<int>(label_of_root.size()) + 1);
        macro.labels(i) = it->second;
    }
    macro.k_r = static_cast<int>(label_of_root.size());
    macro.centers = MatrixXd::Zero(macro.k_r, means.cols());
    VectorXd counts = VectorXd::Zero(macro.k_r);
    for (int i = 0; i < k; ++i) {
        macro.centers.row(macro.labels(i) - 1) += means.row(i);
        counts(macro.labels(i) - 1) += 1.0;
    }
    macro.centers.array().colwise() /= counts.array();
    return macro;
}

/// Scale of the next transition inside each macro-cluster: assign every
/// point to its nearest macro centre (the equal-variance posterior argmax)
/// and return the largest covariance eigenvalue of each sub-dataset.
inline NextTransitions predict_next_transitions(const Dataset& data, const MacroClustering& macro) {
    if (macro.k_r < 1) throw std::invalid_argument("macro clustering must have K_r >= 1");
    const auto n = data.points.rows();
    const auto d = data.points.cols();
    const MatrixXd d2 = detail::squared_distances(data.points, macro.centers);
    std::vector<std::vector<Eigen::Index>> assigned(macro.k_r);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        d2.row(i).minCoeff(&best);  // ties resolve to the lowest index
        assigned[best].push_back(i);
    }

    NextTransitions out;
    out.thresholds = VectorXd::Zero(macro.k_r);
    out.empty_macro.assign(macro.k_r, false);
    for (int g = 0; g < macro.k_r; ++g) {
        if (assigned[g].empty()) {
            out.empty_macro[g] = true;
            continue;
        }
        MatrixXd sub(assigned[g].size(), d);
        for (std::size_t r = 0; r < assigned[g].size(); ++r) sub.row(r) = data.points.row(assigned[g][r]);
        const MatrixXd centered = sub.rowwise() - sub.colwise().mean();
        const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(sub.rows());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov, Eigen::EigenvaluesOnly);
        out.thresholds(g) = es.eigenvalues()(d - 1);
    }
    return out;
}

/// Classify the trace into split / bounce / cross events.  A split is a step
/// where a macro group loses members; a bounce is a component's ratio curve
/// touching the unit line from above inside [1, 1+delta_band] and rising
/// again; a cross is the ratio passing from above 1 to below 1.
inline std::vector<TransitionEvent> classify_events(const AnnealTrace& trace,
                                                    double delta_band = 0.15) {
    if (trace.steps.size() < 2) throw std::invalid_argument("classify_events needs >= 2 trace steps");
    const auto& steps = trace.steps;
    const int k = trace.components();
    struct Keyed {
        std::size_t step;
        int order;  // split < bounce < cross
        TransitionEvent event;
    };
    std::vector<Keyed> keyed;

    for (std::size_t t = 1; t < steps.size(); ++t) {
        if (steps[t].k_r <= steps[t - 1].k_r) continue;
        const auto prev_groups = detail::groups_of_step(steps[t - 1]);
        for (std::size_t g = 0; g < prev_groups.size(); ++g) {
            std::vector<int> seen;
            for (int member : prev_groups[g]) {
                const int lab = steps[t].macro_labels(member);
                if (std::find(seen.begin(), seen.end(), lab) == seen.end()) seen.push_back(lab);
            }
            if (seen.size() < 2) continue;
            TransitionEvent ev;
            ev.sigma2 = steps[t].sigma2;
            ev.kind = EventKind::split;
            ev.components = prev_groups[g];
            ev.parent_macro = static_cast<int>(g) + 1;
            keyed.push_back({t, 0, std::move(ev)});
        }
    }

    const auto ratio = [&](std::size_t t, int c) { return steps[t].components[c].ratio; };
    for (std::size_t t = 1; t + 1 < steps.size(); ++t) {
        std::map<int, std::vector<int>> by_parent;
        for (int c = 0; c < k; ++c) {
            const double r = ratio(t, c);
            if (r >= 1.0 && r <= 1.0 + delta_band && ratio(t - 1, c) >= r && ratio(t + 1, c) > r)
                by_parent[steps[t - 1].macro_labels(c)].push_back(c);
        }
        for (auto& [parent, comps] : by_parent) {
            TransitionEvent ev;
            ev.sigma2 = steps[t].sigma2;
            ev.kind = EventKind::bounce;
            ev.components = std::move(comps);
            ev.parent_macro = parent;
            keyed.push_back({t, 1, std::move(ev)});
        }
    }

    for (std::size_t t = 1; t < steps.size(); ++t) {
        std::map<int, std::vector<int>> by_parent;
        for (int c = 0; c < k; ++c)
            if (ratio(t - 1, c) > 1.0 && ratio(t, c) < 1.0)
                by_parent[steps[t - 1].macro_labels(c)].push_back(c);
        for (auto& [parent, comps] : by_parent) {
            TransitionEvent ev;
            ev.sigma2 = steps[t].sigma2;
            ev.kind = EventKind::cross;
            ev.components = std::move(comps);
            ev.parent_macro = parent;
            keyed.push_back({t, 2, std::move(ev)});
        }
    }

    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.step != b.step) return a.step < b.step;
        if (a.order != b.order) return a.order < b.order;
        return a.event.parent_macro < b.event.parent_macro;
    });
    std::vector<TransitionEvent> events;
    events.reserve(keyed.size());
    for (auto& kd : keyed) events.push_back(std::move(kd.event));
    return events;
}

/// Nested-interval tree over the trace: a node is a maximal temperature
/// interval during which a set of components stays one macro group.  The
/// partition only ever refines while building, so transient single-step
/// re-merges do not produce bogus nodes.  Each node's size estimate is the
/// predicted next-transition scale of its sub-dataset at birth.
inline Hierarchy build_hierarchy(const AnnealTrace& trace, const Dataset& data) {
    if (trace.steps.empty()) throw std::invalid_argument("build_hierarchy needs a non-empty trace");
    const auto& steps = trace.steps;
    const int k = trace.components();

    Hierarchy h;
    std::vector<int> leaf_of_comp(k, 0);
    HierarchyNode root;
    root.members.resize(k);
    std::iota(root.members.begin(), root.members.end(), 0);
    root.birth_sigma2 = steps.front().sigma2;
    root.death_sigma2 = steps.back().sigma2;
    h.nodes.push_back(std::move(root));
    h.root = 0;

    const auto leaf_macro = [&](std::size_t t) {
        // Macro clustering induced by the current tree leaves at step t.
        std::vector<int> leaf_ids = h.leaf_ids();
        std::map<int, int> rank;  // node id -> 1-based macro label
        for (std::size_t i = 0; i < leaf_ids.size(); ++i) rank[leaf_ids[i]] = static_cast<int>(i) + 1;
        MacroClustering macro;
        macro.k_r = static_cast<int>(leaf_ids.size());
        macro.labels.resize(k);
        macro.centers = MatrixXd::Zero(macro.k_r, data.points.cols());
        VectorXd counts = VectorXd::Zero(macro.k_r);
        for (int c = 0; c < k; ++c) {
            const int lab = rank[leaf_of_comp[c]];
            macro.labels(c) = lab;
            macro.centers.row(lab - 1) += steps[t].components[c].mean.transpose();
            counts(lab - 1) += 1.0;
        }
        macro.centers.array().colwise() /= counts.array();
        return macro;
    };

    {
        const auto macro = leaf_macro(0);
        h.nodes[0].size_estimate = predict_next_transitions(data, macro).thresholds(0);
    }

    for (std::size_t t = 1; t < steps.size(); ++t) {
        std::vector<int> born;
        const std::vector<int> leaves_before = h.leaf_ids();
        for (int leaf : leaves_before) {
            auto& node = h.nodes[leaf];
            // How does the step-t labelling partition this leaf?
            std::vector<int> block_label;  // distinct labels, order of first appearance
            std::vector<std::vector<int>> blocks;
            for (int member : node.members) {
                const int lab = steps[t].macro_labels(member);
                auto it = std::find(block_label.begin(), block_label.end(), lab);
                if (it == block_label.end()) {
                    block_label.push_back(lab);
                    blocks.emplace_back();
                    it = block_label.end() - 1;
                }
                blocks[static_cast<std::size_t>(it - block_label.begin())].push_back(member);
            }
            if (blocks.size() < 2) continue;
            node.death_sigma2 = steps[t - 1].sigma2;
            for (auto& block : blocks) {
                HierarchyNode child;
                child.members = std::move(block);
                child.birth_sigma2 = steps[t].sigma2;
                child.death_sigma2 = steps.back().sigma2;
                child.parent = leaf;
                const int id = static_cast<int>(h.nodes.size());
                h.nodes[leaf].children.push_back(id);
                for (int m : child.members) leaf_of_comp[m] = id;
                h.nodes.push_back(std::move(child));
                born.push_back(id);
            }
        }
        if (!born.empty()) {
            const auto macro = leaf_macro(t);
            const auto predicted = predict_next_transitions(data, macro);
            std::vector<int> leaf_ids = h.leaf_ids();
            std::map<int, int> rank;
            for (std::size_t i = 0; i < leaf_ids.size(); ++i) rank[leaf_ids[i]] = static_cast<int>(i);
            for (int id : born) h.nodes[id].size_estimate = predicted.thresholds(rank[id]);
        }
    }
    return h;
}

/// Frozen multi-scale clusters from a soft trace.  A component settles on a
/// physical cluster at its last split before its ratio series remains above
/// the unit line for good; the state is read off at that final dip, where
/// the adapted variance has caught up with the represented scale.  A
/// component with no qualifying split is flagged and freezes where its
/// ratio is closest to 1 from above.  Components frozen in the same state
/// collapse to one reported cluster.
inline std::vector<FrozenCluster> extract_clusters_soft(const AnnealTrace& trace) {
    if (trace.mode != AnnealMode::soft)
        throw std::invalid_argument("extract_clusters_soft needs a soft-mode trace");
    if (trace.steps.empty()) throw std::invalid_argument("empty trace");
    const auto& steps = trace.steps;
    const std::size_t t_last = steps.size() - 1;

    std::vector<std::vector<std::vector<int>>> groups(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) groups[t] = detail::groups_of_step(steps[t]);

    const auto group_of = [&](std::size_t t, int c) -> const std::vector<int>& {
        return groups[t][steps[t].macro_labels(c) - 1];
    };

    std::vector<FrozenCluster> clusters;
    for (const auto& final_group : groups[t_last]) {
        const int rep = final_group.front();
        // Last moment before the ratio remains above 1 through the end.
        std::ptrdiff_t last_dip = -1;
        for (std::size_t t = 0; t < steps.size(); ++t)
            if (steps[t].components[rep].ratio < 1.0) last_dip = static_cast<std::ptrdiff_t>(t);

        bool has_split = false;
        for (std::size_t t = 1; t < steps.size() && static_cast<std::ptrdiff_t>(t) <= last_dip + 1; ++t)
            has_split = has_split || detail::strict_subset(group_of(t, rep), group_of(t - 1, rep));

        std::ptrdiff_t freeze_step = last_dip;
        bool flagged = !has_split;
        if (freeze_step < 0) {
            flagged = true;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < steps.size(); ++t) {
                const double r = steps[t].components[rep].ratio;
                if (r >= 1.0 && r - 1.0 < best) {
                    best = r - 1.0;
                    freeze_step = static_cast<std::ptrdiff_t>(t);
                }
            }
            if (freeze_step < 0) freeze_step = static_cast<std::ptrdiff_t>(t_last);
        }
        const auto& comp = steps[static_cast<std::size_t>(freeze_step)].components[rep];
        // Two reports are the same frozen state when their means coincide on
        // the scale of the frozen width and the variances agree.
        const bool duplicate = std::any_of(clusters.begin(), clusters.end(), [&](const FrozenCluster& c) {
            const double vmax = std::max(c.variance, comp.variance);
            return (c.mean - comp.mean).norm() <= 0.1 * std::sqrt(vmax) &&
                   std::abs(c.variance - comp.variance) <= 0.25 * vmax;
        });
        if (!duplicate) clusters.push_back({comp.mean, comp.variance, flagged});
    }
    return clusters;
}

}  // namespace mixanneal
