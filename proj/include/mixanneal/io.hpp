// File formats: CSV point data, JSONL traces (one step per line, doubles
// printed with 17 significant digits so they round-trip exactly), and JSON
// serialisers for reports, hierarchies, clusters and principal graphs.

#pragma once

#include "mixanneal/datagen.hpp"
#include "mixanneal/graph.hpp"
#include "mixanneal/stability.hpp"
#include "mixanneal/trace.hpp"
#include "mixanneal/transitions.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixanneal {

using json = nlohmann::json;

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

}  // namespace detail

/// CSV: header x0..x{D-1}[,label], one point per row.
inline void write_dataset_csv(const Dataset& data, const std::string& path) {
    data.validate();
    auto out = detail::open_out(path);
    for (Eigen::Index d = 0; d < data.points.cols(); ++d) out << (d ? ",x" : "x") << d;
    if (data.labels) out << ",label";
    out << "\n";
    for (Eigen::Index i = 0; i < data.points.rows(); ++i) {
        for (Eigen::Index d = 0; d < data.points.cols(); ++d) {
            if (d) out << ",";
            out << detail::fmt17(data.points(i, d));
        }
        if (data.labels) out << "," << (*data.labels)(i);
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed while writing " + path);
}

inline Dataset read_dataset_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    const auto header = detail::split_csv_line(line);
    if (header.empty()) throw std::runtime_error("CSV header missing: " + path);
    const bool has_labels = header.back() == "label";
    const auto d = static_cast<Eigen::Index>(header.size()) - (has_labels ? 1 : 0);
    if (d < 1) throw std::runtime_error("CSV has no coordinate columns: " + path);

    std::vector<double> coords;
    std::vector<int> labels;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (static_cast<Eigen::Index>(fields.size()) != d + (has_labels ? 1 : 0))
            throw std::runtime_error("CSV row has wrong field count: " + path);
        for (Eigen::Index c = 0; c < d; ++c) coords.push_back(std::stod(fields[c]));
        if (has_labels) labels.push_back(std::stoi(fields.back()));
        ++rows;
    }
    Dataset data;
    data.points.resize(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < d; ++c) data.points(i, c) = coords[i * d + c];
    if (has_labels) {
        data.labels = Eigen::Map<VectorXi>(labels.data(), rows);
        data.q = *std::max_element(labels.begin(), labels.end());
    }
    data.validate();
    return data;
}

/// Returns the "label" column if present, else the last column, as ints.
inline VectorXi read_label_column_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    const auto header = detail::split_csv_line(line);
    std::size_t col = header.size() - 1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == "label") col = c;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (col >= fields.size()) throw std::runtime_error("CSV row too short: " + path);
        labels.push_back(static_cast<int>(std::lround(std::stod(fields[col]))));
    }
    return Eigen::Map<VectorXi>(labels.data(), static_cast<Eigen::Index>(labels.size()));
}

inline std::string trace_step_to_json_line(const TraceStep& step) {
    std::string out = "{\"sigma2\":" + detail::fmt17(step.sigma2) + ",\"components\":[";
    for (std::size_t c = 0; c < step.components.size(); ++c) {
        const auto& tc = step.components[c];
        if (c) out += ",";
        out += "{\"mean\":[";
        for (Eigen::Index d = 0; d < tc.mean.size(); ++d) {
            if (d) out += ",";
            out += detail::fmt17(tc.mean(d));
        }
        out += "],\"variance\":" + detail::fmt17(tc.variance);
        out += ",\"gamma_max\":" + detail::fmt17(tc.gamma_max);
        out += ",\"gamma_min\":" + detail::fmt17(tc.gamma_min);
        out += ",\"weight\":" + detail::fmt17(tc.weight);
        out += ",\"ratio\":" + detail::fmt17(tc.ratio) + "}";
    }
    out += "],\"K_r\":" + std::to_string(step.k_r) + ",\"macro_labels\":[";
    for (Eigen::Index c = 0; c < step.macro_labels.size(); ++c) {
        if (c) out += ",";
        out += std::to_string(step.macro_labels(c));
    }
    out += "]";
    if (!step.warnings.empty()) {
        out += ",\"warnings\":[";
        for (std::size_t w = 0; w < step.warnings.size(); ++w) {
            if (w) out += ",";
            out += json(step.warnings[w]).dump();
        }
        out += "]";
    }
    out += "}";
    return out;
}

inline void write_trace_jsonl(const AnnealTrace& trace, const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& step : trace.steps) out << trace_step_to_json_line(step) << "\n";
    if (!out) throw std::runtime_error("failed while writing " + path);
}

/// Reads a JSONL trace.  Unless a mode is supplied, it is inferred: a trace
/// whose component variances always equal the schedule value is hard.
inline AnnealTrace read_trace_jsonl(const std::string& path,
                                    std::optional<AnnealMode> mode = {}) {
    auto in = detail::open_in(path);
    AnnealTrace trace;
    std::string line;
    bool any_free_variance = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        TraceStep step;
        step.sigma2 = j.at("sigma2").get<double>();
        step.k_r = j.at("K_r").get<int>();
        const auto& labels = j.at("macro_labels");
        step.macro_labels.resize(static_cast<Eigen::Index>(labels.size()));
        for (std::size_t c = 0; c < labels.size(); ++c)
            step.macro_labels(static_cast<Eigen::Index>(c)) = labels[c].get<int>();
        for (const auto& jc : j.at("components")) {
            TraceComponent tc;
            const auto& mean = jc.at("mean");
            tc.mean.resize(static_cast<Eigen::Index>(mean.size()));
            for (std::size_t d = 0; d < mean.size(); ++d)
                tc.mean(static_cast<Eigen::Index>(d)) = mean[d].get<double>();
            tc.variance = jc.at("variance").get<double>();
            tc.gamma_max = jc.at("gamma_max").get<double>();
            tc.gamma_min = jc.at("gamma_min").get<double>();
            tc.weight = jc.at("weight").get<double>();
            tc.ratio = jc.at("ratio").get<double>();
            if (tc.variance != step.sigma2) any_free_variance = true;
            step.components.push_back(std::move(tc));
        }
        if (j.contains("warnings"))
            for (const auto& w : j.at("warnings")) step.warnings.push_back(w.get<std::string>());
        trace.steps.push_back(std::move(step));
    }
    trace.mode = mode.value_or(any_free_variance ? AnnealMode::soft : AnnealMode::hard);
    return trace;
}

inline json report_to_json(const StabilityReport& report) {
    json j{{"mode", report.mode},
           {"t_c", report.t_c},
           {"spectral_radius_at_tc", report.spectral_radius_at_tc},
           {"matrix_dim", report.matrix_dim}};
    if (report.sigma0_at_tc) j["sigma0_at_tc"] = *report.sigma0_at_tc;
    return j;
}

inline json truth_to_json(const DatasetTruth& truth) {
    json clusters = json::array();
    for (const auto& c : truth.clusters) {
        json eig = json::array();
        for (Eigen::Index i = 0; i < c.empirical_cov_eigenvalues.size(); ++i)
            eig.push_back(c.empirical_cov_eigenvalues(i));
        json center = json::array();
        for (Eigen::Index i = 0; i < c.center.size(); ++i) center.push_back(c.center(i));
        json mean = json::array();
        for (Eigen::Index i = 0; i < c.empirical_mean.size(); ++i) mean.push_back(c.empirical_mean(i));
        clusters.push_back({{"center", center},
                            {"variance", c.variance},
                            {"count", c.count},
                            {"empirical_mean", mean},
                            {"empirical_cov_eigenvalues", eig},
                            {"empirical_variance", c.empirical_variance}});
    }
    json j{{"preset", truth.preset_name}, {"q", truth.q}, {"clusters", clusters}};
    if (!truth.macro_of_cluster.empty()) j["macro_of_cluster"] = truth.macro_of_cluster;
    if (truth.contrast) j["contrast"] = *truth.contrast;
    return j;
}

inline json hierarchy_to_json(const Hierarchy& h) {
    json nodes = json::array();
    for (std::size_t i = 0; i < h.nodes.size(); ++i) {
        const auto& n = h.nodes[i];
        nodes.push_back({{"id", i},
                         {"parent", n.parent},
                         {"children", n.children},
                         {"members", n.members},
                         {"birth_sigma2", n.birth_sigma2},
                         {"death_sigma2", n.death_sigma2},
                         {"size_estimate", n.size_estimate}});
    }
    return {{"root", h.root}, {"nodes", nodes}, {"leaves", h.leaf_ids()}};
}

inline json clusters_to_json(const std::vector<FrozenCluster>& clusters) {
    json arr = json::array();
    for (const auto& c : clusters) {
        json mean = json::array();
        for (Eigen::Index d = 0; d < c.mean.size(); ++d) mean.push_back(c.mean(d));
        arr.push_back({{"mean", mean}, {"variance", c.variance}, {"flagged", c.flagged}});
    }
    return arr;
}

inline std::string events_to_csv(const std::vector<TransitionEvent>& events) {
    std::string out = "sigma2,kind,components\n";
    for (const auto& ev : events) {
        out += detail::fmt17(ev.sigma2);
        out += ",";
        out += to_string(ev.kind);
        out += ",";
        for (std::size_t i = 0; i < ev.components.size(); ++i) {
            if (i) out += ";";
            out += std::to_string(ev.components[i]);
        }
        out += "\n";
    }
    return out;
}

inline json principal_graph_to_json(const PrincipalGraph& graph) {
    json nodes = json::array();
    for (Eigen::Index k = 0; k < graph.means.rows(); ++k) {
        json mean = json::array();
        for (Eigen::Index d = 0; d < graph.means.cols(); ++d) mean.push_back(graph.means(k, d));
        nodes.push_back({{"mean", mean},
                         {"frozen_variance", graph.frozen_variances(k)},
                         {"frozen", static_cast<bool>(graph.frozen_flags[k])}});
    }
    json edges = json::array();
    for (Eigen::Index i = 0; i < graph.adjacency.rows(); ++i)
        for (Eigen::Index j = i + 1; j < graph.adjacency.cols(); ++j)
            if (graph.adjacency(i, j) != 0.0) edges.push_back({i, j});
    return {{"nodes", nodes}, {"edges", edges}};
}

inline std::string edges_to_csv(const MatrixXd& adjacency) {
    std::string out = "i,j\n";
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
        for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0)
                out += std::to_string(i) + "," + std::to_string(j) + "\n";
    return out;
}

/// Adjacency file: {"k": K, "edges": [[i, j], ...]}, 0-based.
inline MatrixXd read_adjacency_json(const std::string& path) {
    auto in = detail::open_in(path);
    json j;
    in >> j;
    const int k = j.at("k").get<int>();
    MatrixXd adjacency = MatrixXd::Zero(k, k);
    for (const auto& e : j.at("edges")) {
        const int a = e.at(0).get<int>();
        const int b = e.at(1).get<int>();
        if (a < 0 || b < 0 || a >= k || b >= k || a == b)
            throw std::runtime_error("bad edge in adjacency file: " + path);
        adjacency(a, b) = adjacency(b, a) = 1.0;
    }
    return adjacency;
}

inline void write_adjacency_json(const MatrixXd& adjacency, const std::string& path) {
    json edges = json::array();
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
        for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) edges.push_back({i, j});
    auto out = detail::open_out(path);
    out << json{{"k", adjacency.rows()}, {"edges", edges}}.dump(2) << "\n";
}

}  // namespace mixanneal
