// mixanneal command-line tool: dataset generation, hard/soft annealing,
// critical temperatures, trace extraction, principal graphs and overlap
// scoring.

#include "mixanneal/mixanneal.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr const char* kToolVersion = "mixanneal 0.1.0";

using mixanneal::json;

struct ManifestWriter {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void write() const {
        if (outputs.empty()) return;
        const double duration =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        json manifest{{"command", command},      {"config", config},
                      {"seed", seed},            {"inputs", inputs},
                      {"outputs", outputs},      {"tool_version", kToolVersion},
                      {"duration_seconds", duration}};
        std::filesystem::path path(outputs.front());
        path.replace_extension("");
        path += ".manifest.json";
        std::ofstream out(path);
        out << manifest.dump(2) << "\n";
    }
};

std::filesystem::path with_suffix(const std::string& base, const std::string& suffix) {
    std::filesystem::path path(base);
    path.replace_extension("");
    path += suffix;
    return path;
}

double resolve_t_start(const std::string& flag, double t_c) {
    return flag == "auto" ? 1.5 * t_c : std::stod(flag);
}

mixanneal::AnnealMode parse_mode(const std::string& mode) {
    if (mode == "hard") return mixanneal::AnnealMode::hard;
    if (mode == "soft") return mixanneal::AnnealMode::soft;
    throw CLI::ValidationError("--mode", "must be 'hard' or 'soft'");
}

struct ScheduleFlags {
    std::string t_start = "auto";
    double t_end = 0.0;  // 0: default (t_start / 1000)
    double cool = 0.99;
    int inner_max_iter = 500;
    double inner_tol = 1e-8;
    double jitter = 1e-4;

    void attach(CLI::App* cmd) {
        cmd->add_option("--t-start", t_start, "starting sigma^2, or 'auto' (1.5 x T_c)");
        cmd->add_option("--t-end", t_end, "final sigma^2 (default: t_start / 1000)");
        cmd->add_option("--cool", cool, "multiplicative cooling factor in (0,1)");
        cmd->add_option("--inner-max-iter", inner_max_iter, "inner EM iteration cap");
        cmd->add_option("--inner-tol", inner_tol, "inner relative log-likelihood tolerance");
        cmd->add_option("--jitter", jitter, "symmetry-breaking perturbation scale");
    }

    void fill(mixanneal::AnnealConfig& config, double t_c) const {
        config.t_start = resolve_t_start(t_start, t_c);
        config.t_end = t_end > 0.0 ? t_end : *config.t_start / 1000.0;
        config.cool_factor = cool;
        config.inner_max_iter = inner_max_iter;
        config.inner_tol = inner_tol;
        config.jitter = jitter;
    }
};

json config_to_json(const mixanneal::AnnealConfig& c) {
    return json{{"mode", c.mode == mixanneal::AnnealMode::hard ? "hard" : "soft"},
                {"k", c.k},
                {"t_start", c.t_start ? json(*c.t_start) : json(nullptr)},
                {"t_end", c.t_end ? json(*c.t_end) : json(nullptr)},
                {"cool_factor", c.cool_factor},
                {"inner_max_iter", c.inner_max_iter},
                {"inner_tol", c.inner_tol},
                {"lambda_sigma", c.lambda_sigma},
                {"jitter", c.jitter},
                {"seed", c.seed}};
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("MIXANNEAL_THREADS"))
        Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    CLI::App app{"Annealed Gaussian-mixture clustering with phase-transition tracking"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // ---- gen ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a preset dataset (CSV + ground-truth JSON)");
    std::string gen_preset, gen_out;
    std::uint64_t gen_seed = 0;
    double gen_contrast = 2.0;
    gen->add_option("--preset", gen_preset, "preset name")->required();
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();
    gen->add_option("--contrast", gen_contrast, "contrast for nested_pair_contrast");

    // ---- anneal -------------------------------------------------------
    auto* anneal = app.add_subcommand("anneal", "run a hard or soft anneal, writing a JSONL trace");
    std::string an_mode = "hard", an_data, an_trace;
    int an_k = 25;
    double an_lambda_sigma = 2.0;
    std::uint64_t an_seed = 0;
    ScheduleFlags an_sched;
    anneal->add_option("--mode", an_mode, "hard | soft")->required();
    anneal->add_option("--data", an_data, "input CSV")->required();
    anneal->add_option("--trace", an_trace, "output JSONL trace path")->required();
    anneal->add_option("--k", an_k, "component count");
    anneal->add_option("--lambda-sigma", an_lambda_sigma, "variance prior strength (soft)");
    anneal->add_option("--seed", an_seed, "RNG seed");
    an_sched.attach(anneal);

    // ---- tc -----------------------------------------------------------
    auto* tc = app.add_subcommand("tc", "compute a critical temperature, printing JSON");
    std::string tc_mode = "hard", tc_data, tc_adjacency, tc_out;
    int tc_k = 25;
    double tc_lambda_sigma = 2.0, tc_lambda_mu = 300.0;
    std::uint64_t tc_seed = 0;
    tc->add_option("--mode", tc_mode, "hard | soft | graph")->required();
    tc->add_option("--data", tc_data, "input CSV")->required();
    tc->add_option("--k", tc_k, "component count (soft/graph)");
    tc->add_option("--lambda-sigma", tc_lambda_sigma, "variance prior strength (soft)");
    tc->add_option("--lambda-mu", tc_lambda_mu, "graph prior strength (graph)");
    tc->add_option("--adjacency", tc_adjacency,
                   "adjacency JSON (graph; default: MST over a seeded K-point subsample)");
    tc->add_option("--seed", tc_seed, "seed for the default adjacency subsample");
    tc->add_option("--out", tc_out, "optionally also write the report JSON here");

    // ---- extract ------------------------------------------------------
    auto* extract = app.add_subcommand("extract", "analyse a trace: hierarchy, clusters, events");
    std::string ex_trace, ex_data, ex_mode = "auto";
    std::string ex_hierarchy, ex_clusters, ex_events;
    extract->add_option("--trace", ex_trace, "input JSONL trace")->required();
    extract->add_option("--data", ex_data, "input CSV the trace was computed from")->required();
    extract->add_option("--mode", ex_mode, "trace mode: hard | soft | auto (infer)");
    extract->add_option("--hierarchy", ex_hierarchy, "output hierarchy JSON");
    extract->add_option("--clusters", ex_clusters, "output frozen-cluster JSON (soft traces)");
    extract->add_option("--events", ex_events, "output events CSV");

    // ---- graph --------------------------------------------------------
    auto* graph = app.add_subcommand("graph", "learn a multi-scale principal graph");
    std::string gr_data, gr_out, gr_edges, gr_trace;
    int gr_k = 100;
    double gr_lambda_mu = 300.0;
    std::uint64_t gr_seed = 0;
    ScheduleFlags gr_sched;
    graph->add_option("--data", gr_data, "input CSV")->required();
    graph->add_option("--out", gr_out, "output principal-graph JSON")->required();
    graph->add_option("--k", gr_k, "component count");
    graph->add_option("--lambda-mu", gr_lambda_mu, "graph prior strength");
    graph->add_option("--edges-csv", gr_edges, "optional edge-list CSV output");
    graph->add_option("--trace", gr_trace, "optional JSONL trace output");
    graph->add_option("--seed", gr_seed, "RNG seed");
    gr_sched.attach(graph);

    // ---- overlap ------------------------------------------------------
    auto* overlap = app.add_subcommand("overlap", "overlap Q between two label CSV columns");
    std::string ov_pred, ov_truth;
    int ov_q = 0;
    overlap->add_option("--pred", ov_pred, "CSV with predicted labels (label or last column)")
        ->required();
    overlap->add_option("--truth", ov_truth, "CSV with true labels (label or last column)")
        ->required();
    overlap->add_option("--q", ov_q, "true cluster count (default: max label seen)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            ManifestWriter manifest;
            manifest.command = "gen";
            manifest.seed = gen_seed;
            std::optional<double> contrast;
            if (gen_preset == "nested_pair_contrast") contrast = gen_contrast;
            const auto result = mixanneal::preset(gen_preset, gen_seed, contrast);
            mixanneal::write_dataset_csv(result.data, gen_out);
            const auto truth_path = with_suffix(gen_out, ".truth.json");
            std::ofstream truth_out(truth_path);
            truth_out << mixanneal::truth_to_json(result.truth).dump(2) << "\n";
            if (!truth_out) throw std::runtime_error("failed writing " + truth_path.string());
            manifest.config = {{"preset", gen_preset}};
            if (contrast) manifest.config["contrast"] = *contrast;
            manifest.outputs = {gen_out, truth_path.string()};
            manifest.write();
        } else if (*anneal) {
            ManifestWriter manifest;
            manifest.command = "anneal";
            manifest.seed = an_seed;
            const auto data = mixanneal::read_dataset_csv(an_data);
            mixanneal::AnnealConfig config;
            config.mode = parse_mode(an_mode);
            config.k = an_k;
            config.lambda_sigma = an_lambda_sigma;
            config.seed = an_seed;
            const double t_c = config.mode == mixanneal::AnnealMode::hard
                                   ? mixanneal::tc_hard(data).t_c
                                   : mixanneal::tc_soft(data, an_k, an_lambda_sigma).t_c;
            an_sched.fill(config, t_c);
            const auto trace = config.mode == mixanneal::AnnealMode::hard
                                   ? mixanneal::hard_anneal(data, config)
                                   : mixanneal::soft_anneal(data, config);
            mixanneal::write_trace_jsonl(trace, an_trace);
            manifest.config = config_to_json(config);
            manifest.config["t_c"] = t_c;
            manifest.inputs = {an_data};
            manifest.outputs = {an_trace};
            manifest.write();
        } else if (*tc) {
            ManifestWriter manifest;
            manifest.command = "tc";
            manifest.seed = tc_seed;
            const auto data = mixanneal::read_dataset_csv(tc_data);
            mixanneal::StabilityReport report;
            if (tc_mode == "hard") {
                report = mixanneal::tc_hard(data);
            } else if (tc_mode == "soft") {
                report = mixanneal::tc_soft(data, tc_k, tc_lambda_sigma);
            } else if (tc_mode == "graph") {
                const mixanneal::MatrixXd adjacency =
                    tc_adjacency.empty()
                        ? mixanneal::mst_adjacency_from_data(data, tc_k, tc_seed)
                        : mixanneal::read_adjacency_json(tc_adjacency);
                report = mixanneal::tc_graph(data, adjacency, tc_lambda_mu);
            } else {
                throw CLI::ValidationError("--mode", "must be hard, soft or graph");
            }
            const json j = mixanneal::report_to_json(report);
            std::cout << j.dump() << "\n";
            if (!tc_out.empty()) {
                std::ofstream out(tc_out);
                out << j.dump(2) << "\n";
                if (!out) throw std::runtime_error("failed writing " + tc_out);
                manifest.config = {{"mode", tc_mode},
                                   {"k", tc_k},
                                   {"lambda_sigma", tc_lambda_sigma},
                                   {"lambda_mu", tc_lambda_mu}};
                manifest.inputs = {tc_data};
                if (!tc_adjacency.empty()) manifest.inputs.push_back(tc_adjacency);
                manifest.outputs = {tc_out};
                manifest.write();
            }
        } else if (*extract) {
            ManifestWriter manifest;
            manifest.command = "extract";
            const auto data = mixanneal::read_dataset_csv(ex_data);
            std::optional<mixanneal::AnnealMode> mode;
            if (ex_mode != "auto") mode = parse_mode(ex_mode);
            const auto trace = mixanneal::read_trace_jsonl(ex_trace, mode);
            if (!ex_hierarchy.empty()) {
                const auto hierarchy = mixanneal::build_hierarchy(trace, data);
                std::ofstream out(ex_hierarchy);
                out << mixanneal::hierarchy_to_json(hierarchy).dump(2) << "\n";
                if (!out) throw std::runtime_error("failed writing " + ex_hierarchy);
                manifest.outputs.push_back(ex_hierarchy);
            }
            if (!ex_clusters.empty()) {
                const auto clusters = mixanneal::extract_clusters_soft(trace);
                std::ofstream out(ex_clusters);
                out << mixanneal::clusters_to_json(clusters).dump(2) << "\n";
                if (!out) throw std::runtime_error("failed writing " + ex_clusters);
                manifest.outputs.push_back(ex_clusters);
            }
            if (!ex_events.empty()) {
                const auto events = mixanneal::classify_events(trace);
                std::ofstream out(ex_events);
                out << mixanneal::events_to_csv(events);
                if (!out) throw std::runtime_error("failed writing " + ex_events);
                manifest.outputs.push_back(ex_events);
            }
            manifest.config = {{"mode", ex_mode}};
            manifest.inputs = {ex_trace, ex_data};
            manifest.write();
        } else if (*graph) {
            ManifestWriter manifest;
            manifest.command = "graph";
            manifest.seed = gr_seed;
            const auto data = mixanneal::read_dataset_csv(gr_data);
            mixanneal::AnnealConfig config;
            config.mode = mixanneal::AnnealMode::hard;
            config.k = gr_k;
            config.seed = gr_seed;
            const double t_c =
                gr_lambda_mu > 0.0
                    ? mixanneal::tc_graph(
                          data,
                          mixanneal::mst_adjacency_from_data(data, gr_k,
                                                             gr_seed ^ 0x9e3779b97f4a7c15ULL),
                          gr_lambda_mu)
                          .t_c
                    : mixanneal::tc_hard(data).t_c;
            gr_sched.fill(config, t_c);
            const auto [pg, trace] = mixanneal::principal_graph_anneal(data, gr_k, gr_lambda_mu, config);
            std::ofstream out(gr_out);
            out << mixanneal::principal_graph_to_json(pg).dump(2) << "\n";
            if (!out) throw std::runtime_error("failed writing " + gr_out);
            manifest.outputs.push_back(gr_out);
            if (!gr_edges.empty()) {
                std::ofstream edges(gr_edges);
                edges << mixanneal::edges_to_csv(pg.adjacency);
                if (!edges) throw std::runtime_error("failed writing " + gr_edges);
                manifest.outputs.push_back(gr_edges);
            }
            if (!gr_trace.empty()) {
                mixanneal::write_trace_jsonl(trace, gr_trace);
                manifest.outputs.push_back(gr_trace);
            }
            manifest.config = config_to_json(config);
            manifest.config["lambda_mu"] = gr_lambda_mu;
            manifest.config["t_c"] = t_c;
            manifest.inputs = {gr_data};
            manifest.write();
        } else if (*overlap) {
            const mixanneal::VectorXi pred = mixanneal::read_label_column_csv(ov_pred);
            const mixanneal::VectorXi truth = mixanneal::read_label_column_csv(ov_truth);
            int q = ov_q;
            if (q <= 0) q = std::max(pred.maxCoeff(), truth.maxCoeff());
            const auto result = mixanneal::overlap(pred, truth, q);
            if (!result.applicable) {
                std::cout << "not applicable (estimated labels exceed q)\n";
            } else {
                std::cout << *result.q_value << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
