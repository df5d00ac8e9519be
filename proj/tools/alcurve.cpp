// alcurve command line: experiments, synthetic data, annotation server and
// tree extraction.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "alcurve/alcurve.hpp"
#include "alcurve/service.hpp"

namespace fs = std::filesystem;
using namespace alcurve;

namespace {

// "--synthetic" takes a JSON object, a path to one, or key=value pairs
// separated by commas ("n_points=800,seed=3").
json parse_synthetic_arg(const std::string& arg) {
    if (arg.empty()) return json::object();
    if (arg.front() == '{') return json::parse(arg);
    if (fs::exists(arg)) return io::read_json_file(arg);
    json j = json::object();
    std::istringstream in(arg);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            j[key] = json::parse(value);
        } catch (const json::exception&) {
            throw ConfigError("bad value for '" + key + "': " + value);
        }
    }
    return j;
}

GridSpec heatmap_grid(const SampleGraph& sg) {
    GridSpec g;
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& s : sg.samples()) {
        lo = std::min({lo, s.features[0], s.features[1]});
        hi = std::max({hi, s.features[0], s.features[1]});
    }
    const double pad = 0.05 * (hi - lo) + 1e-9;
    g.x_min = g.y_min = lo - pad;
    g.x_max = g.y_max = hi + pad;
    return g;
}

int cmd_run(const std::string& config_path, std::string out_dir) {
    const ExperimentDocument doc = experiment_from_json(io::read_json_file(config_path));
    SampleGraph data = [&] {
        if (doc.dataset.path) {
            fs::path p(*doc.dataset.path);
            if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
            return io::load_graph(p.string()).samples;
        }
        std::vector<std::string> notes;
        SampleGraph g = generate_synthetic(*doc.dataset.synthetic, &notes);
        for (const auto& n : notes) std::cerr << "note: " << n << '\n';
        return g;
    }();
    if (out_dir.empty()) out_dir = doc.output_dir.value_or("results");
    fs::create_directories(out_dir);

    const AggregateResult r = run_experiment(doc.experiment, data);
    export_results(r, out_dir);

    if (data.feature_dim() >= 2) {
        const GridSpec grid = heatmap_grid(data);
        std::map<StrategyKind, std::vector<std::size_t>> queried;
        for (const auto& q : r.queries) {
            auto& v = queried[q.strategy];
            v.insert(v.end(), q.indices.begin(), q.indices.end());
        }
        for (const auto& [kind, idx] : queried) {
            std::ofstream out(fs::path(out_dir) / ("heatmap_" + std::string(to_string(kind)) + ".csv"));
            write_heatmap_csv(out, accumulate_heatmap(data, idx, grid));
        }
    }

    std::cout << "full baseline " << r.full_baseline << '\n';
    for (const auto& s : r.strategies) {
        std::cout << to_string(s.strategy) << ": final " << to_string(r.metric) << ' ' << s.final_mean << " (variance "
                  << s.final_variance << ")\n";
    }
    std::cout << "wrote " << out_dir << '\n';
    return 0;
}

int cmd_generate(const std::string& synthetic, const std::string& out) {
    const SyntheticConfig cfg = synthetic_config_from_json(parse_synthetic_arg(synthetic));
    std::vector<std::string> notes;
    const SampleGraph g = generate_synthetic(cfg, &notes);
    for (const auto& n : notes) std::cerr << "note: " << n << '\n';
    if (out.empty() || out == "-") {
        std::cout << io::to_json(g).dump() << '\n';
    } else {
        io::write_json_file(out, io::to_json(g));
        std::cerr << "wrote " << g.size() << " samples to " << out << '\n';
    }
    return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& graph, const std::string& strategy, const std::string& options_json,
              const std::string& host, int port, const std::string& storage) {
    std::unique_ptr<AnnotationService> service =
        storage.empty() ? std::make_unique<AnnotationService>() : std::make_unique<AnnotationService>(storage);
    if (!graph.empty()) {
        json opts = options_json.empty() ? json::object() : json::parse(options_json);
        opts["strategy"] = strategy;
        service->set_default_graph(std::make_shared<const io::GraphDocument>(io::load_graph(graph)),
                                   session_options_from_json(opts));
    }
    httplib::Server server;
    service->mount(server);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
        return 1;
    }
    return 0;
}

int cmd_reconstruct(const std::string& graph_path, const std::string& model_path, std::optional<std::int64_t> root_id,
                    const std::string& out) {
    const io::GraphDocument doc = io::load_graph(graph_path);
    if (!doc.spatial) throw GraphError("tree extraction needs a spatial graph");
    const SpatialGraph& g = *doc.spatial;
    BoostedModel model = [&] {
        if (!model_path.empty()) {
            std::ifstream in(model_path);
            if (!in) throw ModelError("cannot open " + model_path);
            return read_model(in);
        }
        FeatureRows rows;
        std::vector<int> y;
        for (const auto& e : g.edges) {
            if (!e.gt_label) continue;
            rows.push_back(e.features);
            y.push_back(*e.gt_label);
        }
        return train_boosted(rows, y, BoostConfig{}, 0);
    }();
    std::vector<double> probs;
    for (const auto& e : g.edges) probs.push_back(predict_probability(model, e.features));
    std::size_t root = 0;
    if (root_id) {
        auto it = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const SpatialNode& n) { return n.id == *root_id; });
        if (it == g.nodes.end()) throw GraphError("no node with id " + std::to_string(*root_id));
        root = static_cast<std::size_t>(it - g.nodes.begin());
    }
    const Tree t = extract_tree(g, probs, root);
    json j = tree_to_json(g, t);
    j["cost"] = tree_cost(t, probs);
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        io::write_json_file(out, j);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"alcurve: learning curves, annotation sessions and tree extraction on path graphs"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "Run a learning-curve experiment");
    run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (overrides the config)");

    std::string synthetic;
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "Generate the synthetic ring dataset");
    gen->add_option("--synthetic", synthetic, "Generator parameters: JSON, JSON file, or key=value,...");
    gen->add_option("--out,-o", gen_out, "Output sample-graph file (default: stdout)");

    std::string graph;
    std::string strategy = "dps";
    std::string options;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string storage;
    auto* serve = app.add_subcommand("serve", "Serve annotation sessions over HTTP");
    serve->add_option("--graph", graph, "Default graph for new sessions")->check(CLI::ExistingFile);
    serve->add_option("--strategy", strategy, "Query strategy: rs, us, qbc, pps, dps");
    serve->add_option("--options", options, "Session options (JSON)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--storage", storage, "Directory for session logs");

    std::string tree_graph;
    std::string model;
    std::optional<std::int64_t> root;
    std::string tree_out;
    auto* rec = app.add_subcommand("reconstruct", "Extract a tree from a spatial graph");
    rec->add_option("--graph", tree_graph, "Spatial graph file")->required()->check(CLI::ExistingFile);
    rec->add_option("--model", model, "Classifier file (default: train on ground truth)");
    rec->add_option("--root", root, "Root node id (default: first node)");
    rec->add_option("--out,-o", tree_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, out_dir);
        if (*gen) return cmd_generate(synthetic, gen_out);
        if (*serve) return cmd_serve(graph, strategy, options, host, port, storage);
        if (*rec) return cmd_reconstruct(tree_graph, model, root, tree_out);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
