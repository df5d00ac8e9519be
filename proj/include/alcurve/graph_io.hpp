#pragma once

// Text formats for spatial graphs and sample graphs. Both are JSON documents
// tagged with "format" and "version"; see docs/formats.md.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "alcurve/graph.hpp"

namespace alcurve::io {

using json = nlohmann::json;

inline constexpr const char* kSpatialGraphFormat = "alcurve-spatial-graph";
inline constexpr const char* kSampleGraphFormat = "alcurve-sample-graph";
inline constexpr int kGraphFormatVersion = 1;

namespace detail {

inline json point_to_json(const Point& p) { return json(p); }

inline Point point_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || (j.size() != 2 && j.size() != 3)) {
        throw GraphError(what + ": coordinates must be an array of 2 or 3 numbers");
    }
    return j.get<Point>();
}

inline void check_header(const json& doc, const char* format) {
    if (!doc.is_object()) throw GraphError("graph document must be a JSON object");
    if (doc.contains("format") && doc["format"] != format) {
        throw GraphError(std::string("expected format '") + format + "', found " + doc["format"].dump());
    }
    if (doc.contains("version") && doc["version"].get<int>() != kGraphFormatVersion) {
        throw GraphError("unsupported graph format version " + doc["version"].dump());
    }
}

inline std::optional<int> label_from_json(const json& obj) {
    if (!obj.contains("gt_label") || obj["gt_label"].is_null()) return std::nullopt;
    return obj["gt_label"].get<int>();
}

} // namespace detail

inline json to_json(const SpatialGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) {
        json node{{"id", n.id}, {"x", n.position.at(0)}, {"y", n.position.at(1)}};
        if (n.position.size() == 3) node["z"] = n.position[2];
        nodes.push_back(std::move(node));
    }
    json edges = json::array();
    for (const auto& e : g.edges) {
        json poly = json::array();
        for (const auto& p : e.polyline) poly.push_back(detail::point_to_json(p));
        json edge{{"id", e.id},
                  {"node_a", g.nodes.at(e.node_a).id},
                  {"node_b", g.nodes.at(e.node_b).id},
                  {"polyline", std::move(poly)},
                  {"features", e.features}};
        if (e.gt_label) edge["gt_label"] = *e.gt_label;
        edges.push_back(std::move(edge));
    }
    return json{{"format", kSpatialGraphFormat},
                {"version", kGraphFormatVersion},
                {"feature_dim", g.feature_dim},
                {"nodes", std::move(nodes)},
                {"edges", std::move(edges)}};
}

inline SpatialGraph spatial_graph_from_json(const json& doc) {
    detail::check_header(doc, kSpatialGraphFormat);
    try {
        SpatialGraph g;
        g.feature_dim = doc.at("feature_dim").get<std::size_t>();
        std::unordered_map<std::int64_t, std::size_t> node_index;
        for (const auto& n : doc.at("nodes")) {
            SpatialNode node;
            node.id = n.at("id").get<std::int64_t>();
            node.position = {n.at("x").get<double>(), n.at("y").get<double>()};
            if (n.contains("z") && !n["z"].is_null()) node.position.push_back(n["z"].get<double>());
            if (!node_index.emplace(node.id, g.nodes.size()).second) {
                throw GraphError("duplicate node id " + std::to_string(node.id));
            }
            g.nodes.push_back(std::move(node));
        }
        for (const auto& e : doc.at("edges")) {
            SpatialEdge edge;
            edge.id = e.at("id").get<std::int64_t>();
            const auto a = node_index.find(e.at("node_a").get<std::int64_t>());
            const auto b = node_index.find(e.at("node_b").get<std::int64_t>());
            if (a == node_index.end() || b == node_index.end()) {
                throw GraphError("edge " + std::to_string(edge.id) + " references an unknown node id");
            }
            edge.node_a = a->second;
            edge.node_b = b->second;
            for (const auto& p : e.at("polyline")) {
                edge.polyline.push_back(detail::point_from_json(p, "edge " + std::to_string(edge.id)));
            }
            edge.features = e.at("features").get<std::vector<double>>();
            edge.gt_label = detail::label_from_json(e);
            g.edges.push_back(std::move(edge));
        }
        g.validate();
        return g;
    } catch (const json::exception& ex) {
        throw GraphError(std::string("malformed spatial graph: ") + ex.what());
    }
}

inline json to_json(const SampleGraph& sg) {
    json samples = json::array();
    for (std::size_t i = 0; i < sg.size(); ++i) {
        const auto& s = sg.sample(i);
        json obj{{"id", i}, {"features", s.features}};
        if (s.gt_label) obj["gt_label"] = *s.gt_label;
        if (s.position) obj["position"] = *s.position;
        samples.push_back(std::move(obj));
    }
    json adjacency = json::array();
    for (auto [i, j] : sg.edge_list()) adjacency.push_back(json::array({i, j}));
    return json{{"format", kSampleGraphFormat},
                {"version", kGraphFormatVersion},
                {"feature_dim", sg.feature_dim()},
                {"samples", std::move(samples)},
                {"adjacency", std::move(adjacency)}};
}

inline SampleGraph sample_graph_from_json(const json& doc) {
    detail::check_header(doc, kSampleGraphFormat);
    try {
        std::vector<Sample> samples;
        for (const auto& s : doc.at("samples")) {
            if (s.contains("id") && s["id"].get<std::size_t>() != samples.size()) {
                throw GraphError("sample ids must be 0..N-1 in order");
            }
            Sample sample;
            sample.features = s.at("features").get<std::vector<double>>();
            sample.gt_label = detail::label_from_json(s);
            if (s.contains("position") && !s["position"].is_null()) {
                sample.position = detail::point_from_json(s["position"], "sample " + std::to_string(samples.size()));
            }
            samples.push_back(std::move(sample));
        }
        if (doc.contains("feature_dim") && !samples.empty() &&
            doc["feature_dim"].get<std::size_t>() != samples.front().features.size()) {
            throw GraphError("feature_dim does not match sample features");
        }
        std::vector<std::pair<std::size_t, std::size_t>> adjacency;
        for (const auto& pair : doc.at("adjacency")) {
            if (!pair.is_array() || pair.size() != 2) throw GraphError("adjacency entries must be index pairs");
            adjacency.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
        }
        return SampleGraph(std::move(samples), adjacency);
    } catch (const json::exception& ex) {
        throw GraphError(std::string("malformed sample graph: ") + ex.what());
    }
}

// A loaded graph file of either kind. `spatial` is set for spatial graphs, in
// which case `samples` is derived from it.
struct GraphDocument {
    SampleGraph samples;
    std::optional<SpatialGraph> spatial;
};

inline GraphDocument graph_from_json(const json& doc) {
    const bool spatial = (doc.contains("format") && doc["format"] == kSpatialGraphFormat) ||
                         (!doc.contains("format") && doc.contains("edges"));
    if (spatial) {
        SpatialGraph g = spatial_graph_from_json(doc);
        SampleGraph sg = from_spatial_graph(g);
        return GraphDocument{std::move(sg), std::move(g)};
    }
    return GraphDocument{sample_graph_from_json(doc), std::nullopt};
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GraphError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw GraphError(path + ": " + ex.what());
    }
}

inline void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw GraphError("cannot write " + path);
    out << doc.dump(1) << '\n';
}

inline GraphDocument load_graph(const std::string& path) { return graph_from_json(read_json_file(path)); }

} // namespace alcurve::io
