#pragma once

// Sample-adjacency graph model: every candidate path is a sample, and two
// samples are adjacent when their paths share a node of the underlying
// overcomplete spatial graph (or when linked in a synthetic k-NN graph).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "alcurve/errors.hpp"

namespace alcurve {

using Point = std::vector<double>;
using Polyline = std::vector<Point>;
using FeatureRows = std::vector<std::vector<double>>;
// Sorted, distinct sample indices.
using Batch = std::vector<std::size_t>;

struct Sample {
    std::vector<double> features;
    std::optional<int> gt_label;
    std::optional<Point> position;
};

class SampleGraph {
public:
    SampleGraph() = default;

    // Throws GraphError when any invariant fails. Duplicate pairs are merged.
    SampleGraph(std::vector<Sample> samples,
                std::span<const std::pair<std::size_t, std::size_t>> adjacency)
        : samples_(std::move(samples)), neighbors_(samples_.size()) {
        validate_samples();
        for (auto [i, j] : adjacency) {
            if (i >= samples_.size() || j >= samples_.size()) {
                throw GraphError("adjacency references sample " + std::to_string(std::max(i, j)) +
                                 " but graph has " + std::to_string(samples_.size()) + " samples");
            }
            if (i == j) {
                throw GraphError("adjacency must be irreflexive (sample " + std::to_string(i) + ")");
            }
            neighbors_[i].push_back(j);
            neighbors_[j].push_back(i);
        }
        for (auto& n : neighbors_) {
            std::sort(n.begin(), n.end());
            n.erase(std::unique(n.begin(), n.end()), n.end());
        }
    }

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t feature_dim() const noexcept {
        return samples_.empty() ? 0 : samples_.front().features.size();
    }

    const Sample& sample(std::size_t i) const { return samples_.at(i); }
    const std::vector<Sample>& samples() const noexcept { return samples_; }

    std::span<const std::size_t> neighbors(std::size_t i) const { return neighbors_.at(i); }

    bool adjacent(std::size_t i, std::size_t j) const {
        const auto& n = neighbors_.at(i);
        return std::binary_search(n.begin(), n.end(), j);
    }

    // Each undirected pair once, i < j, lexicographic order.
    std::vector<std::pair<std::size_t, std::size_t>> edge_list() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < neighbors_.size(); ++i) {
            for (std::size_t j : neighbors_[i]) {
                if (i < j) out.emplace_back(i, j);
            }
        }
        return out;
    }

    bool fully_labeled() const {
        return std::all_of(samples_.begin(), samples_.end(),
                           [](const Sample& s) { return s.gt_label.has_value(); });
    }

    FeatureRows feature_rows() const {
        FeatureRows rows;
        rows.reserve(samples_.size());
        for (const auto& s : samples_) rows.push_back(s.features);
        return rows;
    }

    // Subgraph on `keep` (in the given order); sample i of the result is keep[i].
    SampleGraph induced(std::span<const std::size_t> keep) const {
        std::vector<std::size_t> remap(samples_.size(), npos);
        std::vector<Sample> sub;
        sub.reserve(keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k) {
            if (keep[k] >= samples_.size()) throw GraphError("induced: index out of range");
            if (remap[keep[k]] != npos) throw GraphError("induced: duplicate index");
            remap[keep[k]] = k;
            sub.push_back(samples_[keep[k]]);
        }
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t k = 0; k < keep.size(); ++k) {
            for (std::size_t j : neighbors_[keep[k]]) {
                if (remap[j] != npos && k < remap[j]) edges.emplace_back(k, remap[j]);
            }
        }
        return SampleGraph(std::move(sub), edges);
    }

    bool connected() const {
        if (samples_.empty()) return true;
        std::vector<bool> seen(samples_.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t count = 1;
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v : neighbors_[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        return count == samples_.size();
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

private:
    void validate_samples() const {
        if (samples_.empty()) return;
        const std::size_t d = samples_.front().features.size();
        if (d == 0) throw GraphError("feature dimension must be at least 1");
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto& s = samples_[i];
            if (s.features.size() != d) {
                throw GraphError("sample " + std::to_string(i) + " has feature dimension " +
                                 std::to_string(s.features.size()) + ", expected " + std::to_string(d));
            }
            for (double f : s.features) {
                if (!std::isfinite(f)) throw GraphError("sample " + std::to_string(i) + " has a non-finite feature");
            }
            if (s.gt_label && *s.gt_label != 0 && *s.gt_label != 1) {
                throw GraphError("sample " + std::to_string(i) + " has a non-binary label");
            }
            if (s.position && s.position->size() != 2 && s.position->size() != 3) {
                throw GraphError("sample " + std::to_string(i) + " position must be 2-D or 3-D");
            }
        }
    }

    std::vector<Sample> samples_;
    std::vector<std::vector<std::size_t>> neighbors_;
};

// Annotated samples, kept in insertion order.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::size_t universe) : lookup_(universe, -1) {}

    void add(std::size_t index, int label) {
        if (index >= lookup_.size()) {
            throw GraphError("label index " + std::to_string(index) + " out of range");
        }
        if (label != 0 && label != 1) throw GraphError("labels must be 0 or 1");
        if (lookup_[index] != -1) {
            throw GraphError("sample " + std::to_string(index) + " is already labeled");
        }
        lookup_[index] = static_cast<std::int8_t>(label);
        entries_.emplace_back(index, label);
    }

    bool contains(std::size_t index) const { return index < lookup_.size() && lookup_[index] != -1; }

    std::optional<int> label(std::size_t index) const {
        if (!contains(index)) return std::nullopt;
        return lookup_[index];
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t universe() const noexcept { return lookup_.size(); }

    const std::vector<std::pair<std::size_t, int>>& entries() const noexcept { return entries_; }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.first);
        return out;
    }

    std::size_t count(int label) const {
        return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                      [label](const auto& e) { return e.second == label; }));
    }

private:
    std::vector<std::int8_t> lookup_;
    std::vector<std::pair<std::size_t, int>> entries_;
};

struct SpatialNode {
    std::int64_t id = 0;
    Point position;
};

struct SpatialEdge {
    std::int64_t id = 0;
    // Node indices (positions in SpatialGraph::nodes), not node ids.
    std::size_t node_a = 0;
    std::size_t node_b = 0;
    Polyline polyline;
    std::vector<double> features;
    std::optional<int> gt_label;
};

struct SpatialGraph {
    std::vector<SpatialNode> nodes;
    std::vector<SpatialEdge> edges;
    std::size_t feature_dim = 0;

    void validate() const {
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto& edge = edges[e];
            const std::string tag = "edge " + std::to_string(edge.id);
            if (edge.node_a >= nodes.size() || edge.node_b >= nodes.size()) {
                throw GraphError(tag + " references a missing node");
            }
            if (edge.polyline.empty()) throw GraphError(tag + " has an empty polyline");
            if (edge.features.size() != feature_dim) {
                throw GraphError(tag + " feature dimension does not match feature_dim");
            }
            if (edge.gt_label && *edge.gt_label != 0 && *edge.gt_label != 1) {
                throw GraphError(tag + " has a non-binary label");
            }
        }
        if (!edges.empty() && feature_dim == 0) throw GraphError("feature_dim must be at least 1");
    }
};

namespace geometry {

inline double distance(const Point& a, const Point& b) {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double length(const Polyline& line) {
    double total = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) total += distance(line[i - 1], line[i]);
    return total;
}

inline Point lerp(const Point& a, const Point& b, double t) {
    Point p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] + t * (b[i] - a[i]);
    return p;
}

// Point at arclength `s` from the start, clamped to the ends.
inline Point point_at(const Polyline& line, double s) {
    if (line.size() == 1 || s <= 0.0) return line.front();
    for (std::size_t i = 1; i < line.size(); ++i) {
        const double seg = distance(line[i - 1], line[i]);
        if (s <= seg && seg > 0.0) return lerp(line[i - 1], line[i], s / seg);
        s -= seg;
    }
    return line.back();
}

// Points every `step` units of arclength, both ends included.
inline Polyline resample(const Polyline& line, double step) {
    const double total = length(line);
    if (total <= 0.0) return {line.front()};
    const auto pieces = static_cast<std::size_t>(std::ceil(total / step));
    Polyline out;
    out.reserve(pieces + 1);
    for (std::size_t i = 0; i <= pieces; ++i) {
        out.push_back(point_at(line, total * static_cast<double>(i) / static_cast<double>(pieces)));
    }
    return out;
}

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    double ab2 = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double ab = b[i] - a[i];
        ab2 += ab * ab;
        dot += (p[i] - a[i]) * ab;
    }
    const double t = ab2 > 0.0 ? std::clamp(dot / ab2, 0.0, 1.0) : 0.0;
    return distance(p, lerp(a, b, t));
}

inline double point_polyline_distance(const Point& p, const Polyline& line) {
    if (line.size() == 1) return distance(p, line.front());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < line.size(); ++i) {
        best = std::min(best, point_segment_distance(p, line[i - 1], line[i]));
    }
    return best;
}

} // namespace geometry

// One sample per spatial edge; samples are adjacent iff their edges share a
// node. Positions are the arclength midpoints of the edge polylines.
inline SampleGraph from_spatial_graph(const SpatialGraph& g) {
    g.validate();
    if (g.edges.empty()) throw GraphError("spatial graph has no edges");
    std::vector<Sample> samples;
    samples.reserve(g.edges.size());
    std::vector<std::vector<std::size_t>> incident(g.nodes.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        samples.push_back(Sample{edge.features, edge.gt_label,
                                 geometry::point_at(edge.polyline, 0.5 * geometry::length(edge.polyline))});
        incident[edge.node_a].push_back(e);
        if (edge.node_b != edge.node_a) incident[edge.node_b].push_back(e);
    }
    std::vector<std::pair<std::size_t, std::size_t>> adjacency;
    for (const auto& edges_at_node : incident) {
        for (std::size_t a = 0; a < edges_at_node.size(); ++a) {
            for (std::size_t b = a + 1; b < edges_at_node.size(); ++b) {
                if (edges_at_node[a] != edges_at_node[b]) {
                    adjacency.emplace_back(edges_at_node[a], edges_at_node[b]);
                }
            }
        }
    }
    return SampleGraph(std::move(samples), adjacency);
}

struct TraceMatch {
    // Largest distance from any sampled edge point to the nearest trace.
    double max_distance = 0.0;
    // Fraction of the edge arclength lying within the distance threshold.
    double covered_fraction = 0.0;
};

// Edge points are taken every `sample_step` units of arclength.
inline TraceMatch match_edge(const Polyline& edge, std::span<const Polyline> traces, double dist_thresh,
                             double sample_step = 1.0) {
    const Polyline pts = geometry::resample(edge, sample_step);
    std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (const auto& trace : traces) {
            if (!trace.empty()) dist[i] = std::min(dist[i], geometry::point_polyline_distance(pts[i], trace));
        }
    }
    TraceMatch m;
    m.max_distance = *std::max_element(dist.begin(), dist.end());
    if (pts.size() == 1) {
        m.covered_fraction = dist[0] <= dist_thresh ? 1.0 : 0.0;
        return m;
    }
    // Each piece between consecutive samples counts half per covered endpoint.
    double covered = 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double seg = geometry::distance(pts[i - 1], pts[i]);
        const double inside = 0.5 * ((dist[i - 1] <= dist_thresh ? 1.0 : 0.0) + (dist[i] <= dist_thresh ? 1.0 : 0.0));
        covered += seg * inside;
        total += seg;
    }
    m.covered_fraction = total > 0.0 ? covered / total : 0.0;
    return m;
}

// Label 1 iff every edge point lies within dist_thresh of a trace and the
// covered arclength fraction strictly exceeds overlap_thresh.
inline std::vector<int> match_ground_truth(const SpatialGraph& g, std::span<const Polyline> traces,
                                           double dist_thresh = 10.0, double overlap_thresh = 0.5) {
    if (!(dist_thresh > 0.0) || !(overlap_thresh > 0.0)) {
        throw GraphError("ground-truth matching thresholds must be positive");
    }
    g.validate();
    std::vector<int> labels(g.edges.size(), 0);
    if (traces.empty()) return labels;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const TraceMatch m = match_edge(g.edges[e].polyline, traces, dist_thresh);
        labels[e] = (m.max_distance <= dist_thresh && m.covered_fraction > overlap_thresh) ? 1 : 0;
    }
    return labels;
}

namespace detail {

// ESU enumeration (Wernicke 2006): each connected k-subset is reported once.
inline void extend_subgraph(const SampleGraph& sg, const std::vector<bool>& blocked, std::size_t k,
                            std::size_t root, std::vector<std::size_t>& sub, std::vector<std::size_t> ext,
                            std::vector<Batch>& out) {
    if (sub.size() == k) {
        Batch b = sub;
        std::sort(b.begin(), b.end());
        out.push_back(std::move(b));
        return;
    }
    while (!ext.empty()) {
        const std::size_t w = ext.back();
        ext.pop_back();
        std::vector<std::size_t> next = ext;
        for (std::size_t u : sg.neighbors(w)) {
            if (u <= root || blocked[u]) continue;
            if (std::find(sub.begin(), sub.end(), u) != sub.end()) continue;
            bool touches_sub = false;
            for (std::size_t s : sub) {
                if (sg.adjacent(s, u)) {
                    touches_sub = true;
                    break;
                }
            }
            if (touches_sub) continue;
            if (std::find(next.begin(), next.end(), u) == next.end()) next.push_back(u);
        }
        sub.push_back(w);
        extend_subgraph(sg, blocked, k, root, sub, std::move(next), out);
        sub.pop_back();
    }
}

} // namespace detail

// All connected sets of k unlabeled samples, each sorted ascending; the list is
// in lexicographic order. Empty when no such set exists.
inline std::vector<Batch> candidate_batches(const SampleGraph& sg, std::size_t k, const LabelSet& labeled) {
    if (k == 0) throw GraphError("batch size must be positive");
    std::vector<bool> blocked(sg.size(), false);
    for (const auto& [i, y] : labeled.entries()) {
        if (i < blocked.size()) blocked[i] = true;
    }
    std::vector<Batch> out;
    for (std::size_t v = 0; v < sg.size(); ++v) {
        if (blocked[v]) continue;
        std::vector<std::size_t> ext;
        for (std::size_t u : sg.neighbors(v)) {
            if (u > v && !blocked[u]) ext.push_back(u);
        }
        std::vector<std::size_t> sub{v};
        detail::extend_subgraph(sg, blocked, k, v, sub, std::move(ext), out);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct CandidateSet {
    std::vector<Batch> batches;
    std::size_t k = 0;
    bool fallback = false;
};

// Tries k, then k-1, ... down to 1; `batches` is empty only when every
// sample is labeled.
inline CandidateSet candidate_batches_with_fallback(const SampleGraph& sg, std::size_t k, const LabelSet& labeled) {
    for (std::size_t size = k; size >= 1; --size) {
        auto batches = candidate_batches(sg, size, labeled);
        if (!batches.empty()) return CandidateSet{std::move(batches), size, size != k};
    }
    return CandidateSet{{}, 0, k != 0};
}

} // namespace alcurve
