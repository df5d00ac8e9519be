#pragma once

// Synthetic ring dataset: a positive disk surrounded by a negative annulus in
// image space, a warped and noisy copy of the coordinates as features, and a
// k-nearest-neighbour graph in image space as the adjacency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"

namespace alcurve {

struct SyntheticConfig {
    std::size_t n_points = 600;
    double inner_radius = 0.5;
    double outer_radius = 1.0;
    double warp_angle = std::numbers::pi / 6.0;
    double radial_gain = 1.3;
    double noise = 0.08;
    std::size_t neighbors = 10;
    std::uint64_t seed = 1;
    // Attempts with seed, seed+1, ... until the k-NN graph is connected.
    std::size_t max_regenerations = 16;

    void validate() const {
        if (!(inner_radius > 0.0 && inner_radius < outer_radius)) {
            throw ConfigError("synthetic radii must satisfy 0 < inner < outer");
        }
        if (!(noise >= 0.0)) throw ConfigError("synthetic noise must be nonnegative");
        if (!(radial_gain > 0.0)) throw ConfigError("radial gain must be positive");
        if (neighbors < 1 || neighbors >= n_points) throw ConfigError("neighbors must be in [1, n_points)");
    }

    // Radius of the class boundary in feature space (noise-free).
    double feature_boundary_radius() const { return inner_radius * radial_gain; }
};

// Image coordinates -> features: rotate by the warp angle, scale by the
// radial gain.
inline Point warp_coordinates(const Point& p, const SyntheticConfig& cfg) {
    const double c = std::cos(cfg.warp_angle);
    const double s = std::sin(cfg.warp_angle);
    return {cfg.radial_gain * (c * p[0] - s * p[1]), cfg.radial_gain * (s * p[0] + c * p[1])};
}

// k nearest neighbours of every point (ties by lower index), symmetrized.
inline std::vector<std::pair<std::size_t, std::size_t>> knn_adjacency(std::span<const Point> points,
                                                                      std::size_t k) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < points.size(); ++i) {
        dist.clear();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) dist.emplace_back(geometry::distance(points[i], points[j]), j);
        }
        const std::size_t take = std::min(k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
        for (std::size_t n = 0; n < take; ++n) {
            const std::size_t j = dist[n].second;
            edges.emplace_back(std::min(i, j), std::max(i, j));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

namespace detail {

inline SampleGraph generate_synthetic_once(const SyntheticConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Point> coords;
    std::vector<Sample> samples;
    coords.reserve(cfg.n_points);
    samples.reserve(cfg.n_points);
    for (std::size_t i = 0; i < cfg.n_points; ++i) {
        const double r = cfg.outer_radius * std::sqrt(unit(rng));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        Point p{r * std::cos(theta), r * std::sin(theta)};
        Point f = warp_coordinates(p, cfg);
        const double nx = gauss(rng);
        const double ny = gauss(rng);
        f[0] += cfg.noise * nx;
        f[1] += cfg.noise * ny;
        samples.push_back(Sample{std::move(f), r < cfg.inner_radius ? 1 : 0, p});
        coords.push_back(std::move(p));
    }
    return SampleGraph(std::move(samples), knn_adjacency(coords, cfg.neighbors));
}

} // namespace detail

// Deterministic per seed. If the graph comes out disconnected the next seed
// is tried; each retry is appended to `notes` when given.
inline SampleGraph generate_synthetic(const SyntheticConfig& cfg, std::vector<std::string>* notes = nullptr) {
    cfg.validate();
    for (std::size_t attempt = 0; attempt <= cfg.max_regenerations; ++attempt) {
        SampleGraph g = detail::generate_synthetic_once(cfg, cfg.seed + attempt);
        if (g.connected()) return g;
        if (notes) {
            notes->push_back("synthetic graph with seed " + std::to_string(cfg.seed + attempt) +
                             " is disconnected; regenerating with seed " + std::to_string(cfg.seed + attempt + 1));
        }
    }
    throw GraphError("could not generate a connected synthetic graph");
}

// ---------------------------------------------------------------------------
// Query heat-maps in a 2-D feature space.

struct GridSpec {
    double x_min = -1.5;
    double x_max = 1.5;
    double y_min = -1.5;
    double y_max = 1.5;
    std::size_t nx = 30;
    std::size_t ny = 30;
};

struct HeatMap {
    GridSpec grid;
    // Row-major, counts[iy * nx + ix].
    std::vector<std::size_t> counts;
    // Queried samples falling outside the grid.
    std::size_t spill = 0;

    std::size_t at(std::size_t ix, std::size_t iy) const { return counts.at(iy * grid.nx + ix); }
    std::size_t total() const {
        std::size_t t = spill;
        for (auto c : counts) t += c;
        return t;
    }
};

// Bins the first two features of every queried sample. `queried` lists
// sample indices into `sg`, one entry per query of that sample.
inline HeatMap accumulate_heatmap(const SampleGraph& sg, std::span<const std::size_t> queried, const GridSpec& grid) {
    if (grid.nx == 0 || grid.ny == 0 || !(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) {
        throw ConfigError("invalid heat-map grid");
    }
    if (sg.feature_dim() < 2 && !sg.empty()) throw ConfigError("heat-maps need at least two features");
    HeatMap h{grid, std::vector<std::size_t>(grid.nx * grid.ny, 0), 0};
    for (std::size_t i : queried) {
        const auto& f = sg.sample(i).features;
        const double u = (f[0] - grid.x_min) / (grid.x_max - grid.x_min);
        const double v = (f[1] - grid.y_min) / (grid.y_max - grid.y_min);
        if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) {
            ++h.spill;
            continue;
        }
        const auto ix = std::min(grid.nx - 1, static_cast<std::size_t>(u * static_cast<double>(grid.nx)));
        const auto iy = std::min(grid.ny - 1, static_cast<std::size_t>(v * static_cast<double>(grid.ny)));
        ++h.counts[iy * grid.nx + ix];
    }
    return h;
}

} // namespace alcurve
