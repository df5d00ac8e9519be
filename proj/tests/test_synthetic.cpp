#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "alcurve/synthetic.hpp"

using namespace alcurve;

TEST(Synthetic, IdentityWarpWithoutNoiseCopiesCoordinates) {
    SyntheticConfig cfg;
    cfg.n_points = 120;
    cfg.warp_angle = 0.0;
    cfg.radial_gain = 1.0;
    cfg.noise = 0.0;
    const SampleGraph g = generate_synthetic(cfg);
    for (const auto& s : g.samples()) {
        ASSERT_TRUE(s.position.has_value());
        EXPECT_EQ(s.features, *s.position);
        const double r = std::hypot((*s.position)[0], (*s.position)[1]);
        EXPECT_LE(r, cfg.outer_radius);
        EXPECT_EQ(*s.gt_label, r < cfg.inner_radius ? 1 : 0);
    }
}

TEST(Synthetic, WarpRotatesAndScales) {
    SyntheticConfig cfg;
    cfg.warp_angle = std::numbers::pi / 2.0;
    cfg.radial_gain = 2.0;
    const Point f = warp_coordinates({1.0, 0.0}, cfg);
    EXPECT_NEAR(f[0], 0.0, 1e-15);
    EXPECT_NEAR(f[1], 2.0, 1e-15);
}

TEST(Synthetic, EveryPointKeepsItsNearestNeighbours) {
    SyntheticConfig cfg;
    cfg.n_points = 200;
    const SampleGraph g = generate_synthetic(cfg);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_GE(g.neighbors(i).size(), cfg.neighbors);
}

TEST(Synthetic, AdjacencyIsSymmetricAndConnected) {
    SyntheticConfig cfg;
    cfg.n_points = 300;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        const SampleGraph g = generate_synthetic(cfg);
        EXPECT_TRUE(g.connected());
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j : g.neighbors(i)) {
                EXPECT_NE(i, j);
                EXPECT_TRUE(g.adjacent(j, i));
            }
        }
    }
}

TEST(Synthetic, KnnMatchesBruteForce) {
    const std::vector<Point> pts{{0.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}, {7.0, 0.0}};
    const auto edges = knn_adjacency(pts, 1);
    // 0<->1, 1->0, 2->1, 3->2
    const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 1}, {1, 2}, {2, 3}};
    EXPECT_EQ(edges, expected);
}

TEST(Synthetic, ClassBalanceFollowsAreaRatio) {
    // P(r < 0.5) = 0.25 for points uniform on the unit disk.
    SyntheticConfig cfg;
    std::size_t positives = 0;
    std::size_t total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.seed = seed * 101;
        const SampleGraph g = generate_synthetic(cfg);
        for (const auto& s : g.samples()) positives += static_cast<std::size_t>(*s.gt_label);
        total += g.size();
    }
    const double n = static_cast<double>(total);
    const double sd = std::sqrt(n * 0.25 * 0.75);
    EXPECT_NEAR(static_cast<double>(positives), 0.25 * n, 4.0 * sd);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticConfig cfg;
    cfg.n_points = 100;
    const SampleGraph a = generate_synthetic(cfg);
    const SampleGraph b = generate_synthetic(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.sample(i).features, b.sample(i).features);
    EXPECT_EQ(a.edge_list(), b.edge_list());
    cfg.seed = 2;
    EXPECT_NE(generate_synthetic(cfg).sample(0).features, a.sample(0).features);
}

TEST(Synthetic, NoiselessBoundaryIsACircleInFeatureSpace) {
    SyntheticConfig cfg;
    cfg.noise = 0.0;
    const double radius = cfg.feature_boundary_radius();
    const SampleGraph g = generate_synthetic(cfg);
    std::size_t correct = 0;
    for (const auto& s : g.samples()) {
        const int predicted = std::hypot(s.features[0], s.features[1]) < radius ? 1 : 0;
        correct += predicted == *s.gt_label ? 1 : 0;
    }
    EXPECT_EQ(correct, g.size());
}

TEST(Synthetic, RejectsBadConfig) {
    SyntheticConfig cfg;
    cfg.inner_radius = 1.5;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.noise = -1.0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.neighbors = cfg.n_points;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synthetic, DisconnectedGraphsAreRegenerated) {
    SyntheticConfig cfg;
    cfg.n_points = 40;
    cfg.neighbors = 1;
    cfg.max_regenerations = 0;
    std::vector<std::string> notes;
    // One neighbour per point almost never connects 40 points.
    EXPECT_THROW(generate_synthetic(cfg, &notes), GraphError);
    EXPECT_EQ(notes.size(), 1u);
}

namespace {

SampleGraph grid_points(const std::vector<Point>& pts) {
    std::vector<Sample> samples;
    for (const auto& p : pts) samples.push_back({p, 0, std::nullopt});
    return SampleGraph(std::move(samples), {});
}

} // namespace

TEST(Heatmap, EmptyQueriesGiveZeroCounts) {
    const SampleGraph g = grid_points({{0.0, 0.0}});
    const HeatMap h = accumulate_heatmap(g, {}, GridSpec{});
    EXPECT_EQ(h.counts.size(), 900u);
    EXPECT_EQ(h.total(), 0u);
}

TEST(Heatmap, SingleQueryLandsInItsCell) {
    const SampleGraph g = grid_points({{0.05, -1.45}});
    const std::vector<std::size_t> q{0};
    const HeatMap h = accumulate_heatmap(g, q, GridSpec{});
    // x: (0.05 + 1.5) / 0.1 = 15.5 -> 15; y: 0.05 / 0.1 -> 0
    EXPECT_EQ(h.at(15, 0), 1u);
    EXPECT_EQ(h.total(), 1u);
}

TEST(Heatmap, OrderDoesNotMatterAndOutsidePointsSpill) {
    const SampleGraph g = grid_points({{0.0, 0.0}, {1.0, 1.0}, {9.0, 0.0}, {-0.2, 0.4}});
    const std::vector<std::size_t> a{0, 1, 2, 3, 1};
    const std::vector<std::size_t> b{1, 3, 2, 1, 0};
    const HeatMap ha = accumulate_heatmap(g, a, GridSpec{});
    const HeatMap hb = accumulate_heatmap(g, b, GridSpec{});
    EXPECT_EQ(ha.counts, hb.counts);
    EXPECT_EQ(ha.spill, 1u);
    EXPECT_EQ(ha.total(), a.size());
}

TEST(Heatmap, RejectsBadGrids) {
    const SampleGraph g = grid_points({{0.0, 0.0}});
    GridSpec grid;
    grid.nx = 0;
    EXPECT_THROW(accumulate_heatmap(g, {}, grid), ConfigError);
    grid = {};
    grid.x_max = grid.x_min;
    EXPECT_THROW(accumulate_heatmap(g, {}, grid), ConfigError);
}
