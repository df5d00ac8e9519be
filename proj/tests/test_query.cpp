#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "alcurve/query.hpp"

using namespace alcurve;

namespace {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

SampleGraph line_graph(const std::vector<double>& xs) {
    std::vector<Sample> s(xs.size());
    Edges e;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s[i].features = {xs[i]};
        if (i) e.emplace_back(i - 1, i);
    }
    return SampleGraph(std::move(s), e);
}

SampleGraph random_graph(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::bernoulli_distribution coin(0.25);
    std::vector<Sample> s(n);
    for (auto& x : s) x.features = {g(rng), g(rng)};
    Edges e;
    for (std::size_t i = 1; i < n; ++i) e.emplace_back(rng() % i, i);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (coin(rng)) e.emplace_back(i, j);
        }
    }
    return SampleGraph(std::move(s), e);
}

// Connected k-subsets of unlabeled samples by brute force over all
// combinations, each checked with a flood fill.
std::vector<Batch> all_batches(const SampleGraph& sg, std::size_t k, const LabelSet& labeled) {
    std::vector<Batch> out;
    const std::size_t n = sg.size();
    std::vector<std::size_t> pick(k);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
        if (depth == k) {
            std::set<std::size_t> reached{pick[0]};
            bool grew = true;
            while (grew) {
                grew = false;
                for (std::size_t u : pick) {
                    if (reached.count(u)) continue;
                    for (std::size_t v : reached) {
                        if (sg.adjacent(u, v)) {
                            reached.insert(u);
                            grew = true;
                            break;
                        }
                    }
                }
            }
            if (reached.size() == k) out.push_back(pick);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            if (labeled.contains(i)) continue;
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

double h(double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -p * std::log(p) - (1 - p) * std::log(1 - p); }

double w_oracle(const SampleGraph& sg, std::size_t i, std::size_t j, double sigma) {
    double d2 = 0.0;
    for (std::size_t f = 0; f < sg.feature_dim(); ++f) {
        const double diff = sg.sample(i).features[f] - sg.sample(j).features[f];
        d2 += diff * diff;
    }
    return std::exp(-d2 / (2 * sigma * sigma));
}

// sigma_G, sigma_L, sigma_I summed term by term from the features.
DensityTerms density_oracle(const SampleGraph& sg, const Batch& b, const LabelSet& l, double sigma) {
    DensityTerms t;
    for (std::size_t i : b) {
        for (std::size_t j = 0; j < sg.size(); ++j) t.global += w_oracle(sg, i, j, sigma);
        for (std::size_t j : l.indices()) t.labeled += w_oracle(sg, i, j, sigma);
        for (std::size_t j : b) {
            if (j != i) t.internal += w_oracle(sg, i, j, sigma);
        }
    }
    return t;
}

// Exhaustive argmax with the lexicographic tie rule.
template <class Score>
Batch brute_argmax(const std::vector<Batch>& cands, Score score) {
    Batch best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) {
        const double s = score(c);
        if (s > best_score || (s == best_score && c < best)) {
            best = c;
            best_score = s;
        }
    }
    return best;
}

} // namespace

TEST(Density, SingleSample) {
    const SampleGraph g = line_graph({0.0});
    const AffinityMatrix w = build_affinity(g, 1.0, Support::global);
    const Batch b{0};
    const DensityTerms t = density_measures(b, LabelSet(1), w);
    EXPECT_DOUBLE_EQ(t.global, 1.0);
    EXPECT_DOUBLE_EQ(t.labeled, 0.0);
    EXPECT_DOUBLE_EQ(t.internal, 0.0);
    EXPECT_DOUBLE_EQ(mu(b, LabelSet(1), w), 1.0);
}

TEST(Density, TwoIdenticalSamples) {
    const SampleGraph g = line_graph({0.3, 0.3});
    const AffinityMatrix w = build_affinity(g, 1.0, Support::global);
    const Batch b{0, 1};
    const DensityTerms t = density_measures(b, LabelSet(2), w);
    EXPECT_DOUBLE_EQ(t.global, 4.0);
    EXPECT_DOUBLE_EQ(t.labeled, 0.0);
    EXPECT_DOUBLE_EQ(t.internal, 2.0);
    EXPECT_DOUBLE_EQ(mu(t), 0.5);
}

TEST(Density, ThreeSamplesAgainstSummationOracle) {
    // Pairwise distances 1, 2 and 3.
    const SampleGraph g = line_graph({0.0, 1.0, 3.0});
    const double sigma = 0.8;
    const AffinityMatrix w = build_affinity(g, sigma, Support::global);
    LabelSet l(3);
    l.add(2, 1);
    const Batch b{0, 1};
    const DensityTerms t = density_measures(b, l, w);
    const double e1 = std::exp(-1.0 / (2 * sigma * sigma));
    const double e4 = std::exp(-4.0 / (2 * sigma * sigma));
    const double e9 = std::exp(-9.0 / (2 * sigma * sigma));
    EXPECT_NEAR(t.global, (1 + e1 + e9) + (e1 + 1 + e4), 1e-14);
    EXPECT_NEAR(t.labeled, e9 + e4, 1e-14);
    EXPECT_NEAR(t.internal, 2 * e1, 1e-14);
    EXPECT_NEAR(mu(t), (t.global - t.labeled - t.internal) / t.global, 1e-15);
}

TEST(Density, RequiresGlobalSupportAndNonemptyBatch) {
    const SampleGraph g = line_graph({0.0, 1.0});
    const AffinityMatrix local = build_affinity(g, 1.0, Support::neighbors_only);
    const Batch b{0};
    EXPECT_THROW(density_measures(b, LabelSet(2), local), ConfigError);
    const AffinityMatrix w = build_affinity(g, 1.0, Support::global);
    EXPECT_THROW(density_measures(Batch{}, LabelSet(2), w), ConfigError);
}

TEST(Density, MuBoundedAndDropsWithDuplicateLabel) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const SampleGraph g = random_graph(15, rng);
        const AffinityMatrix w = build_affinity(g, 1.0, Support::global);
        for (const auto& b : all_batches(g, 2, LabelSet(15))) EXPECT_LE(mu(b, LabelSet(15), w), 1.0);
    }
    // Sample 2 duplicates batch member 0.
    const SampleGraph g = line_graph({0.0, 0.5, 0.0, 4.0});
    const AffinityMatrix w = build_affinity(g, 1.0, Support::global);
    const Batch b{0, 1};
    LabelSet none(4);
    LabelSet dup(4);
    dup.add(2, 0);
    EXPECT_EQ(density_measures(b, none, w).global, density_measures(b, dup, w).global);
    EXPECT_LT(mu(b, dup, w), mu(b, none, w));
}

TEST(SelectRs, SingleCandidateAndDeterminism) {
    std::mt19937_64 rng(1);
    const std::vector<Batch> one{{4, 5}};
    EXPECT_EQ(select_rs(one, rng).indices, (Batch{4, 5}));

    std::vector<Batch> many;
    for (std::size_t i = 0; i < 10; ++i) many.push_back({i});
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(select_rs(many, a).indices, select_rs(many, b).indices);
}

TEST(SelectRs, UniformWithinBinomialBounds) {
    std::vector<Batch> cands;
    for (std::size_t i = 0; i < 8; ++i) cands.push_back({i});
    std::mt19937_64 rng(123);
    std::map<std::size_t, int> freq;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++freq[select_rs(cands, rng).indices[0]];
    const double p = 1.0 / 8.0;
    const double mean = draws * p;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(freq[i], mean, 3 * sd) << "candidate " << i;
}

TEST(SelectUs, PrefersMaximumEntropyPair) {
    const std::vector<Batch> cands{{0, 1}, {1, 2}, {2, 3}};
    const std::vector<double> p{0.01, 0.99, 0.5, 0.5};
    const QueryBatch q = select_us(cands, p);
    EXPECT_EQ(q.indices, (Batch{2, 3}));
    EXPECT_NEAR(q.score, 2 * std::log(2.0), 1e-15);
}

TEST(SelectUs, TiesGoToLowestTuple) {
    const std::vector<Batch> cands{{2, 3}, {0, 3}, {1, 2}};
    const std::vector<double> p(4, 0.3);
    EXPECT_EQ(select_us(cands, p).indices, (Batch{0, 3}));
}

TEST(SelectUs, InvariantUnderScoreRescaling) {
    // Raising every probability's distance from 0.5 keeps the entropy order.
    const std::vector<Batch> cands{{0}, {1}, {2}, {3}};
    const std::vector<double> p{0.1, 0.35, 0.8, 0.6};
    std::vector<double> q;
    for (double v : p) q.push_back(0.5 + 0.5 * (v - 0.5));
    EXPECT_EQ(select_us(cands, p).indices, select_us(cands, q).indices);
}

TEST(SelectPps, ZeroAlphaCoincidesWithUs) {
    std::mt19937_64 rng(3);
    const SampleGraph g = random_graph(20, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(20);
    for (auto& v : p) v = u(rng);
    const Eigen::MatrixXd s = normalize_symmetric(build_affinity(g, 1.0, Support::neighbors_only));
    const ProbabilityTable prop = propagate_closed_form(probability_table(p), s, 1e-12);
    const auto cands = candidate_batches(g, 2, LabelSet(20));
    EXPECT_EQ(select_pps(cands, prop, LabelSet(20)).indices, select_us(cands, p).indices);
}

TEST(SelectPps, ContradictedSampleIsSelected) {
    // Sample 2 is confidently positive while its whole neighbourhood is
    // confidently negative; sample 4 is the classifier's most uncertain one.
    std::vector<Sample> s(5);
    for (auto& x : s) x.features = {0.0};
    const SampleGraph g(s, Edges{{0, 2}, {1, 2}, {2, 3}, {3, 4}});
    const std::vector<double> p{0.02, 0.02, 0.97, 0.02, 0.3};
    const Eigen::MatrixXd sm = normalize_symmetric(build_affinity(g, 1.0, Support::neighbors_only));
    const ProbabilityTable iterated = propagate_iterative(probability_table(p), sm, 0.9, 1e-14, 100000);
    const ProbabilityTable closed = propagate_closed_form(probability_table(p), sm, 0.9);
    const auto cands = candidate_batches(g, 1, LabelSet(5));

    EXPECT_EQ(select_us(cands, p).indices, Batch{4});
    const Batch oracle = brute_argmax(cands, [&](const Batch& b) { return h(iterated(b[0], 1)); });
    EXPECT_EQ(oracle, Batch{2});
    EXPECT_EQ(select_pps(cands, closed, LabelSet(5)).indices, oracle);
    EXPECT_GT(h(iterated(2, 1)), h(p[2]));
}

TEST(SelectDps, OrthogonalFeaturesCoincideWithPps) {
    // Far-apart one-hot features make every off-diagonal affinity vanish, so
    // mu = 1 for every batch.
    const std::size_t n = 8;
    std::vector<Sample> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i].features.assign(n, 0.0);
        s[i].features[i] = 100.0;
    }
    Edges e;
    for (std::size_t i = 1; i < n; ++i) e.emplace_back(i - 1, i);
    e.emplace_back(0, 4);
    const SampleGraph g(std::move(s), e);
    const AffinityMatrix global = build_affinity(g, 1.0, Support::global);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProbabilityTable table(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = u(rng);
        table(static_cast<Eigen::Index>(i), 0) = 1 - p;
        table(static_cast<Eigen::Index>(i), 1) = p;
    }
    const auto cands = candidate_batches(g, 2, LabelSet(n));
    const QueryBatch d = select_dps(cands, table, LabelSet(n), global);
    EXPECT_EQ(d.indices, select_pps(cands, table, LabelSet(n)).indices);
    EXPECT_DOUBLE_EQ(*d.components->mu, 1.0);
}

TEST(SelectDps, AvoidsNearDuplicateOfLabeled) {
    // Samples 0,1 sit next to labeled sample 4 and carry the most entropy;
    // samples 2,3 are far away and slightly less uncertain. Only the pairs
    // {0,1} and {2,3} are connected.
    std::vector<Sample> s(5);
    const double xs[] = {0.05, 0.1, 6.0, 6.3, 0.0};
    for (std::size_t i = 0; i < 5; ++i) s[i].features = {xs[i]};
    const SampleGraph g(std::move(s), Edges{{0, 1}, {2, 3}, {0, 4}});
    const AffinityMatrix global = build_affinity(g, 1.0, Support::global);
    LabelSet l(5);
    l.add(4, 1);
    const std::vector<double> p{0.5, 0.5, 0.4, 0.4, 1.0};
    const ProbabilityTable table = probability_table(p);
    const auto cands = candidate_batches(g, 2, l);
    ASSERT_EQ(cands, (std::vector<Batch>{{0, 1}, {2, 3}}));
    EXPECT_EQ(select_pps(cands, table, l).indices, (Batch{0, 1}));
    const Batch oracle = brute_argmax(cands, [&](const Batch& b) {
        const DensityTerms t = density_oracle(g, b, l, 1.0);
        double hs = 0.0;
        for (std::size_t i : b) hs += h(p[i]);
        return (t.global - t.labeled - t.internal) / t.global * hs;
    });
    EXPECT_EQ(oracle, (Batch{2, 3}));
    const QueryBatch q = select_dps(cands, table, l, global);
    EXPECT_EQ(q.indices, oracle);
    ASSERT_TRUE(q.components && q.components->density && q.components->mu);
    const DensityTerms t = density_oracle(g, q.indices, l, 1.0);
    EXPECT_NEAR(q.components->density->global, t.global, 1e-12);
    EXPECT_NEAR(q.components->density->labeled, t.labeled, 1e-12);
    EXPECT_NEAR(q.components->density->internal, t.internal, 1e-12);
}

TEST(SelectDps, MuStaysPositiveForDuplicates) {
    // Every sample duplicates the labeled ones; the batch's own diagonal
    // term keeps mu above zero: (4 - 2) / 4.
    const SampleGraph g = line_graph({0.0, 0.0, 0.0, 0.0});
    const AffinityMatrix global = build_affinity(g, 1.0, Support::global);
    LabelSet l(4);
    l.add(0, 0);
    l.add(3, 1);
    const std::vector<double> p{0.0, 0.5, 0.5, 1.0};
    const auto cands = candidate_batches(g, 1, l);
    const QueryBatch q = select_dps(cands, probability_table(p), l, global);
    EXPECT_DOUBLE_EQ(*q.components->mu, 0.5);
    EXPECT_DOUBLE_EQ(q.score, 0.5 * std::log(2.0));
    EXPECT_EQ(q.indices, Batch{1});
}

TEST(Selectors, AgreeWithExhaustiveOracles) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 4 + rng() % 27;
        const SampleGraph g = random_graph(n, rng);
        LabelSet l(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (u(rng) < 0.2) l.add(i, static_cast<int>(rng() % 2));
        }
        std::vector<double> p(n);
        for (auto& v : p) v = u(rng);
        const double sigma = 0.5 + u(rng);
        const AffinityMatrix global = build_affinity(g, sigma, Support::global);
        const Eigen::MatrixXd s = normalize_symmetric(build_affinity(g, sigma, Support::neighbors_only));
        const ProbabilityTable prior = clamp_labels(probability_table(p), l);
        const ProbabilityTable prop = propagate_closed_form(prior, s, 0.9);
        const ProbabilityTable iter = propagate_iterative(prior, s, 0.9, 1e-13, 100000);

        FeatureRows labeled_rows;
        std::vector<int> labeled_y;
        for (const auto& [i, y] : l.entries()) {
            labeled_rows.push_back(g.sample(i).features);
            labeled_y.push_back(y);
        }
        std::optional<Committee> committee;
        if (l.count(0) && l.count(1)) committee = train_committee(labeled_rows, labeled_y, 7, rng());

        for (std::size_t k = 1; k <= 3; ++k) {
            const auto oracle_cands = all_batches(g, k, l);
            const auto cands = candidate_batches(g, k, l);
            ASSERT_EQ(cands, oracle_cands);
            if (cands.empty()) continue;

            EXPECT_EQ(select_us(cands, p).indices, brute_argmax(oracle_cands, [&](const Batch& b) {
                          double s = 0.0;
                          for (std::size_t i : b) s += h(p[i]);
                          return s;
                      }));

            auto pps_score = [&](const Batch& b) {
                double s = 0.0;
                for (std::size_t i : b) s += h(iter(static_cast<Eigen::Index>(i), 1));
                return s;
            };
            const QueryBatch pps = select_pps(cands, prop, l);
            // Compare scores with a tolerance: the oracle propagates by
            // iteration, so exact ties can differ in the last bits.
            EXPECT_NEAR(pps.score, pps_score(brute_argmax(oracle_cands, pps_score)), 1e-6);

            auto dps_score = [&](const Batch& b) {
                const DensityTerms t = density_oracle(g, b, l, sigma);
                return (t.global - t.labeled - t.internal) / t.global * pps_score(b);
            };
            const QueryBatch dps = select_dps(cands, prop, l, global);
            EXPECT_NEAR(dps.score, dps_score(brute_argmax(oracle_cands, dps_score)), 1e-6);
            EXPECT_NEAR(dps.score, dps_score(dps.indices), 1e-6);

            if (committee) {
                auto qbc_score = [&](const Batch& b) {
                    double s = 0.0;
                    const double m = static_cast<double>(committee->members().size());
                    for (std::size_t i : b) {
                        const double v = static_cast<double>(committee->positive_votes(g.sample(i).features));
                        double e = 0.0;
                        for (double c : {v, m - v}) {
                            if (c > 0) e -= c / m * std::log(c / m);
                        }
                        s += e;
                    }
                    return s;
                };
                const QueryBatch qbc = select_qbc(cands, *committee, g.feature_rows());
                const Batch want = brute_argmax(oracle_cands, qbc_score);
                EXPECT_EQ(qbc.indices, want);
            }
        }
    }
}

TEST(StrategyConfig, Validation) {
    StrategyConfig c;
    EXPECT_NO_THROW(c.validate());
    c.k = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c.k = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_EQ(parse_strategy("DPS"), StrategyKind::dps);
    EXPECT_EQ(to_string(StrategyKind::qbc), "qbc");
    EXPECT_THROW(parse_strategy("eer"), ConfigError);
}
