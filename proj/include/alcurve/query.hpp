#pragma once

// Batch selection strategies over candidate sets of consecutive samples:
// random (RS), uncertainty (US), query-by-committee (QBC), propagated
// uncertainty (PPS) and density-weighted propagated uncertainty (DPS).

#include <cctype>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alcurve/classifier.hpp"
#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"
#include "alcurve/propagation.hpp"

namespace alcurve {

enum class StrategyKind { rs, us, qbc, pps, dps };

inline std::string_view to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::rs: return "rs";
    case StrategyKind::us: return "us";
    case StrategyKind::qbc: return "qbc";
    case StrategyKind::pps: return "pps";
    case StrategyKind::dps: return "dps";
    }
    return "?";
}

inline StrategyKind parse_strategy(std::string_view name) {
    std::string lower(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "rs" || lower == "random") return StrategyKind::rs;
    if (lower == "us" || lower == "uncertainty") return StrategyKind::us;
    if (lower == "qbc") return StrategyKind::qbc;
    if (lower == "pps") return StrategyKind::pps;
    if (lower == "dps") return StrategyKind::dps;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

inline constexpr std::size_t kMaxBatchSize = 3;

struct StrategyConfig {
    StrategyKind kind = StrategyKind::dps;
    std::size_t k = 2;
    PropagationConfig propagation;
    // Bandwidth of the global affinity; unset reuses the propagation sigma.
    std::optional<double> density_sigma;
    CommitteeConfig committee;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1 || k > kMaxBatchSize) throw ConfigError("batch size k must be in [1, 3]");
        propagation.validate();
        if (density_sigma && !(*density_sigma > 0.0)) throw ConfigError("density sigma must be positive");
        if (committee.members < 1) throw ConfigError("committee needs at least one member");
    }
};

struct DensityTerms {
    double global = 0.0;
    double labeled = 0.0;
    double internal = 0.0;
};

struct ScoreComponents {
    // Sum of the per-sample informativeness used by the strategy (classifier
    // entropy, propagated entropy or vote entropy).
    double entropy_sum = 0.0;
    std::optional<DensityTerms> density;
    std::optional<double> mu;
};

struct QueryBatch {
    Batch indices;
    double score = 0.0;
    std::optional<ScoreComponents> components;
    // Set when the batch is smaller than the configured k.
    bool fallback = false;
};

// sigma_G = sum_{i in E} sum_j w_ij (diagonal included),
// sigma_L = sum_{i in E} sum_{l in L} w_il,
// sigma_I = sum_{i in E} sum_{j in E, j != i} w_ij.
inline DensityTerms density_measures(std::span<const std::size_t> batch, const LabelSet& labeled,
                                     const AffinityMatrix& global) {
    if (batch.empty()) throw ConfigError("density measures need a nonempty batch");
    if (global.support != Support::global) throw ConfigError("density measures need a global affinity matrix");
    DensityTerms t;
    const auto& w = global.weights;
    for (std::size_t i : batch) {
        const auto r = static_cast<Eigen::Index>(i);
        t.global += w.row(r).sum();
        for (const auto& [l, y] : labeled.entries()) t.labeled += w(r, static_cast<Eigen::Index>(l));
        for (std::size_t j : batch) {
            if (j != i) t.internal += w(r, static_cast<Eigen::Index>(j));
        }
    }
    return t;
}

inline double mu(const DensityTerms& t) { return (t.global - t.labeled - t.internal) / t.global; }

inline double mu(std::span<const std::size_t> batch, const LabelSet& labeled, const AffinityMatrix& global) {
    return mu(density_measures(batch, labeled, global));
}

namespace detail {

// Argmax with ties going to the lexicographically smallest index tuple.
template <class Score>
QueryBatch argmax_batch(std::span<const Batch> candidates, Score score) {
    if (candidates.empty()) throw ConfigError("no candidate batches to select from");
    std::optional<QueryBatch> best;
    for (const auto& c : candidates) {
        QueryBatch q = score(c);
        if (!best || q.score > best->score || (q.score == best->score && q.indices < best->indices)) {
            best = std::move(q);
        }
    }
    return *best;
}

inline double sum_over(std::span<const std::size_t> batch, std::span<const double> values) {
    double s = 0.0;
    for (std::size_t i : batch) s += values[i];
    return s;
}

} // namespace detail

inline QueryBatch select_rs(std::span<const Batch> candidates, std::mt19937_64& rng) {
    if (candidates.empty()) throw ConfigError("no candidate batches to select from");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return QueryBatch{candidates[pick(rng)], 0.0, std::nullopt, false};
}

// Highest summed entropy of the classifier probabilities p(y=1|x).
inline QueryBatch select_us(std::span<const Batch> candidates, std::span<const double> positive) {
    std::vector<double> h(positive.size());
    for (std::size_t i = 0; i < positive.size(); ++i) h[i] = entropy(positive[i]);
    return detail::argmax_batch(candidates, [&](const Batch& b) {
        const double s = detail::sum_over(b, h);
        return QueryBatch{b, s, ScoreComponents{s, std::nullopt, std::nullopt}, false};
    });
}

// Highest summed vote entropy; `features` holds one row per sample.
inline QueryBatch select_qbc(std::span<const Batch> candidates, const Committee& committee,
                             const FeatureRows& features) {
    std::vector<double> disagreement(features.size(), -1.0);
    auto value = [&](std::size_t i) {
        if (disagreement[i] < 0.0) disagreement[i] = vote_disagreement(committee, features[i]);
        return disagreement[i];
    };
    return detail::argmax_batch(candidates, [&](const Batch& b) {
        double s = 0.0;
        for (std::size_t i : b) s += value(i);
        return QueryBatch{b, s, ScoreComponents{s, std::nullopt, std::nullopt}, false};
    });
}

// Highest summed propagated entropy.
inline QueryBatch select_pps(std::span<const Batch> candidates, const ProbabilityTable& propagated,
                             const LabelSet& labels) {
    const auto h = propagated_entropy(propagated, labels);
    return detail::argmax_batch(candidates, [&](const Batch& b) {
        const double s = detail::sum_over(b, h);
        return QueryBatch{b, s, ScoreComponents{s, std::nullopt, std::nullopt}, false};
    });
}

// argmax over candidates of mu(E) * sum_{i in E} H(p*_i).
inline QueryBatch select_dps(std::span<const Batch> candidates, const ProbabilityTable& propagated,
                             const LabelSet& labels, const AffinityMatrix& global) {
    if (global.support != Support::global) throw ConfigError("DPS needs a global affinity matrix");
    const auto h = propagated_entropy(propagated, labels);
    const auto& w = global.weights;
    const Eigen::VectorXd row_sums = w.rowwise().sum();
    // Per-sample similarity to the labeled set, shared by every candidate.
    Eigen::VectorXd to_labeled = Eigen::VectorXd::Zero(w.rows());
    for (const auto& [l, y] : labels.entries()) to_labeled += w.col(static_cast<Eigen::Index>(l));
    return detail::argmax_batch(candidates, [&](const Batch& b) {
        DensityTerms t;
        for (std::size_t i : b) {
            const auto r = static_cast<Eigen::Index>(i);
            t.global += row_sums(r);
            t.labeled += to_labeled(r);
            for (std::size_t j : b) {
                if (j != i) t.internal += w(r, static_cast<Eigen::Index>(j));
            }
        }
        const double m = mu(t);
        const double s = detail::sum_over(b, h);
        return QueryBatch{b, m * s, ScoreComponents{s, t, m}, false};
    });
}

} // namespace alcurve
