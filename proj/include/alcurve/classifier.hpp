#pragma once

// Gradient boosted regression trees under the exponential loss, and a bagged
// committee of classification trees used by query-by-committee.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"

namespace alcurve {

struct BoostConfig {
    std::size_t n_learners = 50;
    std::size_t max_depth = 2;
    double shrinkage = 0.06;
    double row_subsample = 0.5;
    // Unset means min(50, d).
    std::optional<std::size_t> features_per_split;

    void validate() const {
        if (n_learners < 1) throw ConfigError("n_learners must be at least 1");
        if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
        if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw ConfigError("shrinkage must be in (0, 1]");
        if (!(row_subsample > 0.0 && row_subsample <= 1.0)) throw ConfigError("row_subsample must be in (0, 1]");
        if (features_per_split && *features_per_split < 1) throw ConfigError("features_per_split must be positive");
    }

    std::size_t split_features(std::size_t dim) const {
        return std::min(dim, features_per_split.value_or(std::min<std::size_t>(50, dim)));
    }
};

struct TreeNode {
    // -1 marks a leaf.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

// Axis-aligned binary tree; x[feature] <= threshold goes left.
class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double evaluate(std::span<const double> x) const {
        std::size_t n = 0;
        while (nodes_[n].feature >= 0) {
            const auto& node = nodes_[n];
            n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                    : node.right);
        }
        return nodes_[n].value;
    }

    std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

private:
    std::size_t depth_from(std::size_t n) const {
        const auto& node = nodes_[n];
        if (node.feature < 0) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(node.left)),
                            depth_from(static_cast<std::size_t>(node.right)));
    }

    std::vector<TreeNode> nodes_;
};

namespace detail {

// Column-major copy of the training rows so split search scans one feature
// contiguously.
class ColumnStore {
public:
    ColumnStore(const FeatureRows& rows, std::size_t dim) : n_(rows.size()), d_(dim), data_(rows.size() * dim) {
        for (std::size_t i = 0; i < n_; ++i) {
            if (rows[i].size() != d_) throw ModelError("training rows have inconsistent dimension");
            for (std::size_t f = 0; f < d_; ++f) data_[f * n_ + i] = rows[i][f];
        }
    }
    double at(std::size_t row, std::size_t feature) const { return data_[feature * n_ + row]; }
    std::size_t rows() const noexcept { return n_; }
    std::size_t dim() const noexcept { return d_; }

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<double> data_;
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Sorted ascending, so scanning in order gives the lowest-feature tie rule.
inline std::vector<std::size_t> pick_features(std::size_t dim, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::size_t> all(dim);
    std::iota(all.begin(), all.end(), 0);
    if (count < dim) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, dim - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        all.resize(count);
        std::sort(all.begin(), all.end());
    }
    return all;
}

// Best split over `features` by a caller-supplied impurity gain. `Stats`
// accumulates per-side statistics; ties keep the earliest (feature,
// threshold) in scan order.
template <class Stats, class Gain>
SplitChoice best_split(const ColumnStore& X, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features, const std::vector<Stats>& row_stats, Gain gain) {
    SplitChoice best;
    std::vector<std::size_t> order(rows.begin(), rows.end());
    Stats total{};
    for (std::size_t r : rows) total += row_stats[r];
    for (std::size_t f : features) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = X.at(a, f);
            const double vb = X.at(b, f);
            return va < vb || (va == vb && a < b);
        });
        Stats left{};
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            left += row_stats[order[i]];
            const double v = X.at(order[i], f);
            const double next = X.at(order[i + 1], f);
            if (!(v < next)) continue;
            const double g = gain(left, total - left, total);
            if (g > best.gain) {
                best.feature = static_cast<int>(f);
                best.threshold = v + 0.5 * (next - v);
                if (!(best.threshold < next)) best.threshold = v;
                best.gain = g;
            }
        }
    }
    return best;
}

struct ResidualStats {
    double count = 0.0;
    double residual = 0.0;
    double weight = 0.0;

    ResidualStats& operator+=(const ResidualStats& o) {
        count += o.count;
        residual += o.residual;
        weight += o.weight;
        return *this;
    }
    friend ResidualStats operator-(ResidualStats a, const ResidualStats& b) {
        a.count -= b.count;
        a.residual -= b.residual;
        a.weight -= b.weight;
        return a;
    }
};

struct ClassStats {
    double count = 0.0;
    double positives = 0.0;

    ClassStats& operator+=(const ClassStats& o) {
        count += o.count;
        positives += o.positives;
        return *this;
    }
    friend ClassStats operator-(ClassStats a, const ClassStats& b) {
        a.count -= b.count;
        a.positives -= b.positives;
        return a;
    }
};

inline double gini(const ClassStats& s) {
    if (s.count <= 0.0) return 0.0;
    const double p = s.positives / s.count;
    return 2.0 * p * (1.0 - p);
}

} // namespace detail

inline constexpr double kLeafClip = 4.0;

class BoostedModel {
public:
    BoostedModel() = default;
    BoostedModel(std::vector<DecisionTree> trees, double shrinkage, double base_score, std::size_t feature_dim)
        : trees_(std::move(trees)), shrinkage_(shrinkage), base_score_(base_score), feature_dim_(feature_dim) {}

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    double shrinkage() const noexcept { return shrinkage_; }
    double base_score() const noexcept { return base_score_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }

private:
    std::vector<DecisionTree> trees_;
    double shrinkage_ = 1.0;
    double base_score_ = 0.0;
    std::size_t feature_dim_ = 0;
};

// Raw boosting score F(x).
inline double predict_score(const BoostedModel& m, std::span<const double> x) {
    if (x.size() != m.feature_dim()) {
        throw ModelError("feature vector has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(m.feature_dim()));
    }
    double f = 0.0;
    for (const auto& t : m.trees()) f += t.evaluate(x);
    return m.base_score() + m.shrinkage() * f;
}

// Logistic correction for exponential-loss boosting: p(y=1|x) = 1/(1+exp(-2F)).
inline double score_to_probability(double score) {
    if (score >= 0.0) return 1.0 / (1.0 + std::exp(-2.0 * score));
    const double e = std::exp(2.0 * score);
    return e / (1.0 + e);
}

inline double predict_probability(const BoostedModel& m, std::span<const double> x) {
    return score_to_probability(predict_score(m, x));
}

inline std::vector<double> predict_probabilities(const BoostedModel& m, const FeatureRows& rows) {
    std::vector<double> p;
    p.reserve(rows.size());
    for (const auto& x : rows) p.push_back(predict_probability(m, x));
    return p;
}

// Mean exponential loss over the given data, labels in {0,1}.
inline double exponential_loss(const BoostedModel& m, const FeatureRows& rows, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double y = labels[i] == 1 ? 1.0 : -1.0;
        total += std::exp(-y * predict_score(m, rows[i]));
    }
    return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

namespace detail {

inline void check_training_data(const FeatureRows& rows, std::span<const int> labels) {
    if (rows.size() != labels.size()) throw ModelError("feature and label counts differ");
    if (rows.empty()) throw ModelError("no training data");
    bool has0 = false;
    bool has1 = false;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ModelError("labels must be 0 or 1");
        (y == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw ModelError("degenerate training set: both classes are required");
}

class BoostTreeBuilder {
public:
    BoostTreeBuilder(const ColumnStore& X, std::span<const double> signs, std::span<const double> weights,
                     const BoostConfig& cfg, std::mt19937_64& rng)
        : X_(X), signs_(signs), cfg_(cfg), rng_(rng), stats_(X.rows()) {
        for (std::size_t i = 0; i < X.rows(); ++i) {
            // Negative gradient of exp(-yF) is y*exp(-yF).
            stats_[i] = ResidualStats{1.0, signs[i] * weights[i], weights[i]};
        }
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        nodes_.clear();
        grow(std::move(rows), 0);
        return DecisionTree(std::move(nodes_));
    }

private:
    int grow(std::vector<std::size_t> rows, std::size_t depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        SplitChoice split;
        if (depth < cfg_.max_depth && rows.size() >= 2) {
            const auto features = pick_features(X_.dim(), cfg_.split_features(X_.dim()), rng_);
            split = best_split(X_, rows, features, stats_,
                               [](const ResidualStats& l, const ResidualStats& r, const ResidualStats& t) {
                                   if (l.count <= 0.0 || r.count <= 0.0) return 0.0;
                                   return l.residual * l.residual / l.count + r.residual * r.residual / r.count -
                                          t.residual * t.residual / t.count;
                               });
        }
        if (split.feature < 0) {
            nodes_[static_cast<std::size_t>(id)].value = newton_leaf(rows);
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : rows) {
            (X_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // One Newton step on the exponential loss: sum(y w) / sum(w).
    double newton_leaf(std::span<const std::size_t> rows) const {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t r : rows) {
            num += stats_[r].residual;
            den += stats_[r].weight;
        }
        if (!(den > 0.0)) return 0.0;
        return std::clamp(num / den, -kLeafClip, kLeafClip);
    }

    const ColumnStore& X_;
    std::span<const double> signs_;
    const BoostConfig& cfg_;
    std::mt19937_64& rng_;
    std::vector<ResidualStats> stats_;
    std::vector<TreeNode> nodes_;
};

} // namespace detail

// Stagewise exponential-loss boosting. Deterministic for a given seed.
inline BoostedModel train_boosted(const FeatureRows& rows, std::span<const int> labels, const BoostConfig& cfg,
                                  std::uint64_t seed) {
    cfg.validate();
    detail::check_training_data(rows, labels);
    const std::size_t n = rows.size();
    const std::size_t dim = rows.front().size();
    const detail::ColumnStore X(rows, dim);

    std::vector<double> signs(n);
    double positives = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        signs[i] = labels[i] == 1 ? 1.0 : -1.0;
        positives += labels[i] == 1 ? 1.0 : 0.0;
    }
    const double base = 0.5 * std::log(positives / (static_cast<double>(n) - positives));

    std::vector<double> scores(n, base);
    std::vector<double> weights(n);
    std::vector<DecisionTree> trees;
    trees.reserve(cfg.n_learners);
    std::mt19937_64 rng(seed);
    const auto subsample =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.row_subsample * static_cast<double>(n))));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    for (std::size_t stage = 0; stage < cfg.n_learners; ++stage) {
        for (std::size_t i = 0; i < n; ++i) weights[i] = std::exp(-signs[i] * scores[i]);
        std::vector<std::size_t> rows_used;
        if (subsample < n) {
            std::vector<std::size_t> perm = all;
            for (std::size_t i = 0; i < subsample; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(perm[i], perm[pick(rng)]);
            }
            rows_used.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(subsample));
            std::sort(rows_used.begin(), rows_used.end());
        } else {
            rows_used = all;
        }
        detail::BoostTreeBuilder builder(X, signs, weights, cfg, rng);
        DecisionTree tree = builder.build(std::move(rows_used));
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < dim; ++f) x[f] = X.at(i, f);
            scores[i] += cfg.shrinkage * tree.evaluate(x);
        }
        trees.push_back(std::move(tree));
    }
    return BoostedModel(std::move(trees), cfg.shrinkage, base, dim);
}

// ---------------------------------------------------------------------------
// Committee

struct CommitteeConfig {
    std::size_t members = 25;
    // Classification trees grow until pure or this depth.
    std::size_t max_depth = 32;
    // Unset means max(1, round(sqrt(d))).
    std::optional<std::size_t> features_per_split;

    std::size_t split_features(std::size_t dim) const {
        if (features_per_split) return std::clamp<std::size_t>(*features_per_split, 1, dim);
        return std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim)))), 1, dim);
    }
};

class Committee {
public:
    Committee() = default;
    Committee(std::vector<DecisionTree> members, std::size_t feature_dim)
        : members_(std::move(members)), feature_dim_(feature_dim) {}

    const std::vector<DecisionTree>& members() const noexcept { return members_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }

    // Number of members voting class 1.
    std::size_t positive_votes(std::span<const double> x) const {
        if (x.size() != feature_dim_) throw ModelError("feature vector dimension does not match committee");
        std::size_t votes = 0;
        for (const auto& t : members_) votes += t.evaluate(x) > 0.5 ? 1 : 0;
        return votes;
    }

private:
    std::vector<DecisionTree> members_;
    std::size_t feature_dim_ = 0;
};

namespace detail {

class GiniTreeBuilder {
public:
    GiniTreeBuilder(const ColumnStore& X, std::span<const int> labels, const CommitteeConfig& cfg,
                    std::mt19937_64& rng)
        : X_(X), cfg_(cfg), rng_(rng), stats_(X.rows()) {
        for (std::size_t i = 0; i < X.rows(); ++i) stats_[i] = ClassStats{0.0, 0.0};
        labels_ = labels;
    }

    // `rows` may repeat indices (bootstrap); repeats carry extra weight.
    DecisionTree build(const std::vector<std::size_t>& rows) {
        nodes_.clear();
        std::vector<double> counts(X_.rows(), 0.0);
        for (std::size_t r : rows) counts[r] += 1.0;
        for (std::size_t i = 0; i < X_.rows(); ++i) {
            stats_[i] = ClassStats{counts[i], labels_[i] == 1 ? counts[i] : 0.0};
        }
        std::vector<std::size_t> distinct;
        for (std::size_t i = 0; i < X_.rows(); ++i) {
            if (counts[i] > 0.0) distinct.push_back(i);
        }
        grow(std::move(distinct), 0);
        return DecisionTree(std::move(nodes_));
    }

private:
    int grow(std::vector<std::size_t> rows, std::size_t depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        ClassStats total{};
        for (std::size_t r : rows) total += stats_[r];
        SplitChoice split;
        const bool pure = total.positives == 0.0 || total.positives == total.count;
        if (!pure && depth < cfg_.max_depth && rows.size() >= 2) {
            const auto features = pick_features(X_.dim(), cfg_.split_features(X_.dim()), rng_);
            split = best_split(X_, rows, features, stats_,
                               [](const ClassStats& l, const ClassStats& r, const ClassStats& t) {
                                   if (l.count <= 0.0 || r.count <= 0.0) return 0.0;
                                   return t.count * gini(t) - l.count * gini(l) - r.count * gini(r);
                               });
        }
        if (split.feature < 0) {
            // Majority vote; an exact tie votes 0.
            nodes_[static_cast<std::size_t>(id)].value = total.positives * 2.0 > total.count ? 1.0 : 0.0;
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : rows) {
            (X_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        }
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const ColumnStore& X_;
    std::span<const int> labels_;
    const CommitteeConfig& cfg_;
    std::mt19937_64& rng_;
    std::vector<ClassStats> stats_;
    std::vector<TreeNode> nodes_;
};

} // namespace detail

// Bagged classification trees, each on a bootstrap resample with a random
// feature subset per split. Deterministic for a given seed.
inline Committee train_committee(const FeatureRows& rows, std::span<const int> labels, const CommitteeConfig& cfg,
                                 std::uint64_t seed) {
    if (cfg.members < 1) throw ConfigError("committee needs at least one member");
    detail::check_training_data(rows, labels);
    const std::size_t n = rows.size();
    const std::size_t dim = rows.front().size();
    const detail::ColumnStore X(rows, dim);
    std::mt19937_64 rng(seed);
    detail::GiniTreeBuilder builder(X, labels, cfg, rng);
    std::vector<DecisionTree> members;
    members.reserve(cfg.members);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    for (std::size_t m = 0; m < cfg.members; ++m) {
        std::vector<std::size_t> bootstrap(n);
        for (auto& r : bootstrap) r = draw(rng);
        members.push_back(builder.build(bootstrap));
    }
    return Committee(std::move(members), dim);
}

inline Committee train_committee(const FeatureRows& rows, std::span<const int> labels, std::size_t members,
                                 std::uint64_t seed) {
    CommitteeConfig cfg;
    cfg.members = members;
    return train_committee(rows, labels, cfg, seed);
}

// Vote entropy -sum_y (V_y/M) ln(V_y/M) with 0 ln 0 = 0.
inline double vote_entropy(std::size_t positive_votes, std::size_t members) {
    if (members == 0) return 0.0;
    const double m = static_cast<double>(members);
    double h = 0.0;
    for (double v : {static_cast<double>(positive_votes), m - static_cast<double>(positive_votes)}) {
        if (v > 0.0) h -= (v / m) * std::log(v / m);
    }
    return h;
}

inline double vote_disagreement(const Committee& c, std::span<const double> x) {
    return vote_entropy(c.positive_votes(x), c.members().size());
}

// ---------------------------------------------------------------------------
// Model text format
//
//   alcurve-boosted-model 1
//   feature_dim <d>
//   base_score <real>
//   shrinkage <real>
//   trees <count>
//   tree <node count>
//   <feature> <threshold> <left> <right> <value>     (one line per node)

inline constexpr const char* kModelMagic = "alcurve-boosted-model";
inline constexpr int kModelVersion = 1;

inline void write_model(std::ostream& out, const BoostedModel& m) {
    out << std::setprecision(17);
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "feature_dim " << m.feature_dim() << '\n';
    out << "base_score " << m.base_score() << '\n';
    out << "shrinkage " << m.shrinkage() << '\n';
    out << "trees " << m.trees().size() << '\n';
    for (const auto& t : m.trees()) {
        out << "tree " << t.nodes().size() << '\n';
        for (const auto& n : t.nodes()) {
            out << n.feature << ' ' << n.threshold << ' ' << n.left << ' ' << n.right << ' ' << n.value << '\n';
        }
    }
}

inline std::string serialize_model(const BoostedModel& m) {
    std::ostringstream out;
    write_model(out, m);
    return out.str();
}

inline BoostedModel read_model(std::istream& in) {
    auto expect = [&](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key) throw ModelError("model file: expected '" + key + "'");
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kModelMagic) throw ModelError("not an alcurve model file");
    if (version != kModelVersion) throw ModelError("unsupported model version " + std::to_string(version));
    std::size_t dim = 0;
    double base = 0.0;
    double shrinkage = 0.0;
    std::size_t count = 0;
    expect("feature_dim");
    in >> dim;
    expect("base_score");
    in >> base;
    expect("shrinkage");
    in >> shrinkage;
    expect("trees");
    in >> count;
    if (!in) throw ModelError("model file: truncated header");
    std::vector<DecisionTree> trees;
    trees.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        std::size_t nodes = 0;
        expect("tree");
        in >> nodes;
        std::vector<TreeNode> tree(nodes);
        for (auto& n : tree) in >> n.feature >> n.threshold >> n.left >> n.right >> n.value;
        if (!in || nodes == 0) throw ModelError("model file: truncated tree");
        for (const auto& n : tree) {
            if (n.feature >= 0 && (static_cast<std::size_t>(n.feature) >= dim || n.left < 0 || n.right < 0 ||
                                   static_cast<std::size_t>(n.left) >= nodes ||
                                   static_cast<std::size_t>(n.right) >= nodes)) {
                throw ModelError("model file: invalid node reference");
            }
        }
        trees.emplace_back(std::move(tree));
    }
    return BoostedModel(std::move(trees), shrinkage, base, dim);
}

inline BoostedModel deserialize_model(const std::string& text) {
    std::istringstream in(text);
    return read_model(in);
}

} // namespace alcurve
