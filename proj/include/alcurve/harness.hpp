#pragma once

// Simulated active-learning experiments: a ground-truth oracle stands in for
// the annotator, each trial grows a labeled set from a small seed set, and
// learning curves are aggregated over trials.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "alcurve/classifier.hpp"
#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"
#include "alcurve/propagation.hpp"
#include "alcurve/query.hpp"
#include "alcurve/synthetic.hpp"

namespace alcurve {

enum class Metric { accuracy, voc };

inline std::string_view to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "voc"; }

inline Metric parse_metric(std::string_view name) {
    if (name == "accuracy") return Metric::accuracy;
    if (name == "voc") return Metric::voc;
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

struct ExperimentConfig {
    std::vector<StrategyKind> strategies{StrategyKind::rs, StrategyKind::us, StrategyKind::qbc, StrategyKind::pps,
                                         StrategyKind::dps};
    std::size_t seed_per_class = 4;
    std::size_t k = 2;
    std::size_t budget = 100;
    std::size_t trials = 30;
    Metric metric = Metric::accuracy;
    std::uint64_t master_seed = 1;
    // Held-out stratified evaluation split, fixed per dataset by split_seed.
    double eval_fraction = 0.3;
    std::uint64_t split_seed = 0;
    BoostConfig boost;
    PropagationConfig propagation;
    std::optional<double> density_sigma;
    CommitteeConfig committee;
    // 0 means std::thread::hardware_concurrency().
    std::size_t threads = 0;

    void validate() const {
        if (budget <= 2 * seed_per_class) throw ConfigError("budget must exceed the seed-set size");
        validate_except_budget();
    }

    // A single trial also accepts budget == seed-set size (no queries).
    void validate_except_budget() const {
        if (strategies.empty()) throw ConfigError("at least one strategy is required");
        if (seed_per_class < 1) throw ConfigError("seed_per_class must be positive");
        if (trials < 1) throw ConfigError("trials must be at least 1");
        if (k < 1 || k > kMaxBatchSize) throw ConfigError("batch size k must be in [1, 3]");
        if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must be in (0, 1)");
        boost.validate();
        propagation.validate();
        if (density_sigma && !(*density_sigma > 0.0)) throw ConfigError("density sigma must be positive");
        if (committee.members < 1) throw ConfigError("committee needs at least one member");
    }

    std::size_t seed_size() const { return 2 * seed_per_class; }
};

// ---------------------------------------------------------------------------
// Metrics (class 1 when p >= 0.5)

inline double accuracy(std::span<const double> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw ConfigError("prediction and label counts differ");
    if (labels.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += ((predictions[i] >= 0.5 ? 1 : 0) == labels[i]) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// TP / (TP + FP + FN); 0 when the denominator is 0.
inline double voc_score(std::span<const double> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw ConfigError("prediction and label counts differ");
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = predictions[i] >= 0.5;
        if (predicted && labels[i] == 1) ++tp;
        if (predicted && labels[i] == 0) ++fp;
        if (!predicted && labels[i] == 1) ++fn;
    }
    const std::size_t denom = tp + fp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

inline double evaluate_metric(Metric m, std::span<const double> predictions, std::span<const int> labels) {
    return m == Metric::accuracy ? accuracy(predictions, labels) : voc_score(predictions, labels);
}

// ---------------------------------------------------------------------------
// Dataset split

struct Dataset {
    // Training / query pool with its own adjacency (induced subgraph).
    SampleGraph pool;
    FeatureRows pool_features;
    std::vector<int> pool_labels;
    FeatureRows eval_features;
    std::vector<int> eval_labels;
    // Original sample index of every pool / eval sample.
    std::vector<std::size_t> pool_ids;
    std::vector<std::size_t> eval_ids;
};

// Stratified split; round(eval_fraction * class count) of each class goes to
// evaluation.
inline Dataset split_dataset(const SampleGraph& data, double eval_fraction, std::uint64_t split_seed) {
    if (!data.fully_labeled()) throw GraphError("experiments need a ground-truth label on every sample");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must be in (0, 1)");
    std::mt19937_64 rng(split_seed);
    std::vector<bool> is_eval(data.size(), false);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (*data.sample(i).gt_label == cls) members.push_back(i);
        }
        std::shuffle(members.begin(), members.end(), rng);
        const auto take = static_cast<std::size_t>(std::lround(eval_fraction * static_cast<double>(members.size())));
        for (std::size_t j = 0; j < take; ++j) is_eval[members[j]] = true;
    }
    Dataset d;
    for (std::size_t i = 0; i < data.size(); ++i) (is_eval[i] ? d.eval_ids : d.pool_ids).push_back(i);
    d.pool = data.induced(d.pool_ids);
    for (std::size_t i : d.pool_ids) {
        d.pool_features.push_back(data.sample(i).features);
        d.pool_labels.push_back(*data.sample(i).gt_label);
    }
    for (std::size_t i : d.eval_ids) {
        d.eval_features.push_back(data.sample(i).features);
        d.eval_labels.push_back(*data.sample(i).gt_label);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Oracle

// Answers with the ground truth; every answered sample costs one unit of
// annotation effort.
class SimulatedOracle {
public:
    explicit SimulatedOracle(const SampleGraph& graph) : graph_(graph) {}

    int label(std::size_t index) {
        const auto& s = graph_.sample(index);
        if (!s.gt_label) throw GraphError("sample " + std::to_string(index) + " has no ground-truth label");
        ++effort_;
        return *s.gt_label;
    }

    std::size_t effort() const noexcept { return effort_; }

private:
    const SampleGraph& graph_;
    std::size_t effort_ = 0;
};

// ---------------------------------------------------------------------------
// Trials

struct CurvePoint {
    std::size_t labels_used = 0;
    double metric = 0.0;
};

struct QueryRecord {
    StrategyKind strategy = StrategyKind::rs;
    std::size_t trial = 0;
    std::size_t iteration = 0;
    // Indices into the original (unsplit) dataset.
    Batch indices;
    std::optional<ScoreComponents> components;
    bool fallback = false;
};

struct LearningCurve {
    StrategyKind strategy = StrategyKind::rs;
    std::uint64_t trial_seed = 0;
    std::size_t trial = 0;
    std::vector<CurvePoint> points;
    std::vector<QueryRecord> queries;
    // Set when the loop ran out of candidate batches before the budget.
    bool truncated = false;
    std::vector<std::string> notes;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a combined word.
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace detail {

enum SeedStream : std::uint64_t { seed_set = 1, model = 2, strategy = 3, committee = 4 };

inline std::vector<std::size_t> draw_seed_set(const Dataset& d, std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    for (int cls : {1, 0}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.pool_labels.size(); ++i) {
            if (d.pool_labels[i] == cls) members.push_back(i);
        }
        if (members.size() < per_class) {
            throw GraphError("pool has only " + std::to_string(members.size()) + " samples of class " +
                             std::to_string(cls) + "; the seed set needs " + std::to_string(per_class));
        }
        for (std::size_t j = 0; j < per_class; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, members.size() - 1);
            std::swap(members[j], members[pick(rng)]);
            chosen.push_back(members[j]);
        }
    }
    return chosen;
}

inline bool all_features_identical(const FeatureRows& rows, std::span<const std::size_t> idx) {
    for (std::size_t i : idx) {
        if (rows[i] != rows[idx.front()]) return false;
    }
    return true;
}

class TrialRunner {
public:
    TrialRunner(const Dataset& d, const ExperimentConfig& cfg, StrategyKind kind, std::size_t k)
        : d_(d), cfg_(cfg), kind_(kind), k_(k) {
        if (kind == StrategyKind::pps || kind == StrategyKind::dps) {
            propagator_.emplace(d.pool, cfg.propagation);
        }
        if (kind == StrategyKind::dps) {
            const double sigma = cfg.density_sigma.value_or(propagator_->sigma());
            global_ = build_affinity(d.pool, sigma, Support::global);
        }
    }

    LearningCurve run(std::size_t trial, std::uint64_t trial_seed) const {
        LearningCurve curve;
        curve.strategy = kind_;
        curve.trial = trial;
        curve.trial_seed = trial_seed;

        std::vector<std::size_t> seed_set;
        for (std::uint64_t sub = 0;; ++sub) {
            seed_set = draw_seed_set(d_, cfg_.seed_per_class, mix_seed(trial_seed, seed_set_stream(sub)));
            if (!all_features_identical(d_.pool_features, seed_set)) break;
            curve.notes.push_back("seed set for trial seed " + std::to_string(trial_seed) + " sub-seed " +
                                  std::to_string(sub) + " has identical features; redrawing");
            if (sub > 64) throw GraphError("could not draw a non-degenerate seed set");
        }

        SimulatedOracle oracle(d_.pool);
        LabelSet labels(d_.pool.size());
        for (std::size_t i : seed_set) labels.add(i, oracle.label(i));

        std::mt19937_64 strategy_rng(mix_seed(trial_seed, SeedStream::strategy));
        std::size_t iteration = 0;
        BoostedModel model = retrain(labels, trial_seed, iteration);
        curve.points.push_back({labels.size(), evaluate(model)});

        while (labels.size() < cfg_.budget) {
            const std::size_t want = std::min(k_, cfg_.budget - labels.size());
            CandidateSet candidates = candidate_batches_with_fallback(d_.pool, want, labels);
            if (candidates.batches.empty()) {
                curve.truncated = true;
                curve.notes.push_back("no candidate batches left after " + std::to_string(labels.size()) + " labels");
                break;
            }
            ++iteration;
            QueryBatch q = select(candidates.batches, model, labels, strategy_rng, trial_seed, iteration);
            q.fallback = candidates.k != want;
            for (std::size_t i : q.indices) labels.add(i, oracle.label(i));
            model = retrain(labels, trial_seed, iteration);
            curve.points.push_back({labels.size(), evaluate(model)});

            QueryRecord rec{kind_, trial, iteration, {}, q.components, q.fallback};
            for (std::size_t i : q.indices) rec.indices.push_back(d_.pool_ids[i]);
            curve.queries.push_back(std::move(rec));
        }
        return curve;
    }

private:
    static std::uint64_t seed_set_stream(std::uint64_t sub) { return SeedStream::seed_set + 16 * sub; }

    BoostedModel retrain(const LabelSet& labels, std::uint64_t trial_seed, std::size_t iteration) const {
        FeatureRows rows;
        std::vector<int> y;
        rows.reserve(labels.size());
        for (const auto& [i, label] : labels.entries()) {
            rows.push_back(d_.pool_features[i]);
            y.push_back(label);
        }
        return train_boosted(rows, y, cfg_.boost, mix_seed(mix_seed(trial_seed, SeedStream::model), iteration));
    }

    double evaluate(const BoostedModel& model) const {
        return evaluate_metric(cfg_.metric, predict_probabilities(model, d_.eval_features), d_.eval_labels);
    }

    QueryBatch select(const std::vector<Batch>& candidates, const BoostedModel& model, const LabelSet& labels,
                      std::mt19937_64& rng, std::uint64_t trial_seed, std::size_t iteration) const {
        switch (kind_) {
        case StrategyKind::rs: return select_rs(candidates, rng);
        case StrategyKind::us: return select_us(candidates, predict_probabilities(model, d_.pool_features));
        case StrategyKind::qbc: {
            FeatureRows rows;
            std::vector<int> y;
            for (const auto& [i, label] : labels.entries()) {
                rows.push_back(d_.pool_features[i]);
                y.push_back(label);
            }
            const Committee c = train_committee(
                rows, y, cfg_.committee, mix_seed(mix_seed(trial_seed, SeedStream::committee), iteration));
            return select_qbc(candidates, c, d_.pool_features);
        }
        case StrategyKind::pps:
        case StrategyKind::dps: {
            const auto p = predict_probabilities(model, d_.pool_features);
            const ProbabilityTable propagated = propagator_->propagate(clamp_labels(probability_table(p), labels));
            if (kind_ == StrategyKind::pps) return select_pps(candidates, propagated, labels);
            return select_dps(candidates, propagated, labels, *global_);
        }
        }
        throw ConfigError("unknown strategy");
    }

    const Dataset& d_;
    const ExperimentConfig& cfg_;
    StrategyKind kind_;
    std::size_t k_;
    std::optional<Propagator> propagator_;
    std::optional<AffinityMatrix> global_;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail

// One active-learning trial on a prepared dataset. `k` overrides cfg.k when
// given.
inline LearningCurve run_trial(const Dataset& d, const ExperimentConfig& cfg, StrategyKind strategy,
                               std::uint64_t trial_seed, std::size_t trial = 0,
                               std::optional<std::size_t> k = std::nullopt) {
    cfg.validate_except_budget();
    if (cfg.budget < cfg.seed_size()) throw ConfigError("budget is smaller than the seed set");
    return detail::TrialRunner(d, cfg, strategy, k.value_or(cfg.k)).run(trial, trial_seed);
}

// Classifier trained on every pool label, scored on the evaluation split.
inline double full_baseline(const Dataset& d, const ExperimentConfig& cfg) {
    const BoostedModel m = train_boosted(d.pool_features, d.pool_labels, cfg.boost, mix_seed(cfg.master_seed, 0));
    return evaluate_metric(cfg.metric, predict_probabilities(m, d.eval_features), d.eval_labels);
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregatePoint {
    std::size_t labels_used = 0;
    double mean = 0.0;
    // Population variance across the trials that reached this point.
    double variance = 0.0;
    std::size_t trials = 0;
};

struct StrategySummary {
    StrategyKind strategy = StrategyKind::rs;
    std::vector<AggregatePoint> curve;
    // Over each trial's last curve point.
    double final_mean = 0.0;
    double final_variance = 0.0;
    std::size_t truncated_trials = 0;

    // Mean metric at exactly `labels` labels, if that grid point exists.
    std::optional<double> mean_at(std::size_t labels) const {
        for (const auto& p : curve) {
            if (p.labels_used == labels) return p.mean;
        }
        return std::nullopt;
    }
};

struct AggregateResult {
    Metric metric = Metric::accuracy;
    double full_baseline = 0.0;
    std::size_t trials = 0;
    std::size_t k = 0;
    std::size_t pool_size = 0;
    std::size_t eval_size = 0;
    double eval_fraction = 0.0;
    std::vector<StrategySummary> strategies;
    std::vector<QueryRecord> queries;
    std::vector<std::string> notes;

    const StrategySummary* find(StrategyKind k) const {
        for (const auto& s : strategies) {
            if (s.strategy == k) return &s;
        }
        return nullptr;
    }
};

inline std::pair<double, double> mean_and_variance(std::span<const double> xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, ss / static_cast<double>(xs.size())};
}

inline StrategySummary summarize(StrategyKind kind, std::span<const LearningCurve> curves) {
    StrategySummary s;
    s.strategy = kind;
    std::map<std::size_t, std::vector<double>> by_labels;
    std::vector<double> finals;
    for (const auto& c : curves) {
        if (c.truncated) ++s.truncated_trials;
        for (const auto& p : c.points) by_labels[p.labels_used].push_back(p.metric);
        if (!c.points.empty()) finals.push_back(c.points.back().metric);
    }
    for (const auto& [labels, values] : by_labels) {
        const auto [m, v] = mean_and_variance(values);
        s.curve.push_back({labels, m, v, values.size()});
    }
    std::tie(s.final_mean, s.final_variance) = mean_and_variance(finals);
    return s;
}

// Trials use seeds master_seed + t, so every strategy sees the same seed sets.
inline AggregateResult run_experiment(const ExperimentConfig& cfg, const SampleGraph& data) {
    cfg.validate();
    const Dataset d = split_dataset(data, cfg.eval_fraction, cfg.split_seed);
    AggregateResult result;
    result.metric = cfg.metric;
    result.trials = cfg.trials;
    result.k = cfg.k;
    result.pool_size = d.pool.size();
    result.eval_size = d.eval_ids.size();
    result.eval_fraction = cfg.eval_fraction;
    result.full_baseline = full_baseline(d, cfg);
    result.notes.push_back("evaluation split: " + std::to_string(d.eval_ids.size()) + " held-out samples (fraction " +
                           std::to_string(cfg.eval_fraction) + ", split seed " + std::to_string(cfg.split_seed) + ")");

    std::vector<std::unique_ptr<detail::TrialRunner>> runners;
    for (StrategyKind s : cfg.strategies) runners.push_back(std::make_unique<detail::TrialRunner>(d, cfg, s, cfg.k));

    std::vector<LearningCurve> curves(cfg.strategies.size() * cfg.trials);
    detail::parallel_for(curves.size(), cfg.threads, [&](std::size_t job) {
        const std::size_t s = job / cfg.trials;
        const std::size_t t = job % cfg.trials;
        curves[job] = runners[s]->run(t, cfg.master_seed + t);
    });

    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        const std::span<const LearningCurve> mine(curves.data() + s * cfg.trials, cfg.trials);
        result.strategies.push_back(summarize(cfg.strategies[s], mine));
        for (const auto& c : mine) {
            result.queries.insert(result.queries.end(), c.queries.begin(), c.queries.end());
            for (const auto& n : c.notes) result.notes.push_back(std::string(to_string(c.strategy)) + ": " + n);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Export

inline std::string format_real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string join_indices(std::span<const std::size_t> idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(idx[i]);
    }
    return s;
}

inline void write_curves_csv(std::ostream& out, const AggregateResult& r) {
    out << "strategy,labels,mean_metric,var_metric\n";
    for (const auto& s : r.strategies) {
        for (const auto& p : s.curve) {
            out << to_string(s.strategy) << ',' << p.labels_used << ',' << format_real(p.mean) << ','
                << format_real(p.variance) << '\n';
        }
    }
}

inline void write_queries_csv(std::ostream& out, std::span<const QueryRecord> queries) {
    out << "strategy,trial,iteration,indices,H,sigma_G,sigma_L,sigma_I,mu\n";
    for (const auto& q : queries) {
        out << to_string(q.strategy) << ',' << q.trial << ',' << q.iteration << ',' << join_indices(q.indices) << ',';
        if (q.components) {
            const auto& c = *q.components;
            out << format_real(c.entropy_sum) << ',';
            if (c.density) {
                out << format_real(c.density->global) << ',' << format_real(c.density->labeled) << ','
                    << format_real(c.density->internal) << ',';
            } else {
                out << ",,,";
            }
            if (c.mu) out << format_real(*c.mu);
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
}

inline nlohmann::json summary_json(const AggregateResult& r) {
    nlohmann::json variance = nlohmann::json::object();
    nlohmann::json final_mean = nlohmann::json::object();
    nlohmann::json truncated = nlohmann::json::object();
    for (const auto& s : r.strategies) {
        const std::string name(to_string(s.strategy));
        variance[name] = s.final_variance;
        final_mean[name] = s.final_mean;
        truncated[name] = s.truncated_trials;
    }
    return nlohmann::json{{"metric", to_string(r.metric)},
                          {"full_baseline", r.full_baseline},
                          {"trials", r.trials},
                          {"k", r.k},
                          {"pool_size", r.pool_size},
                          {"eval_size", r.eval_size},
                          {"eval_fraction", r.eval_fraction},
                          {"final_variance", variance},
                          {"final_mean", final_mean},
                          {"truncated_trials", truncated},
                          {"notes", r.notes}};
}

struct CurveRow {
    std::string strategy;
    std::size_t labels = 0;
    double mean = 0.0;
    double variance = 0.0;

    bool operator==(const CurveRow&) const = default;
};

inline std::vector<CurveRow> read_curves_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "strategy,labels,mean_metric,var_metric") {
        throw ConfigError("curves table: unexpected header");
    }
    std::vector<CurveRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string strategy;
        std::string labels;
        std::string mean;
        std::string var;
        if (!std::getline(fields, strategy, ',') || !std::getline(fields, labels, ',') ||
            !std::getline(fields, mean, ',') || !std::getline(fields, var)) {
            throw ConfigError("curves table: malformed row '" + line + "'");
        }
        rows.push_back({strategy, std::stoul(labels), std::stod(mean), std::stod(var)});
    }
    return rows;
}

inline std::vector<CurveRow> curve_rows(const AggregateResult& r) {
    std::vector<CurveRow> rows;
    for (const auto& s : r.strategies) {
        for (const auto& p : s.curve) rows.push_back({std::string(to_string(s.strategy)), p.labels_used, p.mean, p.variance});
    }
    return rows;
}

// Writes curves.csv, queries.csv and summary.json into `dir` (which must
// exist).
inline void export_results(const AggregateResult& r, const std::string& dir) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw ConfigError("cannot write " + dir + "/" + name);
        return out;
    };
    {
        auto out = open("curves.csv");
        write_curves_csv(out, r);
    }
    {
        auto out = open("queries.csv");
        write_queries_csv(out, r.queries);
    }
    {
        auto out = open("summary.json");
        out << summary_json(r).dump(2) << '\n';
    }
}

// Heat-map table: metadata comment lines, then one row per grid row.
inline void write_heatmap_csv(std::ostream& out, const HeatMap& h) {
    out << "# x_min=" << format_real(h.grid.x_min) << " x_max=" << format_real(h.grid.x_max)
        << " y_min=" << format_real(h.grid.y_min) << " y_max=" << format_real(h.grid.y_max) << " nx=" << h.grid.nx
        << " ny=" << h.grid.ny << " spill=" << h.spill << '\n';
    for (std::size_t iy = 0; iy < h.grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < h.grid.nx; ++ix) {
            if (ix) out << ',';
            out << h.at(ix, iy);
        }
        out << '\n';
    }
}

} // namespace alcurve
