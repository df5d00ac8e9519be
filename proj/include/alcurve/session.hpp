#pragma once

// Human-in-the-loop annotation sessions. A session owns the labeled set, the
// current classifier and the pending query batch; each submission appends to
// a replayable event log.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alcurve/classifier.hpp"
#include "alcurve/config.hpp"
#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"
#include "alcurve/graph_io.hpp"
#include "alcurve/harness.hpp"
#include "alcurve/propagation.hpp"
#include "alcurve/query.hpp"

namespace alcurve {

enum class SessionStatus { awaiting_labels, training, complete };

inline std::string_view to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::awaiting_labels: return "awaiting_labels";
    case SessionStatus::training: return "training";
    case SessionStatus::complete: return "complete";
    }
    return "?";
}

struct SessionOptions {
    StrategyConfig strategy;
    BoostConfig boost;
    std::size_t budget = 100;
    std::size_t seed_per_class = 4;
    // When every sample carries a ground-truth label, start from a seed set
    // drawn from it instead of asking for random batches first.
    bool seed_from_ground_truth = true;

    void validate() const {
        strategy.validate();
        boost.validate();
        if (budget < 1) throw ConfigError("budget must be positive");
    }
};

inline json to_json(const SessionOptions& o) {
    return json{{"strategy", to_string(o.strategy.kind)},
                {"k", o.strategy.k},
                {"seed", o.strategy.seed},
                {"propagation", to_json(o.strategy.propagation)},
                {"density_sigma", o.strategy.density_sigma ? json(*o.strategy.density_sigma) : json(nullptr)},
                {"committee_size", o.strategy.committee.members},
                {"boost", to_json(o.boost)},
                {"budget", o.budget},
                {"seed_per_class", o.seed_per_class},
                {"seed_from_ground_truth", o.seed_from_ground_truth}};
}

inline SessionOptions session_options_from_json(const json& j) {
    SessionOptions o;
    try {
        if (j.contains("strategy")) o.strategy.kind = parse_strategy(j["strategy"].get<std::string>());
        detail::read_if(j, "k", o.strategy.k);
        detail::read_if(j, "seed", o.strategy.seed);
        if (j.contains("propagation")) o.strategy.propagation = propagation_config_from_json(j["propagation"]);
        detail::read_if(j, "alpha", o.strategy.propagation.alpha);
        detail::read_optional(j, "sigma", o.strategy.propagation.sigma);
        detail::read_optional(j, "density_sigma", o.strategy.density_sigma);
        detail::read_if(j, "committee_size", o.strategy.committee.members);
        if (j.contains("boost")) o.boost = boost_config_from_json(j["boost"]);
        detail::read_if(j, "budget", o.budget);
        detail::read_if(j, "seed_per_class", o.seed_per_class);
        detail::read_if(j, "seed_from_ground_truth", o.seed_from_ground_truth);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("session options: ") + ex.what());
    }
    o.validate();
    return o;
}

struct SessionEvent {
    Batch batch;
    std::vector<int> labels;
};

inline constexpr const char* kSessionFormat = "alcurve-session";
inline constexpr int kSessionVersion = 1;

class Session {
public:
    Session(std::string id, std::shared_ptr<const io::GraphDocument> graph, SessionOptions options)
        : id_(std::move(id)), graph_(std::move(graph)), options_(std::move(options)) {
        options_.validate();
        const SampleGraph& sg = graph_->samples;
        if (sg.empty()) throw GraphError("cannot start a session on an empty graph");
        labels_ = LabelSet(sg.size());
        rng_.seed(mix_seed(options_.strategy.seed, 7));
        if (options_.strategy.kind == StrategyKind::pps || options_.strategy.kind == StrategyKind::dps) {
            propagator_ = std::make_shared<Propagator>(sg, options_.strategy.propagation);
        }
        if (options_.strategy.kind == StrategyKind::dps) {
            const double sigma = options_.strategy.density_sigma.value_or(propagator_->sigma());
            global_ = std::make_shared<AffinityMatrix>(build_affinity(sg, sigma, Support::global));
        }
        if (options_.seed_from_ground_truth && sg.fully_labeled()) seed_from_ground_truth();
        retrain();
        advance();
    }

    const std::string& id() const noexcept { return id_; }
    SessionStatus status() const noexcept { return status_; }
    std::size_t iteration() const noexcept { return iteration_; }
    std::size_t seed_size() const noexcept { return seed_size_; }
    const LabelSet& labels() const noexcept { return labels_; }
    const SessionOptions& options() const noexcept { return options_; }
    const io::GraphDocument& graph() const noexcept { return *graph_; }
    const std::optional<QueryBatch>& current_batch() const noexcept { return current_; }
    const std::optional<BoostedModel>& model() const noexcept { return model_; }
    const std::vector<SessionEvent>& events() const noexcept { return events_; }
    const std::vector<QueryRecord>& query_log() const noexcept { return query_log_; }

    // p(y=1) for every sample from the current classifier; 0.5 before one
    // can be trained. Labeled samples report their label.
    std::vector<double> probabilities() const {
        const SampleGraph& sg = graph_->samples;
        std::vector<double> p(sg.size(), 0.5);
        if (model_) {
            for (std::size_t i = 0; i < sg.size(); ++i) p[i] = predict_probability(*model_, sg.sample(i).features);
        }
        for (const auto& [i, y] : labels_.entries()) p[i] = y;
        return p;
    }

    // Labels must cover exactly the pending batch (any order). On any error
    // the session is left unchanged.
    void submit(std::span<const std::size_t> indices, std::span<const int> labels) {
        if (indices.size() != labels.size()) throw SessionError("indices and labels differ in length");
        for (std::size_t i : indices) {
            if (labels_.contains(i)) throw SessionError("sample " + std::to_string(i) + " was already labeled");
        }
        if (status_ == SessionStatus::complete || !current_) throw SessionError("session is complete");
        Batch submitted(indices.begin(), indices.end());
        std::vector<std::pair<std::size_t, int>> pairs;
        for (std::size_t n = 0; n < indices.size(); ++n) {
            if (labels[n] != 0 && labels[n] != 1) throw SessionError("labels must be 0 or 1");
            pairs.emplace_back(indices[n], labels[n]);
        }
        std::sort(pairs.begin(), pairs.end());
        std::sort(submitted.begin(), submitted.end());
        if (std::adjacent_find(submitted.begin(), submitted.end()) != submitted.end()) {
            throw SessionError("duplicate index in submission");
        }
        if (submitted != current_->indices) throw SessionError("labels must cover exactly the pending batch");

        SessionEvent event;
        for (const auto& [i, y] : pairs) {
            event.batch.push_back(i);
            event.labels.push_back(y);
        }
        status_ = SessionStatus::training;
        for (const auto& [i, y] : pairs) labels_.add(i, y);
        ++iteration_;
        QueryRecord rec{options_.strategy.kind, 0, iteration_, current_->indices, current_->components,
                        current_->fallback};
        query_log_.push_back(std::move(rec));
        events_.push_back(std::move(event));
        retrain();
        advance();
    }

    json export_json() const {
        json seed = json::array();
        for (std::size_t n = 0; n < seed_size_; ++n) {
            seed.push_back(json::array({labels_.entries()[n].first, labels_.entries()[n].second}));
        }
        json events = json::array();
        for (const auto& e : events_) events.push_back(json{{"batch", e.batch}, {"labels", e.labels}});
        json labels = json::array();
        for (const auto& [i, y] : labels_.entries()) labels.push_back(json::array({i, y}));
        json log = json::array();
        for (const auto& q : query_log_) {
            json rec{{"iteration", q.iteration}, {"indices", q.indices}, {"fallback", q.fallback}};
            if (q.components) rec["components"] = components_json(*q.components);
            log.push_back(std::move(rec));
        }
        return json{{"format", kSessionFormat},
                    {"version", kSessionVersion},
                    {"id", id_},
                    {"options", to_json(options_)},
                    {"status", to_string(status_)},
                    {"iteration", iteration_},
                    {"seed_labels", std::move(seed)},
                    {"events", std::move(events)},
                    {"labels", std::move(labels)},
                    {"model", model_ ? json(serialize_model(*model_)) : json(nullptr)},
                    {"query_log", std::move(log)}};
    }

    // Replays the submissions of an export against `graph`. The replayed
    // batches must match the recorded ones.
    static Session restore(std::shared_ptr<const io::GraphDocument> graph, const json& exported) {
        if (!exported.is_object() || exported.value("format", "") != kSessionFormat) {
            throw SessionError("not a session export");
        }
        if (exported.value("version", 0) != kSessionVersion) throw SessionError("unsupported session export version");
        Session s(exported.at("id").get<std::string>(), std::move(graph),
                  session_options_from_json(exported.at("options")));
        for (const auto& e : exported.at("events")) {
            const auto batch = e.at("batch").get<std::vector<std::size_t>>();
            const auto labels = e.at("labels").get<std::vector<int>>();
            if (!s.current_ || s.current_->indices != batch) {
                throw SessionError("replayed trajectory diverges from the export at iteration " +
                                   std::to_string(s.iteration_ + 1));
            }
            s.submit(batch, labels);
        }
        return s;
    }

    static json components_json(const ScoreComponents& c) {
        json j{{"H", c.entropy_sum}};
        if (c.density) {
            j["sigma_G"] = c.density->global;
            j["sigma_L"] = c.density->labeled;
            j["sigma_I"] = c.density->internal;
        }
        if (c.mu) j["mu"] = *c.mu;
        return j;
    }

private:
    void seed_from_ground_truth() {
        const SampleGraph& sg = graph_->samples;
        std::mt19937_64 rng(mix_seed(options_.strategy.seed, 1));
        for (int cls : {1, 0}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < sg.size(); ++i) {
                if (*sg.sample(i).gt_label == cls) members.push_back(i);
            }
            const std::size_t take = std::min(options_.seed_per_class, members.size());
            for (std::size_t j = 0; j < take; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, members.size() - 1);
                std::swap(members[j], members[pick(rng)]);
                labels_.add(members[j], cls);
            }
        }
        seed_size_ = labels_.size();
    }

    bool both_classes_labeled() const { return labels_.count(0) > 0 && labels_.count(1) > 0; }

    void retrain() {
        if (!both_classes_labeled()) {
            model_.reset();
            return;
        }
        FeatureRows rows;
        std::vector<int> y;
        for (const auto& [i, label] : labels_.entries()) {
            rows.push_back(graph_->samples.sample(i).features);
            y.push_back(label);
        }
        model_ = train_boosted(rows, y, options_.boost, mix_seed(mix_seed(options_.strategy.seed, 2), iteration_));
    }

    void advance() {
        current_.reset();
        const SampleGraph& sg = graph_->samples;
        if (labels_.size() >= options_.budget) {
            status_ = SessionStatus::complete;
            return;
        }
        const std::size_t want = std::min(options_.strategy.k, options_.budget - labels_.size());
        CandidateSet candidates = candidate_batches_with_fallback(sg, want, labels_);
        if (candidates.batches.empty()) {
            status_ = SessionStatus::complete;
            return;
        }
        QueryBatch q;
        if (!model_ || options_.strategy.kind == StrategyKind::rs) {
            q = select_rs(candidates.batches, rng_);
        } else {
            const auto p = predict_probabilities(*model_, sg.feature_rows());
            switch (options_.strategy.kind) {
            case StrategyKind::us: q = select_us(candidates.batches, p); break;
            case StrategyKind::qbc: {
                FeatureRows rows;
                std::vector<int> y;
                for (const auto& [i, label] : labels_.entries()) {
                    rows.push_back(sg.sample(i).features);
                    y.push_back(label);
                }
                const Committee c = train_committee(rows, y, options_.strategy.committee,
                                                    mix_seed(mix_seed(options_.strategy.seed, 4), iteration_));
                q = select_qbc(candidates.batches, c, sg.feature_rows());
                break;
            }
            case StrategyKind::pps:
            case StrategyKind::dps: {
                const ProbabilityTable propagated = propagator_->propagate(clamp_labels(probability_table(p), labels_));
                q = options_.strategy.kind == StrategyKind::pps
                        ? select_pps(candidates.batches, propagated, labels_)
                        : select_dps(candidates.batches, propagated, labels_, *global_);
                break;
            }
            case StrategyKind::rs: break;
            }
        }
        q.fallback = candidates.k != want;
        current_ = std::move(q);
        status_ = SessionStatus::awaiting_labels;
    }

    std::string id_;
    std::shared_ptr<const io::GraphDocument> graph_;
    SessionOptions options_;
    LabelSet labels_;
    std::size_t seed_size_ = 0;
    std::size_t iteration_ = 0;
    SessionStatus status_ = SessionStatus::awaiting_labels;
    std::optional<BoostedModel> model_;
    std::optional<QueryBatch> current_;
    std::vector<SessionEvent> events_;
    std::vector<QueryRecord> query_log_;
    std::mt19937_64 rng_;
    std::shared_ptr<Propagator> propagator_;
    std::shared_ptr<AffinityMatrix> global_;
};

// Owns live sessions. Submissions to one session are serialized; distinct
// sessions never contend. With a storage directory, every session keeps an
// append-only log (<id>.log, one JSON object per line) plus a copy of its
// graph (<id>.graph.json), and load_persisted() replays them after a restart.
class SessionManager {
public:
    SessionManager() = default;
    explicit SessionManager(std::filesystem::path storage) : storage_(std::move(storage)) {
        std::filesystem::create_directories(*storage_);
    }

    std::string create(std::shared_ptr<const io::GraphDocument> graph, const SessionOptions& options) {
        const std::string id = next_id();
        install(id, graph, Session(id, graph, options));
        return id;
    }

    // Replays an exported session under a fresh id.
    std::string restore(std::shared_ptr<const io::GraphDocument> graph, const json& exported) {
        const std::string id = next_id();
        json relabeled = exported;
        relabeled["id"] = id;
        install(id, graph, Session::restore(graph, relabeled));
        return id;
    }

    // Runs fn(const Session&) under the session's lock.
    template <class Fn>
    auto read(const std::string& id, Fn fn) const {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        return fn(static_cast<const Session&>(e->session));
    }

    SessionStatus status(const std::string& id) const { return find(id)->status.load(); }

    void submit(const std::string& id, std::span<const std::size_t> indices, std::span<const int> labels) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        e->status = SessionStatus::training;
        try {
            e->session.submit(indices, labels);
        } catch (...) {
            e->status = e->session.status();
            throw;
        }
        e->status = e->session.status();
        if (storage_) {
            const auto& ev = e->session.events().back();
            append_log(id, json{{"type", "labels"}, {"batch", ev.batch}, {"labels", ev.labels}});
        }
    }

    // Rebuilds every session found in the storage directory.
    std::size_t load_persisted() {
        if (!storage_) return 0;
        std::size_t loaded = 0;
        for (const auto& file : std::filesystem::directory_iterator(*storage_)) {
            if (file.path().extension() != ".log") continue;
            const std::string id = file.path().stem().string();
            auto graph = std::make_shared<const io::GraphDocument>(
                io::load_graph((*storage_ / (id + ".graph.json")).string()));
            std::ifstream in(file.path());
            std::string line;
            std::optional<Session> session;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const json rec = json::parse(line);
                if (rec.at("type") == "create") {
                    session.emplace(id, graph, session_options_from_json(rec.at("options")));
                } else if (session) {
                    session->submit(rec.at("batch").get<std::vector<std::size_t>>(),
                                    rec.at("labels").get<std::vector<int>>());
                }
            }
            if (!session) continue;
            std::lock_guard lock(map_mutex_);
            sessions_.insert_or_assign(id, std::make_shared<Entry>(std::move(*session)));
            if (id.size() > 1 && id[0] == 's') {
                try {
                    counter_ = std::max(counter_, std::stoull(id.substr(1)));
                } catch (const std::exception&) {
                }
            }
            ++loaded;
        }
        return loaded;
    }

    std::vector<std::string> ids() const {
        std::lock_guard lock(map_mutex_);
        std::vector<std::string> out;
        for (const auto& [id, e] : sessions_) out.push_back(id);
        return out;
    }

private:
    std::string next_id() {
        std::lock_guard lock(map_mutex_);
        std::string id = "s" + std::to_string(++counter_);
        while (sessions_.count(id)) id = "s" + std::to_string(++counter_);
        return id;
    }

    void install(const std::string& id, const std::shared_ptr<const io::GraphDocument>& graph, Session session) {
        if (storage_) {
            io::write_json_file((*storage_ / (id + ".graph.json")).string(),
                                graph->spatial ? io::to_json(*graph->spatial) : io::to_json(graph->samples));
            append_log(id, json{{"type", "create"}, {"options", to_json(session.options())}});
            for (const auto& ev : session.events()) {
                append_log(id, json{{"type", "labels"}, {"batch", ev.batch}, {"labels", ev.labels}});
            }
        }
        auto entry = std::make_shared<Entry>(std::move(session));
        std::lock_guard lock(map_mutex_);
        sessions_.emplace(id, std::move(entry));
    }

    struct Entry {
        explicit Entry(Session s) : session(std::move(s)), status(session.status()) {}
        mutable std::mutex mutex;
        Session session;
        std::atomic<SessionStatus> status;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(map_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw SessionNotFound("unknown session '" + id + "'");
        return it->second;
    }

    void append_log(const std::string& id, const json& record) {
        std::lock_guard lock(log_mutex_);
        std::ofstream out(*storage_ / (id + ".log"), std::ios::app);
        out << record.dump() << '\n';
        out.flush();
    }

    std::optional<std::filesystem::path> storage_;
    mutable std::mutex map_mutex_;
    std::mutex log_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    unsigned long long counter_ = 0;
};

} // namespace alcurve
