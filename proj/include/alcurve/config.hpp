#pragma once

// JSON documents for experiment and generator configuration. Every key is
// optional; missing keys keep the struct defaults. See docs/formats.md.

#include <string>

#include <nlohmann/json.hpp>

#include "alcurve/errors.hpp"
#include "alcurve/harness.hpp"
#include "alcurve/synthetic.hpp"

namespace alcurve {

using json = nlohmann::json;

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j[key].is_null()) {
        out.reset();
    } else {
        out = j[key].get<T>();
    }
}

} // namespace detail

inline SyntheticConfig synthetic_config_from_json(const json& j) {
    SyntheticConfig c;
    try {
        detail::read_if(j, "n_points", c.n_points);
        detail::read_if(j, "inner_radius", c.inner_radius);
        detail::read_if(j, "outer_radius", c.outer_radius);
        detail::read_if(j, "warp_angle", c.warp_angle);
        detail::read_if(j, "radial_gain", c.radial_gain);
        detail::read_if(j, "noise", c.noise);
        detail::read_if(j, "neighbors", c.neighbors);
        detail::read_if(j, "seed", c.seed);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("synthetic config: ") + ex.what());
    }
    c.validate();
    return c;
}

inline json to_json(const SyntheticConfig& c) {
    return json{{"n_points", c.n_points},     {"inner_radius", c.inner_radius}, {"outer_radius", c.outer_radius},
                {"warp_angle", c.warp_angle}, {"radial_gain", c.radial_gain},   {"noise", c.noise},
                {"neighbors", c.neighbors},   {"seed", c.seed}};
}

inline BoostConfig boost_config_from_json(const json& j) {
    BoostConfig c;
    detail::read_if(j, "n_learners", c.n_learners);
    detail::read_if(j, "max_depth", c.max_depth);
    detail::read_if(j, "shrinkage", c.shrinkage);
    detail::read_if(j, "row_subsample", c.row_subsample);
    detail::read_optional(j, "features_per_split", c.features_per_split);
    c.validate();
    return c;
}

inline json to_json(const BoostConfig& c) {
    json j{{"n_learners", c.n_learners},
           {"max_depth", c.max_depth},
           {"shrinkage", c.shrinkage},
           {"row_subsample", c.row_subsample}};
    j["features_per_split"] = c.features_per_split ? json(*c.features_per_split) : json(nullptr);
    return j;
}

inline PropagationConfig propagation_config_from_json(const json& j) {
    PropagationConfig c;
    detail::read_if(j, "alpha", c.alpha);
    detail::read_optional(j, "sigma", c.sigma);
    c.validate();
    return c;
}

inline json to_json(const PropagationConfig& c) {
    return json{{"alpha", c.alpha}, {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)}};
}

// Where the experiment gets its data: a graph file or generator settings.
struct DatasetSource {
    std::optional<std::string> path;
    std::optional<SyntheticConfig> synthetic;
};

struct ExperimentDocument {
    ExperimentConfig experiment;
    DatasetSource dataset;
    std::optional<std::string> output_dir;
};

inline ExperimentDocument experiment_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentDocument doc;
    auto& c = doc.experiment;
    try {
        if (j.contains("dataset")) {
            const auto& ds = j["dataset"];
            if (ds.is_string()) {
                doc.dataset.path = ds.get<std::string>();
            } else if (ds.contains("path")) {
                doc.dataset.path = ds["path"].get<std::string>();
            } else if (ds.contains("synthetic")) {
                doc.dataset.synthetic = synthetic_config_from_json(ds["synthetic"]);
            } else {
                throw ConfigError("dataset needs either 'path' or 'synthetic'");
            }
        } else {
            doc.dataset.synthetic = SyntheticConfig{};
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j["strategies"]) c.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        detail::read_if(j, "seed_per_class", c.seed_per_class);
        detail::read_if(j, "k", c.k);
        detail::read_if(j, "budget", c.budget);
        detail::read_if(j, "trials", c.trials);
        if (j.contains("metric")) c.metric = parse_metric(j["metric"].get<std::string>());
        detail::read_if(j, "seed", c.master_seed);
        detail::read_if(j, "eval_fraction", c.eval_fraction);
        detail::read_if(j, "split_seed", c.split_seed);
        if (j.contains("boost")) c.boost = boost_config_from_json(j["boost"]);
        if (j.contains("propagation")) c.propagation = propagation_config_from_json(j["propagation"]);
        detail::read_optional(j, "density_sigma", c.density_sigma);
        detail::read_if(j, "committee_size", c.committee.members);
        detail::read_if(j, "threads", c.threads);
        if (j.contains("output")) doc.output_dir = j["output"].get<std::string>();
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("experiment config: ") + ex.what());
    }
    c.validate();
    return doc;
}

} // namespace alcurve
