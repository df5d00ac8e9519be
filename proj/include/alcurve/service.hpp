#pragma once

// HTTP front end for annotation sessions. AnnotationService turns requests
// into (status code, JSON body) pairs and can be driven without a socket;
// mount() wires it into a cpp-httplib server. Schemas are in docs/api.md.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "alcurve/errors.hpp"
#include "alcurve/graph_io.hpp"
#include "alcurve/session.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace alcurve {

struct Response {
    int status = 200;
    json body;
};

class AnnotationService {
public:
    AnnotationService() = default;
    explicit AnnotationService(std::filesystem::path storage) : sessions_(std::move(storage)) {
        sessions_.load_persisted();
    }

    // Graph used when a create request names none.
    void set_default_graph(std::shared_ptr<const io::GraphDocument> graph, SessionOptions options = {}) {
        default_graph_ = std::move(graph);
        default_options_ = std::move(options);
    }

    SessionManager& sessions() noexcept { return sessions_; }

    Response create(const std::string& body) {
        return guarded([&] {
            const json req = body.empty() ? json::object() : json::parse(body);
            if (!req.is_object()) throw ConfigError("request body must be a JSON object");
            std::shared_ptr<const io::GraphDocument> graph;
            if (req.contains("graph_path")) {
                graph = std::make_shared<const io::GraphDocument>(io::load_graph(req["graph_path"].get<std::string>()));
            } else if (req.contains("graph")) {
                graph = std::make_shared<const io::GraphDocument>(io::graph_from_json(req["graph"]));
            } else if (default_graph_) {
                graph = default_graph_;
            } else {
                throw ConfigError("request needs 'graph' or 'graph_path'");
            }
            std::string id;
            if (req.contains("restore")) {
                id = sessions_.restore(graph, req["restore"]);
            } else {
                SessionOptions options = default_options_;
                if (req.contains("options")) {
                    json merged = to_json(default_options_);
                    merged.update(req["options"]);
                    options = session_options_from_json(merged);
                }
                id = sessions_.create(graph, options);
            }
            return Response{201, sessions_.read(id, [](const Session& s) { return status_json(s); })};
        });
    }

    Response query(const std::string& id) {
        return guarded([&] { return Response{200, sessions_.read(id, [](const Session& s) { return query_json(s); })}; });
    }

    Response submit(const std::string& id, const std::string& body) {
        return guarded([&] {
            const json req = json::parse(body);
            std::vector<std::size_t> indices;
            std::vector<int> labels;
            if (req.is_object() && req.contains("labels") && req["labels"].is_array() && !req.contains("indices")) {
                // [{"index": i, "label": y}, ...]
                for (const auto& item : req["labels"]) {
                    indices.push_back(item.at("index").get<std::size_t>());
                    labels.push_back(item.at("label").get<int>());
                }
            } else if (req.is_object() && req.contains("indices")) {
                indices = req.at("indices").get<std::vector<std::size_t>>();
                labels = req.at("labels").get<std::vector<int>>();
            } else {
                throw ConfigError("expected {\"labels\": [{\"index\", \"label\"}, ...]}");
            }
            sessions_.submit(id, indices, labels);
            return Response{200, sessions_.read(id, [](const Session& s) { return query_json(s); })};
        });
    }

    Response status(const std::string& id) {
        return guarded([&] {
            // Answer without waiting on the lock while a submission retrains.
            if (sessions_.status(id) == SessionStatus::training) {
                return Response{200, json{{"id", id}, {"status", to_string(SessionStatus::training)}}};
            }
            return Response{200, sessions_.read(id, [](const Session& s) { return status_json(s); })};
        });
    }

    Response export_session(const std::string& id) {
        return guarded([&] { return Response{200, sessions_.read(id, [](const Session& s) { return s.export_json(); })}; });
    }

    Response graph(const std::string& id) {
        return guarded([&] { return Response{200, sessions_.read(id, [](const Session& s) { return graph_json(s); })}; });
    }

    static json status_json(const Session& s) {
        return json{{"id", s.id()},
                    {"status", to_string(s.status())},
                    {"iteration", s.iteration()},
                    {"labeled", s.labels().size()},
                    {"positives", s.labels().count(1)},
                    {"negatives", s.labels().count(0)},
                    {"seed_size", s.seed_size()},
                    {"budget", s.options().budget},
                    {"strategy", to_string(s.options().strategy.kind)},
                    {"k", s.options().strategy.k}};
    }

    static json sample_json(const Session& s, std::size_t i, double probability) {
        const auto& doc = s.graph();
        json j{{"index", i}, {"probability", probability}};
        if (const auto& pos = doc.samples.sample(i).position) j["position"] = *pos;
        if (doc.spatial) {
            const auto& edge = doc.spatial->edges[i];
            j["edge_id"] = edge.id;
            j["polyline"] = edge.polyline;
        }
        return j;
    }

    static json query_json(const Session& s) {
        json j{{"id", s.id()}, {"status", to_string(s.status())}, {"iteration", s.iteration()}};
        json batch = json::array();
        const auto& q = s.current_batch();
        if (q) {
            const auto p = s.probabilities();
            for (std::size_t i : q->indices) batch.push_back(sample_json(s, i, p[i]));
            j["score"] = q->score;
            j["components"] = q->components ? Session::components_json(*q->components) : json(nullptr);
            j["fallback"] = q->fallback;
        }
        j["batch"] = std::move(batch);
        return j;
    }

    static json graph_json(const Session& s) {
        const auto& sg = s.graph().samples;
        const auto p = s.probabilities();
        json samples = json::array();
        for (std::size_t i = 0; i < sg.size(); ++i) {
            json item = sample_json(s, i, p[i]);
            if (s.labels().contains(i)) item["label"] = *s.labels().label(i);
            samples.push_back(std::move(item));
        }
        json adjacency = json::array();
        for (const auto& [a, b] : sg.edge_list()) adjacency.push_back(json::array({a, b}));
        json j{{"id", s.id()}, {"samples", std::move(samples)}, {"adjacency", std::move(adjacency)}};
        if (s.graph().spatial) {
            json nodes = json::array();
            for (const auto& n : s.graph().spatial->nodes) nodes.push_back(json{{"id", n.id}, {"position", n.position}});
            j["nodes"] = std::move(nodes);
        }
        return j;
    }

    // Registers every endpoint on `server`.
    void mount(httplib::Server& server) {
        auto reply = [](httplib::Response& res, const Response& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server.Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, create(req.body));
        });
        server.Get(R"(/sessions/([^/]+)/query)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, query(req.matches[1]));
        });
        server.Post(R"(/sessions/([^/]+)/labels)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, submit(req.matches[1], req.body));
        });
        server.Get(R"(/sessions/([^/]+)/status)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, status(req.matches[1]));
        });
        server.Get(R"(/sessions/([^/]+)/export)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, export_session(req.matches[1]));
        });
        server.Get(R"(/sessions/([^/]+)/graph)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, graph(req.matches[1]));
        });
    }

private:
    template <class Fn>
    static Response guarded(Fn fn) {
        try {
            return fn();
        } catch (const SessionNotFound& ex) {
            return error(404, ex.what());
        } catch (const SessionError& ex) {
            return error(409, ex.what());
        } catch (const json::exception& ex) {
            return error(400, std::string("malformed JSON: ") + ex.what());
        } catch (const Error& ex) {
            return error(400, ex.what());
        } catch (const std::exception& ex) {
            return error(500, ex.what());
        }
    }

    static Response error(int code, const std::string& message) { return Response{code, json{{"error", message}}}; }

    SessionManager sessions_;
    std::shared_ptr<const io::GraphDocument> default_graph_;
    SessionOptions default_options_;
};

} // namespace alcurve
