#include <thread>

#include <gtest/gtest.h>

#include "alcurve/service.hpp"

using namespace alcurve;

namespace {

std::shared_ptr<const io::GraphDocument> ring_doc() {
    SyntheticConfig cfg;
    cfg.n_points = 100;
    cfg.seed = 8;
    return std::make_shared<const io::GraphDocument>(io::GraphDocument{generate_synthetic(cfg), std::nullopt});
}

SpatialGraph small_spatial() {
    SpatialGraph g;
    g.feature_dim = 1;
    for (int n = 0; n < 6; ++n) g.nodes.push_back({n + 1, {double(n), 0.0}});
    for (std::size_t e = 0; e + 1 < 6; ++e) {
        g.edges.push_back({static_cast<std::int64_t>(10 + e), e, e + 1, {g.nodes[e].position, g.nodes[e + 1].position},
                           {double(e)}, static_cast<int>(e % 2)});
    }
    return g;
}

json labels_for(const json& query, const io::GraphDocument& doc) {
    json items = json::array();
    for (const auto& s : query["batch"]) {
        const std::size_t i = s["index"];
        items.push_back(json{{"index", i}, {"label", *doc.samples.sample(i).gt_label}});
    }
    return json{{"labels", items}};
}

} // namespace

TEST(Service, CreateQuerySubmitStatusExportGraph) {
    AnnotationService svc;
    const auto doc = ring_doc();
    svc.set_default_graph(doc);
    const Response created = svc.create(R"({"options": {"budget": 14, "k": 2}})");
    ASSERT_EQ(created.status, 201) << created.body.dump();
    const std::string id = created.body["id"];
    EXPECT_EQ(created.body["labeled"], 8);
    EXPECT_EQ(created.body["budget"], 14);

    const Response q = svc.query(id);
    ASSERT_EQ(q.status, 200);
    EXPECT_EQ(q.body["batch"].size(), 2u);
    EXPECT_TRUE(q.body["batch"][0].contains("probability"));
    EXPECT_TRUE(q.body["components"].contains("mu"));

    const Response after = svc.submit(id, labels_for(q.body, *doc).dump());
    ASSERT_EQ(after.status, 200) << after.body.dump();
    EXPECT_EQ(after.body["iteration"], 1);

    const Response st = svc.status(id);
    EXPECT_EQ(st.status, 200);
    EXPECT_EQ(st.body["labeled"], 10);
    EXPECT_EQ(st.body["status"], "awaiting_labels");

    const Response ex = svc.export_session(id);
    EXPECT_EQ(ex.status, 200);
    EXPECT_EQ(ex.body["format"], kSessionFormat);
    EXPECT_EQ(ex.body["events"].size(), 1u);

    const Response g = svc.graph(id);
    EXPECT_EQ(g.status, 200);
    EXPECT_EQ(g.body["samples"].size(), doc->samples.size());
    EXPECT_FALSE(g.body["adjacency"].empty());
}

TEST(Service, ErrorCodes) {
    AnnotationService svc;
    EXPECT_EQ(svc.create("{}").status, 400);  // no graph at all
    svc.set_default_graph(ring_doc());
    EXPECT_EQ(svc.create("not json").status, 400);
    EXPECT_EQ(svc.create(R"({"options": {"k": 9}})").status, 400);
    EXPECT_EQ(svc.create(R"({"graph_path": "/nonexistent/graph.json"})").status, 400);

    EXPECT_EQ(svc.query("missing").status, 404);
    EXPECT_EQ(svc.status("missing").status, 404);
    EXPECT_EQ(svc.export_session("missing").status, 404);
    EXPECT_EQ(svc.graph("missing").status, 404);
    EXPECT_EQ(svc.submit("missing", R"({"labels": []})").status, 404);

    const std::string id = svc.create("{}").body["id"];
    const json q = svc.query(id).body;
    EXPECT_EQ(svc.submit(id, "{}").status, 400);
    EXPECT_EQ(svc.submit(id, R"({"labels": [{"index": 0}]})").status, 400);
    const Response partial = svc.submit(id, json{{"labels", {{{"index", q["batch"][0]["index"]}, {"label", 1}}}}}.dump());
    EXPECT_EQ(partial.status, 409);
    EXPECT_TRUE(partial.body.contains("error"));

    const json answer = labels_for(q, *ring_doc());
    EXPECT_EQ(svc.submit(id, answer.dump()).status, 200);
    EXPECT_EQ(svc.submit(id, answer.dump()).status, 409);
}

TEST(Service, ParallelArrayBodyIsAccepted) {
    AnnotationService svc;
    const auto doc = ring_doc();
    svc.set_default_graph(doc);
    const std::string id = svc.create("{}").body["id"];
    const json q = svc.query(id).body;
    json body{{"indices", json::array()}, {"labels", json::array()}};
    for (const auto& s : q["batch"]) {
        body["indices"].push_back(s["index"]);
        body["labels"].push_back(*doc->samples.sample(s["index"].get<std::size_t>()).gt_label);
    }
    EXPECT_EQ(svc.submit(id, body.dump()).status, 200);
}

TEST(Service, InlineSpatialGraphCarriesPolylines) {
    AnnotationService svc;
    const json body{{"graph", io::to_json(small_spatial())}, {"options", {{"strategy", "us"}, {"k", 1}, {"seed_per_class", 1}}}};
    const Response created = svc.create(body.dump());
    ASSERT_EQ(created.status, 201) << created.body.dump();
    const std::string id = created.body["id"];
    const json q = svc.query(id).body;
    ASSERT_EQ(q["batch"].size(), 1u);
    EXPECT_TRUE(q["batch"][0].contains("edge_id"));
    EXPECT_EQ(q["batch"][0]["polyline"].size(), 2u);
    const json g = svc.graph(id).body;
    EXPECT_EQ(g["nodes"].size(), 6u);
}

TEST(Service, RestoreThroughCreate) {
    AnnotationService svc;
    const auto doc = ring_doc();
    svc.set_default_graph(doc);
    const std::string id = svc.create("{}").body["id"];
    svc.submit(id, labels_for(svc.query(id).body, *doc).dump());
    const json exported = svc.export_session(id).body;
    const Response restored = svc.create(json{{"restore", exported}}.dump());
    ASSERT_EQ(restored.status, 201);
    const std::string copy = restored.body["id"];
    EXPECT_NE(copy, id);
    EXPECT_EQ(svc.query(copy).body["batch"], svc.query(id).body["batch"]);
}

TEST(Service, LiveHttpRoundTrip) {
    AnnotationService svc;
    const auto doc = ring_doc();
    svc.set_default_graph(doc);
    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/sessions", R"({"options": {"budget": 12}})", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const std::string id = json::parse(created->body)["id"];

    auto q = client.Get("/sessions/" + id + "/query");
    ASSERT_TRUE(q);
    EXPECT_EQ(q->status, 200);
    const json query = json::parse(q->body);

    auto posted = client.Post("/sessions/" + id + "/labels", labels_for(query, *doc).dump(), "application/json");
    ASSERT_TRUE(posted);
    EXPECT_EQ(posted->status, 200);

    auto st = client.Get("/sessions/" + id + "/status");
    ASSERT_TRUE(st);
    EXPECT_EQ(json::parse(st->body)["labeled"], 10);

    auto ex = client.Get("/sessions/" + id + "/export");
    ASSERT_TRUE(ex);
    EXPECT_EQ(json::parse(ex->body)["format"], kSessionFormat);

    auto g = client.Get("/sessions/" + id + "/graph");
    ASSERT_TRUE(g);
    EXPECT_EQ(g->status, 200);
    EXPECT_EQ(g->get_header_value("Content-Type"), "application/json");

    auto missing = client.Get("/sessions/nope/status");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    server.stop();
    worker.join();
}
