#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "hum/http_server.hpp"
#include "hum/service.hpp"

namespace hum {
namespace {

using namespace std::chrono_literals;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const json* find_node(const json& snap, const std::string& term) {
  for (const auto& n : snap["nodes"])
    if (n["term"] == term) return &n;
  return nullptr;
}

TEST(Service, CommandResponses) {
  SessionService svc;
  auto id = svc.create_session();
  auto r = svc.handle_command(id, read_file(HUM_SCRIPTS_DIR "/urns.hum"));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_TRUE(r.body["ok"].get<bool>());
  EXPECT_EQ(r.body["output_lines"], json({"0.33", "0.5", "0.67", "0.8"}));

  // Stop after the first observation.
  auto urns = read_file(HUM_SCRIPTS_DIR "/urns.hum");
  svc.handle_command(id, "(Reset)");
  svc.handle_command(id, urns.substr(0, urns.find("(Instance (draw 2))")));
  r = svc.handle_command(id, "(Probability-of (Urn H2))");
  ASSERT_EQ(r.status, 200);
  EXPECT_NEAR(r.body["value"].get<double>(), 2.0 / 3, 1e-12);
  EXPECT_EQ(r.body["display"], "0.67");
}

TEST(Service, Errors) {
  SessionService svc;
  auto id = svc.create_session();
  auto r = svc.handle_command(id, "(Variable X a b)\n  (Instance");
  EXPECT_EQ(r.status, 422);
  EXPECT_FALSE(r.body["ok"].get<bool>());
  EXPECT_EQ(r.body["line"], 2);
  EXPECT_EQ(r.body["column"], 3);
  EXPECT_TRUE(svc.get_network(id).body["nodes"].empty());

  r = svc.handle_command(id, "(Instance Y)");
  EXPECT_EQ(r.status, 422);
  EXPECT_NE(r.body["error"].get<std::string>().find("Y"), std::string::npos);

  EXPECT_EQ(svc.handle_command("0000000000000000", "(Reset)").status, 404);
  EXPECT_EQ(svc.get_network("nope").status, 404);
  EXPECT_TRUE(svc.close_session(id));
  EXPECT_FALSE(svc.close_session(id));
  EXPECT_EQ(svc.handle_command(id, "(Reset)").status, 404);
}

TEST(Service, Snapshots) {
  SessionService svc;
  auto id = svc.create_session();
  auto empty = svc.get_network(id).body;
  for (const char* key : {"nodes", "assumptions", "choose_sets", "nogoods", "justifications"})
    EXPECT_TRUE(empty[key].empty()) << key;

  svc.handle_command(id, read_file(HUM_SCRIPTS_DIR "/urns.hum"));
  auto snap = svc.get_network(id).body;
  const json* black = find_node(snap, "((draw 1) black)");
  ASSERT_TRUE(black);
  EXPECT_TRUE((*black)["label"].empty());
  EXPECT_EQ((*black)["probability"], 0.0);
  const json* h2 = find_node(snap, "(Urn H2)");
  ASSERT_TRUE(h2);
  EXPECT_EQ((*h2)["label"], json::array({json::array({"a_H2"})}));
  EXPECT_NEAR((*h2)["probability"].get<double>(), 0.8, 1e-12);
  EXPECT_TRUE((*find_node(snap, "((draw 1) white)"))["is_premise"].get<bool>());
  EXPECT_TRUE((*find_node(snap, "*contradiction*"))["probability"].is_null());
  ASSERT_FALSE(snap["assumptions"].empty());
  const auto& a0 = snap["assumptions"][0];
  for (const char* key : {"display_name", "kind", "weight", "retracted", "choose_set", "node"})
    EXPECT_TRUE(a0.contains(key)) << key;
  EXPECT_EQ(snap["choose_sets"][0]["tag"], "Urn");
  EXPECT_NE(std::find(snap["nogoods"].begin(), snap["nogoods"].end(), json::array({"a_H3"})), snap["nogoods"].end());
  EXPECT_TRUE(snap["justifications"][0].contains("antecedents"));

  auto other = svc.create_session();
  svc.handle_command(other, read_file(HUM_SCRIPTS_DIR "/urns.hum"));
  EXPECT_EQ(svc.get_network(other).body, snap);
}

TEST(Service, RetractionIsVisible) {
  SessionService svc;
  auto id = svc.create_session();
  auto r = svc.handle_command(id, read_file(HUM_SCRIPTS_DIR "/chernobyl.hum"));
  ASSERT_EQ(r.status, 200);
  bool retracting = false;
  for (const auto& e : r.body["events"])
    if (e["kind"] == "retracting") retracting = e["text"] == "(Independent evidence-for (radio 1) (news 1))";
  EXPECT_TRUE(retracting);
  auto snap = svc.get_network(id).body;
  bool flagged = false;
  for (const auto& a : snap["assumptions"])
    if (a["kind"] == "structure") flagged = a["retracted"].get<bool>();
  EXPECT_TRUE(flagged);
}

TEST(Service, OutputMatchesSessionLines) {
  SessionService svc;
  auto id = svc.create_session();
  Session local;
  auto text = read_file(HUM_SCRIPTS_DIR "/chernobyl.hum");
  for (const auto& cmd : parse_commands(text)) {
    auto r = svc.handle_command(id, cmd.text);
    ASSERT_EQ(r.status, 200) << cmd.text;
    EXPECT_EQ(r.body["output_lines"], json(local.eval_command(cmd).lines)) << cmd.text;
  }
}

TEST(Service, EventStream) {
  SessionService svc;
  auto id = svc.create_session();
  auto none = svc.events_since(id, 0, 0ms);
  ASSERT_TRUE(none);
  EXPECT_TRUE(none->empty());

  std::vector<json> first, second;
  auto subscriber = [&](std::vector<json>& out) {
    std::size_t cursor = 0;
    while (auto batch = svc.events_since(id, cursor, 50ms)) {
      for (auto& e : *batch) out.push_back(std::move(e));
      cursor = out.size();
    }
  };
  std::thread a(subscriber, std::ref(first));
  std::thread b(subscriber, std::ref(second));
  auto text = read_file(HUM_SCRIPTS_DIR "/chernobyl.hum");
  std::size_t expected = 0;
  for (const auto& cmd : parse_commands(text)) expected += svc.handle_command(id, cmd.text).body["events"].size();
  std::this_thread::sleep_for(100ms);
  svc.close_session(id);
  a.join();
  b.join();

  ASSERT_EQ(first.size(), expected);
  EXPECT_EQ(first, second);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(first[i]["seq"], i);
  auto assuming = std::find_if(first.begin(), first.end(), [](const json& e) { return e["kind"] == "assuming"; });
  ASSERT_NE(assuming, first.end());
  EXPECT_EQ((*assuming)["text"], "(Independent evidence-for (radio 1) (news 1))");
  EXPECT_FALSE(svc.events_since(id, 0, 0ms));
}

int status_of(const httplib::Result& r) { return r ? r->status : -1; }

// Stops the server and joins its thread on every exit path.
struct RunningServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit RunningServer(const std::shared_ptr<SessionService>& svc) {
    install_routes(server, svc);
    port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) return;
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

TEST(Http, RoundTrip) {
  auto svc = std::make_shared<SessionService>();
  RunningServer running(svc);
  const int port = running.port;
  ASSERT_GT(port, 0);

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(5, 0);
  auto created = client.Post("/sessions");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  std::string id = json::parse(created->body)["session"];

  std::string events;
  std::jthread stream([&] {
    httplib::Client sse("127.0.0.1", port);
    sse.set_read_timeout(5, 0);
    sse.Get("/sessions/" + id + "/events", [&](const char* data, std::size_t n) {
      events.append(data, n);
      return events.find("event: retracting") == std::string::npos;
    });
  });

  std::vector<std::string> outputs;
  for (const auto& cmd : parse_commands(read_file(HUM_SCRIPTS_DIR "/chernobyl.hum"))) {
    auto res = client.Post("/sessions/" + id + "/commands", json{{"text", cmd.text}}.dump(), "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    auto body = json::parse(res->body);
    for (const auto& l : body["output_lines"]) outputs.push_back(l);
  }
  EXPECT_EQ(outputs, (std::vector<std::string>{"0.7", "** Assuming (Independent evidence-for (radio 1) (news 1)) ***",
                                                "** Monitoring (Same evidence-for (radio 1) (news 1)) ***", "0.91",
                                                "** Retracting (Independent evidence-for (radio 1) (news 1)) ***",
                                                "0.7"}));

  auto raw = client.Post("/sessions/" + id + "/commands", "(Probability-of (1000s-dead true))", "text/plain");
  ASSERT_TRUE(raw);
  EXPECT_EQ(json::parse(raw->body)["display"], "0.7");
  auto bad = client.Post("/sessions/" + id + "/commands", "{}", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto parse_error = client.Post("/sessions/" + id + "/commands", "(Probability-of", "text/plain");
  ASSERT_TRUE(parse_error);
  EXPECT_EQ(parse_error->status, 422);

  auto net = client.Get("/sessions/" + id + "/network");
  ASSERT_TRUE(net);
  EXPECT_EQ(net->status, 200);
  EXPECT_TRUE(json::parse(net->body).contains("nodes"));
  EXPECT_EQ(status_of(client.Get("/sessions/ffffffffffffffff/network")), 404);

  stream.join();
  EXPECT_NE(events.find("event: assuming\ndata: "), std::string::npos);
  EXPECT_NE(events.find("\"text\":\"(Independent evidence-for (radio 1) (news 1))\""), std::string::npos);

  EXPECT_EQ(status_of(client.Delete("/sessions/" + id)), 200);
  EXPECT_EQ(status_of(client.Delete("/sessions/" + id)), 404);
}

}  // namespace
}  // namespace hum
