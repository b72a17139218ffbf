#include <doctest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "harness.hpp"
#include "safeqa/config.hpp"
#include "safeqa/service.hpp"

using namespace safeqa;
using nlohmann::json;
using safeqa::testing::TempDir;

namespace {

constexpr const char* kUser = "user-secret";
constexpr const char* kModerator = "mod-secret";

config::ServiceConfig test_config(const TempDir& dir) {
  auto cfg = config::load(std::nullopt, [](const std::string&) { return std::nullopt; });
  cfg.store_dir = (dir.path() / "store").string();
  cfg.seed_jsonl = safeqa::testing::source_path("data/sample_corpus.jsonl");
  cfg.user_token = kUser;
  cfg.moderator_token = kModerator;
  cfg.log_level = "off";
  cfg.http_threads = 4;
  return cfg;
}

struct Server {
  explicit Server(const TempDir& dir, bool attach = true)
      : config(test_config(dir)), service(config) {
    if (attach) {
      system = service::System::open(config);
      service.attach(system.get());
    }
    port = service.start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Server() { service.stop(); }

  httplib::Headers auth(const char* token) const {
    return {{"Authorization", std::string("Bearer ") + token}};
  }
  httplib::Result ask(const json& body, const char* token = kUser) {
    return client->Post("/v1/ask", auth(token), body.dump(), "application/json");
  }
  httplib::Result queue(const std::string& query = "") {
    return client->Get("/v1/moderation/queue" + query, auth(kModerator));
  }
  httplib::Result resolve(const std::string& id, const json& body) {
    return client->Post("/v1/moderation/" + id + "/resolve", auth(kModerator), body.dump(),
                        "application/json");
  }

  config::ServiceConfig config;
  service::HttpService service;
  std::unique_ptr<service::System> system;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

std::uint64_t metric(const std::string& text, const std::string& series) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(series + " ", 0) == 0) return std::stoull(line.substr(series.size() + 1));
  }
  return 0;
}

}  // namespace

TEST_CASE("503 until a system is attached; health reports versions") {
  TempDir dir("svc-boot");
  Server s(dir, false);
  auto health = s.client->Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 503);
  auto body = json::parse(health->body);
  CHECK(body["corpus_version"] == 0);
  CHECK(body["index_version"] == 0);
  auto r = s.ask({{"text", "condom kitna safe hota hai"}});
  REQUIRE(r);
  CHECK(r->status == 503);
  CHECK(json::parse(r->body)["code"] == "unavailable");

  s.system = service::System::open(s.config);
  s.service.attach(s.system.get());
  health = s.client->Get("/v1/health");
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["corpus_version"] == 5);
}

TEST_CASE("ask validation and auth") {
  TempDir dir("svc-ask");
  Server s(dir);
  auto both = s.ask({{"text", "x"}, {"audio_uri", "mock://a"}});
  CHECK(both->status == 400);
  CHECK(json::parse(both->body)["code"] == "bad_request");
  CHECK_FALSE(json::parse(both->body)["trace_id"].get<std::string>().empty());
  CHECK(s.ask(json::object())->status == 400);
  CHECK(s.client->Post("/v1/ask", s.auth(kUser), "{not json", "application/json")->status == 400);

  auto anonymous = s.client->Post("/v1/ask", R"({"text":"hi"})", "application/json");
  CHECK(anonymous->status == 401);
  CHECK(s.ask({{"text", "hi"}}, "wrong")->status == 401);
  // Moderator endpoints reject the user token.
  CHECK(s.client->Get("/v1/moderation/queue", s.auth(kUser))->status == 401);
  CHECK(s.client->Get("/v1/nope")->status == 404);
}

TEST_CASE("duplicate question is answered from the corpus") {
  TempDir dir("svc-dup");
  Server s(dir);
  auto r = s.ask({{"text", "kya nightfall hona bimari hai"}});
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK_FALSE(r->get_header_value("X-Trace-Id").empty());
  auto env = json::parse(r->body);
  CHECK(env["route_taken"] == "retrieval");
  CHECK(env["provenance"]["record_id"] == "kab-0004");
  CHECK(env["answer_text"].get<std::string>().find("swapnadosh") != std::string::npos);
}

TEST_CASE("moderation loop over http") {
  TempDir dir("svc-mod");
  Server s(dir);
  auto empty = s.queue();
  CHECK(empty->status == 200);
  CHECK(json::parse(empty->body) == json::array());

  const std::string question = "cricket match ka score batao";
  auto env = json::parse(s.ask({{"text", question}})->body);
  REQUIRE(env["route_taken"] == "escalated");
  const std::string id = env["moderation_item_id"];

  auto listed = json::parse(s.queue()->body);
  REQUIRE(listed.size() == 1);
  CHECK(listed[0]["id"] == id);
  CHECK(listed[0]["status"] == "open");

  CHECK(s.resolve("no-such-item", {{"answer", "ok"}})->status == 404);
  auto pii = s.resolve(id, {{"answer", "Call me at 9876543210 for details."}});
  CHECK(pii->status == 422);
  CHECK(s.resolve(id, {{"theme", "x"}})->status == 400);

  auto ok = s.resolve(id, {{"answer", "Hum sirf swasthya ke sawalon ka jawab dete hain."},
                           {"theme", "meta"}});
  REQUIRE(ok->status == 200);
  auto resolved = json::parse(ok->body);
  CHECK(resolved["corpus_version"] == 6);
  CHECK(resolved["index_version"] == 6);

  auto again = json::parse(s.ask({{"text", question}})->body);
  CHECK(again["route_taken"] == "retrieval");
  CHECK(again["provenance"]["record_id"] == resolved["record_id"]);

  CHECK(s.resolve(id, {{"answer", "second try"}})->status == 409);
  CHECK(json::parse(s.queue()->body).empty());
  CHECK(json::parse(s.queue("?status=all")->body).size() == 1);
}

TEST_CASE("queue paging and cursor validation") {
  TempDir dir("svc-page");
  Server s(dir);
  for (const char* q : {"cricket match ka score batao", "kal ka mausam kaisa rahega",
                        "petrol ka daam kya hai"}) {
    s.ask({{"text", q}});
  }
  auto first = s.queue("?limit=2");
  REQUIRE(first->status == 200);
  CHECK(json::parse(first->body).size() == 2);
  const std::string cursor = first->get_header_value("X-Next-Cursor");
  REQUIRE_FALSE(cursor.empty());
  auto second = s.queue("?limit=2&cursor=" + cursor);
  CHECK(json::parse(second->body).size() == 1);
  CHECK_FALSE(second->has_header("X-Next-Cursor"));

  CHECK(s.queue("?cursor=abc")->status == 400);
  CHECK(s.queue("?limit=0")->status == 400);
  CHECK(s.queue("?status=weird")->status == 400);
}

TEST_CASE("corpus import") {
  TempDir dir("svc-import");
  Server s(dir);
  std::ifstream in(safeqa::testing::source_path("data/fixtures/ingest_5.jsonl"));
  std::stringstream buf;
  buf << in.rdbuf();
  auto r = s.client->Post("/v1/corpus/import", s.auth(kModerator), buf.str(),
                          "application/x-ndjson");
  REQUIRE(r->status == 200);
  auto report = json::parse(r->body);
  CHECK(report["accepted"] == 5);
  CHECK(s.client->Post("/v1/corpus/import", s.auth(kUser), buf.str(), "application/x-ndjson")
            ->status == 401);
}

TEST_CASE("metrics move by exactly one per ask") {
  TempDir dir("svc-metrics");
  Server s(dir);
  auto before = s.client->Get("/v1/metrics")->body;
  s.ask({{"text", "kya nightfall hona bimari hai"}});
  auto after = s.client->Get("/v1/metrics");
  CHECK(after->status == 200);
  const std::string series = "requests_total{route=retrieval}";
  CHECK(metric(after->body, series) == metric(before, series) + 1);
}
