#include <gtest/gtest.h>

#include <atomic>
#include <json.hpp>
#include <sstream>

#include "support/server.hpp"
#include "vflow/cli.hpp"
#include "vflow/error.hpp"

namespace vflow::service {
namespace {

using json = nlohmann::json;
using namespace std::chrono_literals;
using vflow::testing::RunningService;

json body(const httplib::Result& r) { return json::parse(r->body); }

httplib::Result put_plan(httplib::Client& c, const std::string& id, const std::string& text, std::uint64_t base,
                         const std::string& origin = "text") {
  json b{{"text", text}, {"base_revision", base}, {"origin", origin}};
  return c.Put(("/plans/" + id).c_str(), b.dump(), "application/json");
}

std::string cli(std::vector<std::string> args, int expected = 0) {
  args.insert(args.begin(), "vflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in;
  std::ostringstream out, err;
  EXPECT_EQ(cli_main(static_cast<int>(argv.size()), argv.data(), in, out, err), expected) << err.str();
  return out.str();
}

TEST(PlanStore, RevisionsAndConflicts) {
  PlanStore store;
  const auto text = vflow::testing::read_fixture("plans/chain.vplan");
  EXPECT_EQ(store.put("c", text, 0, Origin::text).kind, PutResult::Kind::accepted);
  EXPECT_EQ(store.get("c")->document.revision, 1u);
  auto stale = store.put("c", "garbage", 0, Origin::graphic);
  EXPECT_EQ(stale.kind, PutResult::Kind::conflict);
  EXPECT_EQ(stale.revision, 1u);
  auto invalid = store.put("c", "vplan x main {", 1, Origin::text);
  EXPECT_EQ(invalid.kind, PutResult::Kind::invalid);
  EXPECT_FALSE(invalid.diagnostics.empty());
  EXPECT_EQ(store.get("c")->document.text, text);
  EXPECT_EQ(store.changes("c", 0, 0ms), (std::vector<ChangeNotice>{{"c", 1, Origin::text}}));
  EXPECT_FALSE(store.get("missing"));
}

TEST(PlanStore, PersistsToDirectory) {
  vflow::testing::TempDir dir;
  const auto text = vflow::testing::read_fixture("plans/chain.vplan");
  {
    PlanStore store(dir.path());
    store.put("chain", text, 0, Origin::text);
  }
  PlanStore reloaded(dir.path());
  EXPECT_EQ(reloaded.ids(), std::vector<std::string>{"chain"});
  EXPECT_EQ(reloaded.get("chain")->document.text, text);
  EXPECT_EQ(reloaded.get("chain")->document.revision, 0u);
}

TEST(PlanStore, PlanIds) {
  EXPECT_TRUE(valid_plan_id("demo_1-a"));
  EXPECT_FALSE(valid_plan_id(""));
  EXPECT_FALSE(valid_plan_id("../etc"));
  EXPECT_FALSE(valid_plan_id("a.b"));
  EXPECT_FALSE(valid_plan_id(std::string(129, 'a')));
}

TEST(Http, GetAndPut) {
  RunningService svc;
  auto c = svc.client();
  auto got = c.Get("/plans/demo");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(body(got)["text"], vflow::testing::read_fixture("demo.vplan"));
  EXPECT_EQ(body(got)["revision"], 0);
  EXPECT_EQ(c.Get("/plans/none")->status, 404);

  const auto chain = vflow::testing::read_fixture("plans/chain.vplan");
  auto put = put_plan(c, "demo", chain, 0);
  EXPECT_EQ(put->status, 200);
  EXPECT_EQ(body(put)["revision"], 1);
  EXPECT_EQ(body(c.Get("/plans/demo"))["text"], chain);

  auto bad = put_plan(c, "demo", "vplan broken main { place }", 1);
  EXPECT_EQ(bad->status, 422);
  EXPECT_FALSE(body(bad)["diagnostics"].empty());
  EXPECT_EQ(c.Put("/plans/demo", "{not json", "application/json")->status, 400);
  EXPECT_EQ(c.Put("/plans/demo", R"({"text": "x"})", "application/json")->status, 400);
  EXPECT_EQ(put_plan(c, "demo", chain, 1, "paint")->status, 400);
  EXPECT_EQ(c.Get("/plans/demo/changes?since=x")->status, 400);
}

TEST(Http, StalePutIsRejectedWithoutSideEffects) {
  RunningService svc;
  auto c = svc.client();
  const auto chain = vflow::testing::read_fixture("plans/chain.vplan");
  ASSERT_EQ(put_plan(c, "demo", chain, 0, "graphic")->status, 200);
  const auto before = c.Get("/plans/demo")->body;
  auto stale = put_plan(c, "demo", vflow::testing::read_fixture("plans/diamond.vplan"), 0);
  EXPECT_EQ(stale->status, 409);
  EXPECT_EQ(body(stale)["code"], "Conflict");
  EXPECT_EQ(body(stale)["current_revision"], 1);
  EXPECT_EQ(c.Get("/plans/demo")->body, before);
  auto changes = body(c.Get("/plans/demo/changes?since=0"))["changes"];
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0], (json{{"plan_id", "demo"}, {"revision", 1}, {"origin", "graphic"}}));
  EXPECT_EQ(svc.service().plans().get("demo")->document.text, chain);
}

TEST(Http, OneNoticePerAcceptedWrite) {
  RunningService svc(100ms);
  auto c = svc.client();
  const auto text = vflow::testing::read_fixture("demo.vplan");
  for (std::uint64_t r = 0; r < 5; ++r) ASSERT_EQ(put_plan(c, "demo", text, r, r % 2 ? "graphic" : "text")->status, 200);
  put_plan(c, "demo", text, 2);
  auto changes = body(c.Get("/plans/demo/changes?since=0"))["changes"];
  ASSERT_EQ(changes.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(changes[i]["revision"], i + 1);
  EXPECT_EQ(body(c.Get("/plans/demo/changes?since=3"))["changes"].size(), 2u);
  EXPECT_TRUE(body(c.Get("/plans/demo/changes?since=5"))["changes"].empty());
}

TEST(Http, LongPollWakesOnWrite) {
  RunningService svc(5000ms);
  std::atomic<bool> done{false};
  json received;
  std::thread waiter([&] {
    auto c = svc.client();
    received = body(c.Get("/plans/demo/changes?since=0"));
    done = true;
  });
  std::this_thread::sleep_for(200ms);
  EXPECT_FALSE(done);
  auto c = svc.client();
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(put_plan(c, "demo", vflow::testing::read_fixture("demo.vplan"), 0, "graphic")->status, 200);
  waiter.join();
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2000ms);
  ASSERT_EQ(received["changes"].size(), 1u);
  EXPECT_EQ(received["changes"][0]["origin"], "graphic");
}

TEST(Http, ValidateAndCompileMatchCli) {
  RunningService svc;
  auto c = svc.client();
  const auto plan = vflow::testing::fixture_path("demo.vplan").string();
  const auto repo = vflow::testing::fixture_path("repo.manifest").string();

  auto v = c.Post("/plans/demo/validate", "", "application/json");
  ASSERT_EQ(v->status, 200);
  EXPECT_EQ(body(v)["ok"], true);
  EXPECT_EQ(body(v)["report"], cli({"validate", plan, "--repo", repo}));

  auto compiled = c.Post("/plans/demo/compile", R"({"schedule": "daily@00:00"})", "application/json");
  ASSERT_EQ(compiled->status, 200);
  EXPECT_EQ(compiled->body, cli({"compile", plan, "--repo", repo, "--schedule", "daily@00:00"}));
  EXPECT_EQ(compiled->body, vflow::testing::read_fixture("demo.vdoc.json"));
  auto object_form = c.Post("/plans/demo/compile", R"({"schedule": {"kind": "daily", "at": "00:00"}})",
                            "application/json");
  EXPECT_EQ(object_form->body, compiled->body);

  const auto rule = vflow::testing::read_fixture("rules/WF-04.vplan");
  ASSERT_EQ(put_plan(c, "bad", rule, 0)->status, 200);
  auto bad = c.Post("/plans/bad/validate", "", "application/json");
  EXPECT_EQ(body(bad)["ok"], false);
  EXPECT_EQ(body(bad)["diagnostics"][0]["code"], "WF-04");
  EXPECT_EQ(body(bad)["report"],
            cli({"validate", vflow::testing::fixture_path("rules/WF-04.vplan").string(), "--repo", repo}, 1));
  auto failed = c.Post("/plans/bad/compile", "", "application/json");
  EXPECT_EQ(failed->status, 422);
  EXPECT_EQ(body(failed)["code"], "NotValidated");
  EXPECT_EQ(c.Post("/plans/demo/compile", R"({"schedule": "hourly"})", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/plans/none/validate", "", "application/json")->status, 404);
}

TEST(Http, SessionLifecycle) {
  RunningService svc;
  auto c = svc.client();
  auto created = c.Post("/sessions", R"({"plan_id": "demo"})", "application/json");
  ASSERT_EQ(created->status, 201);
  const std::string id = body(created)["session_id"];
  const std::string base = "/sessions/" + id;

  auto step = c.Post((base + "/step").c_str(), "", "application/json");
  ASSERT_EQ(step->status, 200);
  EXPECT_EQ(body(step)["task"], "provision");
  EXPECT_EQ(body(step)["record"]["outcome"], "ok");
  EXPECT_EQ(body(step)["marking"], (json{{"batch.s", 1}}));

  EXPECT_EQ(c.Post((base + "/breakpoints").c_str(), R"({"task_id": "release"})", "application/json")->status, 200);
  EXPECT_EQ(c.Post((base + "/breakpoints").c_str(), R"({"task_id": "nope"})", "application/json")->status, 404);
  auto run = c.Post((base + "/run").c_str(), "", "application/json");
  EXPECT_EQ(body(run)["status"], "paused");
  EXPECT_EQ(body(run)["records"].size(), 1u);
  run = c.Post((base + "/run").c_str(), "", "application/json");
  EXPECT_EQ(body(run)["status"], "finished");

  auto state = body(c.Get(base.c_str()));
  EXPECT_EQ(state["status"], "finished");
  EXPECT_EQ(state["log_text"].get<std::string>() + "status=finished\n",
            vflow::testing::read_fixture("demo.run.log"));
  auto again = c.Post((base + "/step").c_str(), "", "application/json");
  EXPECT_EQ(again->status, 409);
  EXPECT_EQ(body(again)["code"], "NotSteppable");
  EXPECT_EQ(c.Get("/sessions/s-none")->status, 404);
}

TEST(Http, SessionEventsAndScopes) {
  RunningService svc;
  auto c = svc.client();
  const auto doc = vflow::testing::read_fixture("demo.vdoc.json");
  json req{{"vdocument", doc}};
  const std::string id = body(c.Post("/sessions", req.dump(), "application/json"))["session_id"];
  const std::string base = "/sessions/" + id;
  c.Post((base + "/step").c_str(), "", "application/json");
  auto ev = c.Post((base + "/events").c_str(), R"({"event": "overload"})", "application/json");
  EXPECT_EQ(ev->status, 202);
  auto step = c.Post((base + "/step").c_str(), "", "application/json");
  EXPECT_EQ(body(step)["status"], "interrupted");
  EXPECT_EQ(body(c.Post((base + "/resume").c_str(), "", "application/json"))["status"], "paused");
  EXPECT_EQ(body(c.Post((base + "/run").c_str(), "", "application/json"))["status"], "finished");

  json scoped{{"vdocument", json::parse(doc)}, {"module", "sub"}};
  const std::string sid = body(c.Post("/sessions", scoped.dump(), "application/json"))["session_id"];
  auto run = body(c.Post(("/sessions/" + sid + "/run").c_str(), "", "application/json"));
  EXPECT_EQ(run["records"].size(), 2u);

  json unknown{{"vdocument", doc}, {"module", "nope"}};
  auto rejected = c.Post("/sessions", unknown.dump(), "application/json");
  EXPECT_EQ(rejected->status, 422);
  EXPECT_EQ(body(rejected)["code"], "UnknownScope");
  EXPECT_EQ(c.Post("/sessions", R"({"vdocument": "{}"})", "application/json")->status, 422);
  EXPECT_EQ(c.Post("/sessions", "{}", "application/json")->status, 400);
}

}  // namespace
}  // namespace vflow::service
