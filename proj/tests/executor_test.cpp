#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <thread>

#include "support/fixtures.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"
#include "vflow/executor.hpp"

namespace vflow::exec {
namespace {

using namespace std::chrono;
using vflow::testing::Rng;

VDocument doc_for(const vflow::testing::PlanFixture& f) {
  return compile(vflow::testing::load_plan(f.file), Repository::load_manifest(vflow::testing::fixture_path(f.manifest)));
}

VDocument demo_doc() { return doc_for({"demo.vplan", "repo.manifest"}); }

TaskSpec& task(VDocument& doc, const std::string& id) {
  return *std::find_if(doc.tasks.begin(), doc.tasks.end(), [&](const TaskSpec& t) { return t.id == id; });
}

Timestamp at(int y, unsigned m, unsigned d, int hh = 0, int mm = 0) {
  return sys_days{year{y} / month{m} / day{d}} + hours(hh) + minutes(mm);
}

std::map<std::string, LogRecord> by_task(const ExecutionLog& log) {
  std::map<std::string, LogRecord> out;
  for (const auto& r : log.records) out[r.task] = r;
  return out;
}

TEST(Session, DemoGoldenRun) {
  auto s = open_session(demo_doc());
  s.run();
  EXPECT_EQ(s.status(), Status::finished);
  EXPECT_EQ(s.export_text() + "status=finished\n", vflow::testing::read_fixture("demo.run.log"));
  EXPECT_EQ(cloud::export_call_log(s.provider().call_log), vflow::testing::read_fixture("demo.calls.log"));
  EXPECT_EQ(s.marking(), (Marking{{"done", 1}}));
}

TEST(Session, RecordFormat) {
  LogRecord r{3, "batch.process", {2, 3, 4}, Outcome::ok, ""};
  EXPECT_EQ(format_record(r), "3 task=batch.process outcome=ok calls=3 note=");
}

TEST(Session, ChainMarkingAfterOneStep) {
  auto s = open_session(doc_for({"plans/chain.vplan", "repo.manifest"}));
  EXPECT_EQ(s.marking(), (Marking{{"s", 1}}));
  auto r = s.step();
  EXPECT_EQ(r.task, std::optional<std::string>("t1"));
  EXPECT_EQ(s.marking(), (Marking{{"p", 1}}));
  EXPECT_EQ(s.status(), Status::ready);
}

TEST(Session, StepAndRunAgree) {
  for (const auto& f : vflow::testing::plan_fixtures()) {
    auto a = open_session(doc_for(f));
    a.run();
    auto b = open_session(doc_for(f));
    int guard = 0;
    while ((b.status() == Status::ready || b.status() == Status::paused) && guard++ < 100) b.step();
    EXPECT_EQ(a.log(), b.log()) << f.file;
    EXPECT_EQ(a.provider(), b.provider()) << f.file;
    EXPECT_EQ(a.status(), b.status()) << f.file;
    EXPECT_EQ(a.marking(), b.marking()) << f.file;
  }
}

TEST(Session, EveryRunnableTaskRecordedOnceAfterItsDependencies) {
  for (const auto& f : vflow::testing::plan_fixtures()) {
    auto s = open_session(doc_for(f));
    s.run();
    std::map<std::string, std::uint64_t> seq;
    for (const auto& r : s.log().records) {
      EXPECT_TRUE(seq.emplace(r.task, r.seq).second) << f.file << " " << r.task;
    }
    if (s.status() != Status::finished) continue;
    EXPECT_EQ(seq.size(), s.runnable().size()) << f.file;
    for (const auto& t : s.doc().tasks) {
      for (const auto& a : t.after) EXPECT_LT(seq.at(a), seq.at(t.id)) << f.file << " " << t.id;
    }
  }
}

TEST(Session, ChoiceIsExclusive) {
  for (const auto* file : {"plans/choice.vplan", "plans/diamond.vplan"}) {
    auto doc = doc_for({file, "repo.manifest"});
    auto s = open_session(doc);
    s.run();
    ASSERT_EQ(s.status(), Status::finished);
    const auto records = by_task(s.log());
    std::map<std::string, int> ok_per_group;
    for (const auto& t : doc.tasks) {
      if (t.choice_group && records.at(t.id).outcome == Outcome::ok) ok_per_group[*t.choice_group]++;
    }
    for (const auto& [g, n] : ok_per_group) EXPECT_EQ(n, 1) << file << " " << g;
    EXPECT_FALSE(ok_per_group.empty());
  }
  auto s = open_session(doc_for({"plans/choice.vplan", "repo.manifest"}));
  s.run();
  const auto records = by_task(s.log());
  EXPECT_EQ(records.at("ta").outcome, Outcome::ok);
  EXPECT_EQ(records.at("tb").outcome, Outcome::skipped);
  EXPECT_EQ(records.at("tb").note, "choice s: ta selected");
}

TEST(Session, ChoicePolicyIsPluggable) {
  SessionOptions options;
  options.choice = [](const std::vector<std::string>& eligible) { return eligible.back(); };
  auto s = open_session(doc_for({"plans/choice.vplan", "repo.manifest"}), std::nullopt, options);
  s.run();
  EXPECT_EQ(by_task(s.log()).at("tb").outcome, Outcome::ok);
  EXPECT_EQ(by_task(s.log()).at("ta").outcome, Outcome::skipped);
}

// Independent closure over `after`: repeated sweeps until nothing is added.
std::set<std::string> closure_oracle(const VDocument& doc, const std::string& scope) {
  std::set<std::string> out;
  for (const auto& t : doc.tasks) {
    if (t.origin_plan == scope) out.insert(t.id);
  }
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& t : doc.tasks) {
      if (!out.count(t.id)) continue;
      for (const auto& a : t.after) grew |= out.insert(a).second;
    }
  }
  return out;
}

TEST(Scope, RunnableClosureMatchesOracle) {
  for (const auto& f : vflow::testing::plan_fixtures()) {
    auto doc = doc_for(f);
    std::set<std::string> plans;
    std::set<std::string> all;
    for (const auto& t : doc.tasks) {
      plans.insert(t.origin_plan);
      all.insert(t.id);
    }
    EXPECT_EQ(runnable_closure(doc, std::nullopt), all);
    for (const auto& p : plans) EXPECT_EQ(runnable_closure(doc, p), closure_oracle(doc, p)) << f.file << " " << p;
  }
}

TEST(Scope, ModuleRunExecutesOnlyTheClosure) {
  auto s = open_session(demo_doc(), std::string("sub"));
  s.run();
  EXPECT_EQ(s.status(), Status::finished);
  std::vector<std::string> tasks;
  for (const auto& r : s.log().records) tasks.push_back(r.task);
  EXPECT_EQ(tasks, (std::vector<std::string>{"provision", "batch.process"}));
  EXPECT_EQ(s.provider().call_log.size(), 4u);
}

TEST(Scope, UnknownScope) {
  try {
    open_session(demo_doc(), std::string("nope"));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownScope);
  }
}

TEST(Breakpoints, PauseThenContinue) {
  auto s = open_session(demo_doc());
  s.add_breakpoint("release");
  s.run();
  EXPECT_EQ(s.status(), Status::paused);
  EXPECT_EQ(s.log().records.size(), 2u);
  EXPECT_EQ(s.breakpoints(), std::set<std::string>{"release"});
  s.run();
  EXPECT_EQ(s.status(), Status::finished);
  EXPECT_EQ(s.export_text() + "status=finished\n", vflow::testing::read_fixture("demo.run.log"));

  auto t = open_session(demo_doc());
  t.add_breakpoint("provision");
  t.remove_breakpoint("provision");
  t.run();
  EXPECT_EQ(t.status(), Status::finished);
}

TEST(Breakpoints, StepIgnoresThem) {
  auto s = open_session(demo_doc());
  s.add_breakpoint("provision");
  auto r = s.step();
  EXPECT_EQ(r.task, std::optional<std::string>("provision"));
  EXPECT_EQ(r.records.size(), 1u);
}

TEST(Events, InterruptAndResume) {
  auto s = open_session(demo_doc());
  s.step();
  s.raise_event("overload");
  auto r = s.step();
  EXPECT_EQ(r.status, Status::interrupted);
  EXPECT_EQ(r.task, std::optional<std::string>("batch.process"));
  EXPECT_TRUE(r.records.empty());
  try {
    s.step();
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSteppable);
  }
  s.resume();
  EXPECT_EQ(s.status(), Status::paused);
  s.run();
  EXPECT_EQ(s.status(), Status::finished);
  EXPECT_EQ(s.export_text() + "status=finished\n", vflow::testing::read_fixture("demo.run.log"));
}

TEST(Events, UnhandledEventsAreDropped) {
  auto s = open_session(demo_doc());
  s.raise_event("nobody");
  s.run();
  EXPECT_EQ(s.status(), Status::finished);
}

TEST(Events, SkipMovesTheToken) {
  auto s = open_session(doc_for({"plans/events.vplan", "events.manifest"}));
  s.raise_event("flaky");
  s.step();
  ASSERT_EQ(s.status(), Status::failed);
  const auto fetch = by_task(s.log()).at("fetch");
  EXPECT_EQ(fetch.outcome, Outcome::error);
  EXPECT_EQ(fetch.calls.size(), 4u);
  EXPECT_EQ(fetch.note, "retries=3/3; UnknownId: no object inbox/missing.csv");

  // With the object present fetch succeeds; report is then skipped by event.
  auto doc = doc_for({"plans/events.vplan", "events.manifest"});
  auto& ops = task(doc, "fetch").provider_ops;
  ops.insert(ops.begin(), cloud::ProviderOp{cloud::OpKind::put_object, {{"bucket", "inbox"}, {"key", "missing.csv"}}});
  auto t = open_session(doc);
  t.raise_event("quiet");
  t.run();
  EXPECT_EQ(t.status(), Status::finished);
  const auto records = by_task(t.log());
  EXPECT_EQ(records.at("report").outcome, Outcome::skipped);
  EXPECT_EQ(records.at("report").note, "event quiet: skip");
  EXPECT_EQ(records.at("close").outcome, Outcome::ok);
  EXPECT_EQ(t.marking(), (Marking{{"e", 1}}));
}

TEST(Events, CommandsRecordedOrRun) {
  auto doc = doc_for({"plans/events.vplan", "events.manifest"});
  task(doc, "fetch").provider_ops.clear();
  auto s = open_session(doc);
  s.run();
  EXPECT_EQ(by_task(s.log()).at("report").note, "command not run: send-note done");

  std::vector<std::string> ran;
  SessionOptions options;
  options.command_runner = [&](const std::string& c) {
    ran.push_back(c);
    return 2;
  };
  auto t = open_session(doc, std::nullopt, options);
  t.run();
  EXPECT_EQ(ran, std::vector<std::string>{"send-note done"});
  EXPECT_EQ(t.status(), Status::failed);
  EXPECT_EQ(by_task(t.log()).at("report").note, "command exited with status 2");
}

TEST(Events, QueueIsFifo) {
  EventQueue q;
  q.push("a");
  q.push("b");
  q.push("c");
  EXPECT_EQ(q.drain(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(q.drain().empty());
}

TEST(Events, RaisedFromAnotherThread) {
  EventQueue q;
  std::thread producer([&] {
    for (int i = 0; i < 1000; ++i) q.push(std::to_string(i));
  });
  std::vector<std::string> got;
  while (got.size() < 1000) {
    for (auto& e : q.drain()) got.push_back(std::move(e));
  }
  producer.join();
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(got[i], std::to_string(i));
}

TEST(SessionProperty, DeterministicAndMarkingFollowsTokenGame) {
  Rng rng(99);
  const auto repo = vflow::testing::demo_repo();
  int runs = 0;
  for (int i = 0; i < 150; ++i) {
    auto set = vflow::testing::random_structured_planset(rng);
    auto doc = compile(set, repo);
    auto flat = flatten(set);
    auto a = open_session(doc);
    auto b = open_session(doc);
    ASSERT_EQ(a.marking(), initial_marking(flat));
    int guard = 0;
    while (a.status() == Status::ready && guard++ < 200) {
      a.step();
      Marking m = initial_marking(flat);
      for (const auto& t : a.fired()) m = fire(flat, m, t);
      ASSERT_EQ(a.marking(), m);
    }
    b.run();
    EXPECT_EQ(a.export_text(), b.export_text());
    EXPECT_EQ(a.status(), b.status());
    if (a.status() == Status::finished && a.log().records.back().outcome != Outcome::error) {
      EXPECT_TRUE(is_clean_final(flat, a.marking())) << to_string(a.marking());
    }
    ++runs;
  }
  EXPECT_EQ(runs, 150);
}

TEST(Clock, FormatAndParse) {
  EXPECT_EQ(format_utc(at(2024, 3, 9, 7, 5)), "2024-03-09T07:05:00Z");
  EXPECT_EQ(parse_utc("2024-03-09T07:05Z"), at(2024, 3, 9, 7, 5));
  EXPECT_EQ(parse_utc("2024-03-09T07:05:00Z"), at(2024, 3, 9, 7, 5));
  EXPECT_FALSE(parse_utc("2024-02-30T00:00Z"));
  EXPECT_FALSE(parse_utc("2024-03-09 07:05"));
  auto c = ClockSource::simulated(at(2024, 1, 1));
  c.advance(hours(2));
  EXPECT_EQ(c.now(), at(2024, 1, 1, 2));
  c.advance_to(at(2023, 1, 1));
  EXPECT_EQ(c.now(), at(2024, 1, 1, 2));
  c.wait_until(at(2024, 1, 2));
  EXPECT_EQ(c.now(), at(2024, 1, 2));
  EXPECT_EQ(c.kind(), ClockSource::Kind::simulated);
}

TEST(Schedule, PointsMatchMinuteScan) {
  const auto from = at(2024, 1, 1);
  EXPECT_EQ(schedule_points(ScheduleSpec::daily("00:00"), from, from + hours(72) + minutes(30)).size(), 3u);
  EXPECT_EQ(schedule_points(ScheduleSpec::every_seconds(3600), from, from + hours(2)).size(), 2u);
  EXPECT_EQ(schedule_points(ScheduleSpec::daily("00:00"), at(2024, 1, 1, 12), at(2024, 1, 4, 12)).size(), 3u);
  EXPECT_EQ(schedule_points(ScheduleSpec::once(), from, from + hours(5)), std::vector<Timestamp>{from});

  Rng rng(5);
  for (int i = 0; i < 60; ++i) {
    const auto start = at(2024, 1, 1) + minutes(rng.uniform(0, 3000));
    const auto until = start + minutes(rng.uniform(0, 4 * 1440));
    const int hh = rng.uniform(0, 23), mm = rng.uniform(0, 59);
    char buf[6];
    std::snprintf(buf, sizeof buf, "%02d:%02d", hh, mm);
    auto points = schedule_points(ScheduleSpec::daily(buf), start, until);
    EXPECT_EQ(static_cast<int>(points.size()), vflow::testing::minute_scan_daily(start, until, hh, mm));
    for (const auto& p : points) EXPECT_TRUE(p > start && p <= until);
    const std::int64_t period = 60 * rng.uniform(1, 240);
    EXPECT_EQ(static_cast<int>(schedule_points(ScheduleSpec::every_seconds(period), start, until).size()),
              vflow::testing::minute_scan_every(start, until, period));
  }
}

TEST(Schedule, RunsOnSimulatedClock) {
  auto doc = compile(vflow::testing::load_plan("demo.vplan"), vflow::testing::demo_repo(), ScheduleSpec::daily("00:00"));
  auto clock = ClockSource::simulated(at(2024, 1, 1, 12));
  auto runs = schedule_runs(doc, clock, at(2024, 1, 4, 12));
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0].fire_time, at(2024, 1, 2));
  EXPECT_EQ(runs[2].fire_time, at(2024, 1, 4));
  for (const auto& r : runs) {
    EXPECT_EQ(r.status, Status::finished);
    EXPECT_EQ(cloud::export_call_log(r.calls), vflow::testing::read_fixture("demo.calls.log"));
  }
  EXPECT_GE(clock.now(), at(2024, 1, 4));

  try {
    auto unscheduled = demo_doc();
    schedule_runs(unscheduled, clock, at(2025, 1, 1));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSchedule);
  }
}

}  // namespace
}  // namespace vflow::exec
