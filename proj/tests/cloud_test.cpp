#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/gen.hpp"
#include "vflow/cloud.hpp"
#include "vflow/error.hpp"

namespace vflow::cloud {
namespace {

using vflow::testing::Rng;

ProviderOp op(OpKind kind, std::map<std::string, std::string> params) { return {kind, std::move(params)}; }

TEST(Invoke, RunInstanceIssuesSequentialIds) {
  auto [state, result] = invoke({}, op(OpKind::run_instance, {{"count", "2"}, {"image", "base"}}));
  ASSERT_TRUE(result.ok());
  EXPECT_EQ(result.ids, (std::vector<std::string>{"i-0001", "i-0002"}));
  EXPECT_EQ(result.text, "i-0001,i-0002");
  EXPECT_EQ(state.instances.at("i-0001"), InstanceState::running);
  EXPECT_EQ(state.instances.at("i-0002"), InstanceState::running);
  ASSERT_EQ(state.call_log.size(), 1u);
  EXPECT_EQ(state.call_log[0].seq, 1u);
}

TEST(Invoke, TerminateTwice) {
  MockProvider p;
  p.invoke(op(OpKind::run_instance, {{"count", "1"}, {"image", "base"}}));
  EXPECT_TRUE(p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0001"}})).ok());
  EXPECT_EQ(p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0001"}})).error, ErrorCode::AlreadyTerminated);
  EXPECT_EQ(p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0042"}})).error, ErrorCode::UnknownId);
  EXPECT_EQ(p.state().instances.at("i-0001"), InstanceState::terminated);
  EXPECT_EQ(p.state().call_log.size(), 4u);
}

TEST(Invoke, ParamChecks) {
  MockProvider p;
  EXPECT_EQ(p.invoke(op(OpKind::run_instance, {{"count", "2"}})).error, ErrorCode::MissingParam);
  EXPECT_EQ(p.invoke(op(OpKind::run_instance, {{"count", "0"}, {"image", "x"}})).error, ErrorCode::TypeMismatch);
  EXPECT_EQ(p.invoke(op(OpKind::put_object, {{"bucket", "b"}})).error, ErrorCode::MissingParam);
  EXPECT_EQ(p.invoke(op(OpKind::wait_job, {{"job_id", "j-0009"}})).error, ErrorCode::UnknownId);
  EXPECT_TRUE(p.state().instances.empty());
  EXPECT_EQ(p.state().next_instance, 1u);
}

TEST(Invoke, ObjectsAndJobs) {
  MockProvider p;
  EXPECT_EQ(p.invoke(op(OpKind::get_object, {{"bucket", "b"}, {"key", "k"}})).error, ErrorCode::UnknownId);
  EXPECT_EQ(p.invoke(op(OpKind::put_object, {{"bucket", "b"}, {"key", "k"}, {"size", "12"}})).text, "b/k");
  EXPECT_EQ(p.invoke(op(OpKind::get_object, {{"bucket", "b"}, {"key", "k"}})).text, "b/k size=12");
  EXPECT_EQ(p.invoke(op(OpKind::submit_job, {{"command", "go"}})).text, "j-0001");
  EXPECT_EQ(p.state().jobs.at("j-0001"), JobState::queued);
  EXPECT_EQ(p.invoke(op(OpKind::wait_job, {{"job_id", "j-0001"}})).text, "j-0001 done");
  EXPECT_EQ(p.state().jobs.at("j-0001"), JobState::done);
  EXPECT_TRUE(p.invoke(op(OpKind::wait_job, {{"job_id", "j-0001"}})).ok());
}

TEST(Invoke, PendingStepsKnob) {
  MockProvider p(2);
  p.invoke(op(OpKind::run_instance, {{"count", "1"}, {"image", "base"}}));
  EXPECT_EQ(p.state().instances.at("i-0001"), InstanceState::pending);
  EXPECT_EQ(p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0001"}})).error, ErrorCode::NotRunning);
  EXPECT_TRUE(p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0001"}})).ok());
}

TEST(Export, LineFormat) {
  MockProvider p;
  p.invoke(op(OpKind::run_instance, {{"count", "2"}, {"image", "base"}}));
  p.invoke(op(OpKind::put_object, {{"bucket", "b"}, {"key", "has space"}}));
  p.invoke(op(OpKind::terminate_instance, {{"instance_id", "i-0009"}}));
  EXPECT_EQ(export_call_log(p.state().call_log),
            "1 run_instance count=2 image=base -> ok i-0001,i-0002\n"
            "2 put_object bucket=b key=\"has space\" -> ok b/has space\n"
            "3 terminate_instance instance_id=i-0009 -> error UnknownId: no instance i-0009\n");
  EXPECT_EQ(kProviderName, "mock-ec2");
}

std::vector<ProviderOp> random_ops(Rng& rng, int n) {
  std::vector<ProviderOp> ops;
  for (int i = 0; i < n; ++i) {
    const std::string id = std::to_string(rng.uniform(1, 4));
    switch (rng.uniform(0, 6)) {
      case 0: ops.push_back(op(OpKind::run_instance, {{"count", std::to_string(rng.uniform(0, 3))}, {"image", "base"}})); break;
      case 1: ops.push_back(op(OpKind::terminate_instance, {{"instance_id", "i-000" + id}})); break;
      case 2: ops.push_back(op(OpKind::put_object, {{"bucket", "b"}, {"key", "k" + id}})); break;
      case 3: ops.push_back(op(OpKind::get_object, {{"bucket", "b"}, {"key", "k" + id}})); break;
      case 4: ops.push_back(op(OpKind::submit_job, {{"command", "c"}})); break;
      case 5: ops.push_back(op(OpKind::wait_job, {{"job_id", "j-000" + id}})); break;
      default: ops.push_back(op(OpKind::wait_job, {})); break;
    }
  }
  return ops;
}

TEST(Property, LogSeqDeterminismReplay) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const int pending = rng.uniform(0, 2);
    const auto ops = random_ops(rng, rng.uniform(0, 30));
    MockProvider a(pending), b(pending);
    for (const auto& o : ops) a.invoke(o);
    for (const auto& o : ops) b.invoke(o);
    ASSERT_EQ(a.state().call_log.size(), ops.size());
    for (std::size_t k = 0; k < ops.size(); ++k) EXPECT_EQ(a.state().call_log[k].seq, k + 1);
    EXPECT_EQ(export_call_log(a.state().call_log), export_call_log(b.state().call_log));
    EXPECT_EQ(a.state(), b.state());
    EXPECT_EQ(replay(a.state().call_log, pending), a.state());
  }
}

TEST(Property, AppendOnlyLog) {
  Rng rng(23);
  MockProvider p;
  std::vector<CallRecord> seen;
  for (const auto& o : random_ops(rng, 100)) {
    p.invoke(o);
    const auto& log = p.state().call_log;
    ASSERT_EQ(log.size(), seen.size() + 1);
    EXPECT_TRUE(std::equal(seen.begin(), seen.end(), log.begin()));
    seen = log;
  }
}

}  // namespace
}  // namespace vflow::cloud
