#pragma once

// Provider boundary and the deterministic `mock-ec2` provider.
//
// The mock never consults a clock: instances become running on creation (or
// after `pending_steps` further calls) and jobs complete on wait_job.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vflow/error.hpp"

namespace vflow::cloud {

inline constexpr std::string_view kProviderName = "mock-ec2";

enum class OpKind { run_instance, terminate_instance, put_object, get_object, submit_job, wait_job };

std::string_view to_string(OpKind op);
std::optional<OpKind> parse_op_kind(std::string_view name);
/// Parameters every call of `op` must carry.
const std::vector<std::string>& required_params(OpKind op);

struct ProviderOp {
  OpKind op = OpKind::run_instance;
  std::map<std::string, std::string> params;

  bool operator==(const ProviderOp&) const = default;
};

enum class InstanceState { pending, running, terminated };
enum class JobState { queued, done };

std::string_view to_string(InstanceState state);
std::string_view to_string(JobState state);

struct OpResult {
  std::optional<ErrorCode> error;  // empty on success
  std::string text;                // e.g. "i-0001,i-0002" or the error message
  std::vector<std::string> ids;    // ids created or touched

  bool ok() const { return !error.has_value(); }
  bool operator==(const OpResult&) const = default;
};

struct CallRecord {
  std::uint64_t seq = 0;
  ProviderOp op;
  OpResult result;

  bool operator==(const CallRecord&) const = default;
};

struct ProviderState {
  std::map<std::string, InstanceState> instances;
  std::map<std::string, int> pending_left;  // instance id -> calls until running
  std::map<std::pair<std::string, std::string>, std::uint64_t> objects;  // (bucket, key) -> size
  std::map<std::string, JobState> jobs;
  std::vector<CallRecord> call_log;
  std::uint64_t next_instance = 1;
  std::uint64_t next_job = 1;
  int pending_steps = 0;

  bool operator==(const ProviderState&) const = default;
};

/// Pure transition of the mock provider. Failed calls leave the resources
/// untouched but are still appended to the call log.
std::pair<ProviderState, OpResult> invoke(ProviderState state, const ProviderOp& op);

/// Session-owned handle over a ProviderState; the adapter a real client would replace.
class MockProvider {
 public:
  explicit MockProvider(int pending_steps = 0) { state_.pending_steps = pending_steps; }

  const OpResult& invoke(const ProviderOp& op);
  const ProviderState& state() const { return state_; }

 private:
  ProviderState state_;
};

/// `seq op k=v k=v -> result`
std::string format_call(const CallRecord& record);
/// One format_call() line per record, LF-terminated.
std::string export_call_log(const std::vector<CallRecord>& log);

/// Rebuilds the final state by re-invoking each logged op from the empty state.
ProviderState replay(const std::vector<CallRecord>& log, int pending_steps = 0);

}  // namespace vflow::cloud
