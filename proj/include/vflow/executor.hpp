#pragma once

// Step-debuggable execution of vDocuments against the mock provider.
//
// A session replays the token game of the compiled net: a task is eligible
// when it is in the runnable set, unresolved, all of its `after` tasks are
// resolved and all of its input places hold a token. Tasks that can no longer
// become enabled are resolved as skipped ("dead path") so that every run
// ends with each runnable task recorded exactly once.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vflow/cloud.hpp"
#include "vflow/petri.hpp"
#include "vflow/vdocument.hpp"

namespace vflow::exec {

enum class Status { ready, paused, interrupted, finished, failed };
enum class Outcome { ok, skipped, error };

std::string_view to_string(Status status);
std::string_view to_string(Outcome outcome);

struct LogRecord {
  std::uint64_t seq = 0;
  std::string task;
  std::vector<std::uint64_t> calls;  // provider call-log seqs
  Outcome outcome = Outcome::ok;
  std::string note;

  bool operator==(const LogRecord&) const = default;
};

struct ExecutionLog {
  std::vector<LogRecord> records;

  bool operator==(const ExecutionLog&) const = default;
};

/// `seq task=<id> outcome=<ok|skipped|error> calls=<n> note=<...>`
std::string format_record(const LogRecord& record);
/// Task lines, each followed by its provider calls indented two spaces.
std::string export_log(const ExecutionLog& log, const std::vector<cloud::CallRecord>& calls);

/// Picks one task out of the eligible members of a choice group.
using ChoicePolicy = std::function<std::string(const std::vector<std::string>& eligible)>;
std::string lowest_id_policy(const std::vector<std::string>& eligible);

/// Runs an external_command body; returns its exit status.
using CommandRunner = std::function<int(const std::string& command)>;

struct SessionOptions {
  int max_retries = 3;
  int pending_steps = 0;
  ChoicePolicy choice = lowest_id_policy;
  CommandRunner command_runner;  // empty: commands are recorded, not run
};

/// Single-producer/single-consumer safe queue of event names.
class EventQueue {
 public:
  void push(std::string event);
  std::vector<std::string> drain();

 private:
  std::mutex mutex_;
  std::deque<std::string> events_;
};

struct StepResult {
  std::vector<LogRecord> records;  // appended during this step
  Status status = Status::ready;
  std::optional<std::string> task;  // executed, interrupted or paused-at task
};

class Session {
 public:
  /// Throws Error(UnknownScope) when no task originates from `scope`.
  Session(VDocument doc, std::optional<std::string> scope = std::nullopt,
          SessionOptions options = {});

  /// Executes the next eligible task, ignoring breakpoints.
  /// Throws Error(NotSteppable) unless status is ready or paused.
  StepResult step();
  /// One iteration of run(): like step() but pauses before a breakpoint task.
  StepResult run_step();
  /// Steps until finished, failed, interrupted or paused at a breakpoint.
  void run();
  /// interrupted -> paused; the interrupted task becomes eligible again.
  void resume();

  /// Safe to call from another thread than the one stepping.
  void raise_event(std::string event);
  void add_breakpoint(const std::string& task);
  void remove_breakpoint(const std::string& task);

  const VDocument& doc() const { return doc_; }
  const std::optional<std::string>& scope() const { return scope_; }
  Status status() const { return status_; }
  const std::set<std::string>& completed() const { return resolved_; }
  const std::set<std::string>& runnable() const { return runnable_; }
  const std::set<std::string>& breakpoints() const { return breakpoints_; }
  /// Tasks whose token moved (ok, or skipped by an event), in order.
  const std::vector<std::string>& fired() const { return fired_; }
  const ExecutionLog& log() const { return log_; }
  const Marking& marking() const { return marking_; }
  const cloud::ProviderState& provider() const { return provider_.state(); }
  std::uint64_t steps_taken() const { return steps_taken_; }

  /// export_log() over this session's records and provider calls.
  std::string export_text() const;

 private:
  StepResult advance(bool honor_breakpoints);
  bool enabled(const TaskSpec& task) const;
  bool after_resolved(const TaskSpec& task) const;
  bool eligible(const TaskSpec& task) const;
  bool has_handler(const TaskSpec& task, const std::string& event) const;
  void fire_token(const TaskSpec& task);
  LogRecord& record(const std::string& task, Outcome outcome, std::string note,
                    std::vector<std::uint64_t> calls = {});
  void execute(const TaskSpec& task, bool retry_armed, StepResult& result);
  void resolve_dead(StepResult& result);
  bool finish_if_done(StepResult& result);

  VDocument doc_;
  std::optional<std::string> scope_;
  SessionOptions options_;
  cloud::MockProvider provider_;
  std::set<std::string> runnable_;
  std::set<std::string> resolved_;
  std::set<std::string> breakpoints_;
  std::vector<std::string> fired_;
  std::deque<std::string> active_events_;
  std::unique_ptr<EventQueue> queue_;
  std::optional<std::string> resume_past_;  // breakpoint to pass once after pausing
  Marking marking_;
  ExecutionLog log_;
  Status status_ = Status::ready;
  std::uint64_t steps_taken_ = 0;
};

Session open_session(VDocument doc, std::optional<std::string> scope = std::nullopt,
                     SessionOptions options = {});

/// Tasks of `scope` plus their transitive `after` ancestors; all tasks when empty.
std::set<std::string> runnable_closure(const VDocument& doc, const std::optional<std::string>& scope);

/// Place with tokens before any task runs: inputs never produced by a task.
Marking initial_token_view(const VDocument& doc);

// ---------------------------------------------------------------------------
// Scheduling

using Timestamp = std::chrono::sys_seconds;

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_utc(Timestamp t);
/// Parses `YYYY-MM-DDTHH:MM[:SS]Z`; nullopt when malformed.
std::optional<Timestamp> parse_utc(std::string_view text);

class ClockSource {
 public:
  enum class Kind { wall, simulated };

  static ClockSource wall() { return ClockSource(Kind::wall, Timestamp{}); }
  static ClockSource simulated(Timestamp start) { return ClockSource(Kind::simulated, start); }

  Kind kind() const { return kind_; }
  Timestamp now() const;
  /// Simulated clocks move forward only; earlier targets are ignored.
  void advance_to(Timestamp t);
  void advance(std::chrono::seconds d) { advance_to(now() + d); }
  /// Wall clocks sleep until `t`; simulated clocks jump to it.
  void wait_until(Timestamp t);

 private:
  ClockSource(Kind kind, Timestamp now) : kind_(kind), now_(now) {}
  Kind kind_;
  Timestamp now_;
};

/// Fire times in (from, until]; a once schedule fires at `from` itself.
std::vector<Timestamp> schedule_points(const ScheduleSpec& spec, Timestamp from, Timestamp until);

struct ScheduledRun {
  Timestamp fire_time;
  ExecutionLog log;
  Status status = Status::ready;
  std::vector<cloud::CallRecord> calls;
};

/// Runs a fresh session to completion at each schedule point, in order.
/// Throws Error(NoSchedule) when the document has no schedule.
std::vector<ScheduledRun> schedule_runs(const VDocument& doc, ClockSource& clock, Timestamp until,
                                        const SessionOptions& options = {});

}  // namespace vflow::exec
