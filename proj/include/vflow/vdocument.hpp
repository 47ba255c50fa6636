#pragma once

// Compilation of validated plans into vDocuments, and their JSON form.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vflow/cloud.hpp"
#include "vflow/diagnostic.hpp"
#include "vflow/error.hpp"
#include "vflow/petri.hpp"
#include "vflow/repository.hpp"

namespace vflow {

struct ScheduleSpec {
  enum class Kind { once, every, daily };

  Kind kind = Kind::once;
  std::optional<std::int64_t> every;  // seconds, kind == every
  std::optional<std::string> at;      // "HH:MM" UTC, kind == daily

  static ScheduleSpec once() { return {Kind::once, std::nullopt, std::nullopt}; }
  static ScheduleSpec every_seconds(std::int64_t s) { return {Kind::every, s, std::nullopt}; }
  static ScheduleSpec daily(std::string hh_mm) { return {Kind::daily, std::nullopt, std::move(hh_mm)}; }

  /// Parses the CLI form `daily@HH:MM`, `every@SECONDS` or `once`.
  static std::optional<ScheduleSpec> parse(std::string_view text);
  /// True when exactly the fields demanded by kind are present and well-formed.
  bool valid() const;
  std::string to_cli() const;

  bool operator==(const ScheduleSpec&) const = default;
};

std::string_view to_string(ScheduleSpec::Kind kind);

struct EventHandler {
  std::string event;
  EventAction action = EventAction::interrupt;

  bool operator==(const EventHandler&) const = default;
};

struct TaskSpec {
  std::string id;
  std::string origin_plan;
  std::optional<TaskCall> calls;
  std::vector<cloud::ProviderOp> provider_ops;
  std::optional<std::string> command;  // external_command entries
  std::vector<std::string> after;
  std::optional<std::string> choice_group;
  std::vector<EventHandler> on_event;
  // Places of the flattened net around this task; the executor's token view.
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  bool operator==(const TaskSpec&) const = default;
};

struct VDocument {
  int format_version = 1;
  std::string plan;
  std::string digest_alg = "sha-256";
  std::string source_digest;
  std::optional<ScheduleSpec> schedule;
  std::vector<TaskSpec> tasks;  // topological order, ties broken by id

  const TaskSpec* find_task(std::string_view id) const;
  bool operator==(const VDocument&) const = default;
};

/// Compilation failure; carries the validator findings that caused it.
class CompileError : public Error {
 public:
  CompileError(ErrorCode code, const std::string& message, std::vector<Diagnostic> diagnostics = {})
      : Error(code, message), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Throws CompileError with NotValidated, CyclicDependency or BindFailure.
VDocument compile(const PlanSet& set, const Repository& repo,
                  const std::optional<ScheduleSpec>& schedule = std::nullopt);

/// Canonical JSON: fixed key order, two-space indent, LF, trailing newline.
std::string emit(const VDocument& doc);
/// Throws Error(DocumentSyntax).
VDocument parse_vdoc(std::string_view json);

std::string sha256_hex(std::string_view data);
/// SHA-256 over canonical plan text followed by the canonical manifest.
std::string source_digest(const PlanSet& set, const Repository& repo);

}  // namespace vflow
