#pragma once

// Repository of reusable task modules and the manifest format that stores it.
//
//   entry provision_vm kind=builtin
//     param count type=int required
//     param image type=string default="base"
//     op run_instance count={count} image={image}
//   entry notify kind=external_command command="send-note {msg}"
//     param msg type=string required

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vflow/cloud.hpp"
#include "vflow/petri.hpp"

namespace vflow {

enum class ParamType { integer, string, boolean };
enum class EntryKind { builtin, external_command };

std::string_view to_string(ParamType type);
std::string_view to_string(EntryKind kind);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::string;
  bool required = false;
  std::optional<std::string> default_value;

  bool operator==(const ParamSpec&) const = default;
};

struct ProviderOpTemplate {
  cloud::OpKind op = cloud::OpKind::run_instance;
  std::vector<std::pair<std::string, std::string>> params;  // key -> template with {placeholders}

  bool operator==(const ProviderOpTemplate&) const = default;
};

struct RepositoryEntry {
  std::string name;
  EntryKind kind = EntryKind::builtin;
  std::vector<ParamSpec> params;
  std::vector<ProviderOpTemplate> provider_ops;
  std::optional<std::string> command;  // external_command only

  const ParamSpec* find_param(std::string_view name) const;
  bool operator==(const RepositoryEntry&) const = default;
};

using Value = std::variant<std::int64_t, std::string, bool>;

std::string to_string(const Value& value);

struct BoundTask {
  std::string module;
  std::vector<std::pair<std::string, Value>> args;  // declaration order, defaults applied
  std::vector<cloud::ProviderOp> provider_ops;
  std::optional<std::string> command;
};

enum class ArgIssueKind { missing_required, unknown_arg, type_mismatch };

struct ArgIssue {
  ArgIssueKind kind;
  std::string param;
  std::string message;
};

/// The single signature check shared by bind() and the validator.
/// Issues come in argument order, then missing required params in declaration order.
std::vector<ArgIssue> check_args(const RepositoryEntry& entry, const TaskCall& call);

/// Parses `text` as a value of `type`; nullopt when it does not fit.
std::optional<Value> parse_value(ParamType type, std::string_view text);

/// Resolves arguments against the signature and instantiates provider-op
/// templates. Throws MissingRequired, UnknownArg or TypeMismatch.
BoundTask bind(const RepositoryEntry& entry, const TaskCall& call);

class Repository {
 public:
  Repository() = default;

  /// Throws IoError, ManifestSyntax, DuplicateEntry or BadTemplate.
  static Repository load_manifest(const std::filesystem::path& path);
  static Repository parse_manifest(std::string_view text, std::string source = "<memory>");

  /// Canonical manifest text.
  std::string save_manifest() const;
  void save_manifest(const std::filesystem::path& path) const;

  /// Throws DuplicateEntry, BadTemplate or ManifestSyntax.
  void add(RepositoryEntry entry);

  /// Throws NotFound.
  const RepositoryEntry& lookup(std::string_view name) const;
  const RepositoryEntry* find(std::string_view name) const;

  const std::vector<RepositoryEntry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<RepositoryEntry> entries_;
  std::string source_;
};

}  // namespace vflow
