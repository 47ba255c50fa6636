#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vflow {

enum class ErrorCode {
  // net construction and token game
  UnknownNode,
  NonBipartite,
  DuplicateArc,
  DuplicateNode,
  NoStart,
  AmbiguousStart,
  NoEnd,
  AmbiguousEnd,
  NotEnabled,
  UnknownTransition,
  CyclicHierarchy,
  MissingSubplan,
  // repository
  IoError,
  ManifestSyntax,
  DuplicateEntry,
  BadTemplate,
  NotFound,
  MissingRequired,
  UnknownArg,
  TypeMismatch,
  // provider
  MissingParam,
  UnknownId,
  AlreadyTerminated,
  NotRunning,
  // compiler
  NotValidated,
  CyclicDependency,
  BindFailure,
  DocumentSyntax,
  // executor
  UnknownScope,
  NotSteppable,
  NoSchedule,
};

std::string_view to_string(ErrorCode code);

/// Every fallible operation in the library throws this type; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vflow
