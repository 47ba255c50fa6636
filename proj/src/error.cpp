#include "vflow/error.hpp"

namespace vflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NonBipartite: return "NonBipartite";
    case ErrorCode::DuplicateArc: return "DuplicateArc";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::NoStart: return "NoStart";
    case ErrorCode::AmbiguousStart: return "AmbiguousStart";
    case ErrorCode::NoEnd: return "NoEnd";
    case ErrorCode::AmbiguousEnd: return "AmbiguousEnd";
    case ErrorCode::NotEnabled: return "NotEnabled";
    case ErrorCode::UnknownTransition: return "UnknownTransition";
    case ErrorCode::CyclicHierarchy: return "CyclicHierarchy";
    case ErrorCode::MissingSubplan: return "MissingSubplan";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestSyntax: return "ManifestSyntax";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::BadTemplate: return "BadTemplate";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::MissingRequired: return "MissingRequired";
    case ErrorCode::UnknownArg: return "UnknownArg";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MissingParam: return "MissingParam";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::AlreadyTerminated: return "AlreadyTerminated";
    case ErrorCode::NotRunning: return "NotRunning";
    case ErrorCode::NotValidated: return "NotValidated";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::DocumentSyntax: return "DocumentSyntax";
    case ErrorCode::UnknownScope: return "UnknownScope";
    case ErrorCode::NotSteppable: return "NotSteppable";
    case ErrorCode::NoSchedule: return "NoSchedule";
  }
  return "Unknown";
}

}  // namespace vflow
