#pragma once

// Text-to-report and text-to-document entry points shared by the CLI and the
// HTTP service, so both surfaces produce identical output for identical input.

#include <optional>
#include <string_view>

#include "vflow/repository.hpp"
#include "vflow/validator.hpp"
#include "vflow/vdocument.hpp"

namespace vflow {

/// Parse diagnostics when the text does not parse, otherwise the full validation report.
ValidationReport validate_source(std::string_view text, const Repository* repo);

/// Throws CompileError (NotValidated carrying PX diagnostics when the text does not parse).
VDocument compile_source(std::string_view text, const Repository& repo,
                         const std::optional<ScheduleSpec>& schedule);

}  // namespace vflow
