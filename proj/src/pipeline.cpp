#include "vflow/pipeline.hpp"

#include "vflow/text.hpp"

namespace vflow {

ValidationReport validate_source(std::string_view text, const Repository* repo) {
  auto parsed = text::parse(text);
  if (!parsed.ok()) return make_report(std::move(parsed.diagnostics));
  return validate(parsed.plan_set, repo);
}

VDocument compile_source(std::string_view text, const Repository& repo,
                         const std::optional<ScheduleSpec>& schedule) {
  auto parsed = text::parse(text);
  if (!parsed.ok()) {
    auto report = make_report(std::move(parsed.diagnostics));
    throw CompileError(ErrorCode::NotValidated, "plan text does not parse:\n" + report.render(),
                       report.diagnostics);
  }
  return compile(parsed.plan_set, repo, schedule);
}

}  // namespace vflow
