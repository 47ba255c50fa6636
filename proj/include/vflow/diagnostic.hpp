#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vflow {

enum class Severity { error, warning };

/// A validator, parser or runtime finding. Codes belong to the families
/// WF (well-formedness), RC (reachability), WS (well-structuredness),
/// AN (annotations/arguments), PX (parse) and RT (runtime).
struct Diagnostic {
  std::string code;
  Severity severity = Severity::error;
  std::string plan;
  std::optional<std::string> node;
  std::optional<int> line;
  std::optional<int> column;  // parse diagnostics only; not rendered
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

bool is_registered_code(std::string_view code);

/// `LEVEL CODE plan[:node][:line] message`
std::string render(const Diagnostic& diagnostic);
/// One rendered diagnostic per line, each terminated by LF.
std::string render(const std::vector<Diagnostic>& diagnostics);

bool has_errors(const std::vector<Diagnostic>& diagnostics);

}  // namespace vflow
