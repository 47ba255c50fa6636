#include "vflow/diagnostic.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace vflow {

bool is_registered_code(std::string_view code) {
  static constexpr std::array<std::string_view, 6> families{"WF", "RC", "WS", "AN", "PX", "RT"};
  if (code.size() != 5 || code[2] != '-') return false;
  if (!std::isdigit(static_cast<unsigned char>(code[3])) ||
      !std::isdigit(static_cast<unsigned char>(code[4]))) {
    return false;
  }
  return std::find(families.begin(), families.end(), code.substr(0, 2)) != families.end();
}

std::string render(const Diagnostic& d) {
  std::string out = d.severity == Severity::error ? "error" : "warning";
  out += ' ';
  out += d.code;
  out += ' ';
  out += d.plan.empty() ? "-" : d.plan;
  if (d.node) out += ":" + *d.node;
  if (d.line) out += ":" + std::to_string(*d.line);
  out += ' ';
  out += d.message;
  return out;
}

std::string render(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    out += render(d);
    out += '\n';
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

}  // namespace vflow
