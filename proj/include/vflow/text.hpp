#pragma once

// Textual vPlan format.
//
//   document   := plan+
//   plan       := "vplan" IDENT ["main"] "{" item* "}"
//   item       := place | transition | arc | annotation
//   place      := "place" IDENT [":" "subplan" IDENT] ";"
//   transition := "transition" IDENT ["calls" IDENT "(" [arg ("," arg)*] ")"] ";"
//   arg        := IDENT "=" STRING-or-IDENT-or-NUMBER
//   arc        := "arc" IDENT "->" IDENT ";"
//   annotation := "@on_event" "(" "event" "=" STRING "," "action" "=" ACTION ")" transition
//              |  "@args_doc" "(" STRING ")" transition
//   comment    := "#" to end-of-line
//
// serialize() emits the canonical layout: main plan first, then the others
// in declaration order; places, transitions and arcs in first-appearance
// order; one item per line; two-space indent; LF line endings.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vflow/diagnostic.hpp"
#include "vflow/petri.hpp"

namespace vflow::text {

struct Comment {
  int line = 0;      // 1-based
  std::string text;  // everything after '#', trailing whitespace removed

  bool operator==(const Comment&) const = default;
};

struct SourceDocument {
  std::string text;
  std::uint64_t revision = 0;
};

struct ParseResult {
  PlanSet plan_set;
  std::vector<Comment> comments;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

/// Never throws; every failure becomes a PX-xx diagnostic with line and column.
ParseResult parse(std::string_view text);

std::string serialize(const PlanSet& set, const std::vector<Comment>& comments = {});

/// Formats an argument value so that parse() reads back the same string.
std::string format_value(std::string_view value);
bool is_identifier(std::string_view text);

}  // namespace vflow::text
