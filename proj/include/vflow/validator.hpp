#pragma once

// Structural and semantic checks that gate compilation.
//
// Rule families, all error severity:
//   WF-01 main plan missing       WF-02 not weakly connected
//   WF-03 not one start place     WF-04 not one end place
//   WF-05 transition without inputs or outputs
//   WF-06 isolated node
//   RC-01 node unreachable from start
//   RC-02 end unreachable from node
//   RC-03 directed cycle (compiled documents must be acyclic)
//   WS-01 meta-place names a missing plan
//   WS-02 subplan reference cycle
//   WS-03 referenced subplan is not well-formed
//   AN-01 unknown repository module   AN-02 missing required argument
//   AN-03 unknown argument            AN-04 argument of the wrong type
//   AN-05 on_event annotation without an event name
//
// Families are layered per plan: reachability runs only on plans without WF
// findings, and the cycle check only on plans without RC-01/RC-02 findings.
// WF findings of a plan that is referenced through a meta-place surface as
// WS-03 on the referencing meta-place.

#include <vector>

#include "vflow/diagnostic.hpp"
#include "vflow/petri.hpp"
#include "vflow/repository.hpp"

namespace vflow {

struct ValidationReport {
  std::vector<Diagnostic> diagnostics;
  bool ok = true;

  /// Rendered diagnostics, one per line.
  std::string render() const;
};

/// WF rules applied to a single plan. WF-01 is a set-level rule and never appears here.
std::vector<Diagnostic> check_plan_well_formed(const VPlan& plan);

/// WF-01 plus the per-plan WF rules for every plan not referenced by a meta-place.
std::vector<Diagnostic> check_well_formed(const PlanSet& set);

/// RC-01/RC-02 per node. Empty when the plan lacks a unique start or end.
std::vector<Diagnostic> check_reachability(const VPlan& plan);

/// RC-03 for every node on a directed cycle.
std::vector<Diagnostic> check_acyclic(const VPlan& plan);

/// WS and AN rules. A null repository skips AN-01..AN-04.
std::vector<Diagnostic> check_well_structured(const PlanSet& set, const Repository* repo);

/// Union of all checks, deduplicated and ordered by (plan, code, node).
ValidationReport validate(const PlanSet& set, const Repository* repo);
inline ValidationReport validate(const PlanSet& set, const Repository& repo) {
  return validate(set, &repo);
}

/// Orders and deduplicates, then derives `ok`.
ValidationReport make_report(std::vector<Diagnostic> diagnostics);

}  // namespace vflow
