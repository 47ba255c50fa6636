#include "vflow/validator.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "vflow/error.hpp"

namespace vflow {

namespace {

Diagnostic make(std::string code, const std::string& plan, std::optional<std::string> node,
                std::string message) {
  Diagnostic d;
  d.code = std::move(code);
  d.plan = plan;
  d.node = std::move(node);
  d.message = std::move(message);
  return d;
}

std::vector<std::string> node_ids(const VPlan& plan) {
  std::vector<std::string> ids;
  ids.reserve(plan.node_count());
  for (const auto& p : plan.places()) ids.push_back(p.id);
  for (const auto& t : plan.transitions()) ids.push_back(t.id);
  return ids;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

using Adjacency = std::unordered_map<std::string, std::vector<std::string>>;

Adjacency successors(const VPlan& plan) {
  Adjacency adj;
  for (const auto& a : plan.arcs()) adj[a.from].push_back(a.to);
  return adj;
}

Adjacency predecessors(const VPlan& plan) {
  Adjacency adj;
  for (const auto& a : plan.arcs()) adj[a.to].push_back(a.from);
  return adj;
}

std::set<std::string> reach(const Adjacency& adj, const std::string& from) {
  std::set<std::string> seen{from};
  std::deque<std::string> queue{from};
  while (!queue.empty()) {
    std::string v = std::move(queue.front());
    queue.pop_front();
    auto it = adj.find(v);
    if (it == adj.end()) continue;
    for (const auto& w : it->second) {
      if (seen.insert(w).second) queue.push_back(w);
    }
  }
  return seen;
}

std::size_t weak_components(const VPlan& plan) {
  auto ids = node_ids(plan);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  std::vector<std::size_t> parent(ids.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::size_t components = ids.size();
  for (const auto& a : plan.arcs()) {
    auto x = root(index.at(a.from));
    auto y = root(index.at(a.to));
    if (x != y) {
      parent[x] = y;
      --components;
    }
  }
  return components;
}

// Meta-place references: plan name -> [(meta-place id, subplan name)].
std::map<std::string, std::vector<std::pair<std::string, std::string>>> references(
    const PlanSet& set) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> refs;
  for (const auto& plan : set.plans) {
    for (const auto& p : plan.places()) {
      if (p.is_meta()) refs[plan.name()].emplace_back(p.id, *p.subplan);
    }
  }
  return refs;
}

std::set<std::string> referenced_plans(const PlanSet& set) {
  std::set<std::string> out;
  for (const auto& plan : set.plans) {
    for (const auto& p : plan.places()) {
      if (p.is_meta() && set.find(*p.subplan) != nullptr) out.insert(*p.subplan);
    }
  }
  return out;
}

}  // namespace

std::string ValidationReport::render() const { return vflow::render(diagnostics); }

std::vector<Diagnostic> check_plan_well_formed(const VPlan& plan) {
  std::vector<Diagnostic> out;
  const std::string& name = plan.name();

  if (plan.node_count() > 0 && weak_components(plan) > 1) {
    out.push_back(make("WF-02", name, std::nullopt,
                       "plan is not connected (" + std::to_string(weak_components(plan)) +
                           " components)"));
  }

  std::vector<std::string> starts;
  std::vector<std::string> ends;
  for (const auto& p : plan.places()) {
    if (plan.in_degree(p.id) == 0) starts.push_back(p.id);
    if (plan.out_degree(p.id) == 0) ends.push_back(p.id);
  }
  if (starts.size() != 1) {
    out.push_back(make("WF-03", name, std::nullopt,
                       starts.empty() ? "plan has no start place"
                                      : "plan has " + std::to_string(starts.size()) +
                                            " start places: " + join(starts)));
  }
  if (ends.size() != 1) {
    out.push_back(make("WF-04", name, std::nullopt,
                       ends.empty() ? "plan has no end place"
                                    : "plan has " + std::to_string(ends.size()) +
                                          " end places: " + join(ends)));
  }

  for (const auto& t : plan.transitions()) {
    const auto in = plan.in_degree(t.id);
    const auto out_deg = plan.out_degree(t.id);
    if (in == 0 || out_deg == 0) {
      out.push_back(make("WF-05", name, t.id,
                         in == 0 ? "transition has no input place" : "transition has no output place"));
    }
  }
  for (const auto& id : node_ids(plan)) {
    if (plan.in_degree(id) == 0 && plan.out_degree(id) == 0) {
      out.push_back(make("WF-06", name, id, "node is isolated"));
    }
  }
  return out;
}

std::vector<Diagnostic> check_well_formed(const PlanSet& set) {
  std::vector<Diagnostic> out;
  if (set.main.empty()) {
    out.push_back(make("WF-01", "", std::nullopt, "no plan is marked main"));
  } else if (set.find(set.main) == nullptr) {
    out.push_back(make("WF-01", set.main, std::nullopt, "main plan is not defined"));
  }
  const auto referenced = referenced_plans(set);
  for (const auto& plan : set.plans) {
    if (referenced.count(plan.name()) != 0) continue;  // reported as WS-03
    auto wf = check_plan_well_formed(plan);
    out.insert(out.end(), wf.begin(), wf.end());
  }
  return out;
}

std::vector<Diagnostic> check_reachability(const VPlan& plan) {
  std::string start;
  std::string end;
  try {
    start = start_place(plan);
    end = end_place(plan);
  } catch (const Error&) {
    return {};
  }
  const auto forward = reach(successors(plan), start);
  const auto backward = reach(predecessors(plan), end);
  std::vector<Diagnostic> out;
  for (const auto& id : node_ids(plan)) {
    if (forward.count(id) == 0) {
      out.push_back(make("RC-01", plan.name(), id, "not reachable from start place " + start));
    }
    if (backward.count(id) == 0) {
      out.push_back(make("RC-02", plan.name(), id, "end place " + end + " is not reachable"));
    }
  }
  return out;
}

std::vector<Diagnostic> check_acyclic(const VPlan& plan) {
  const auto succ = successors(plan);
  std::vector<Diagnostic> out;
  for (const auto& id : node_ids(plan)) {
    auto it = succ.find(id);
    if (it == succ.end()) continue;
    bool cyclic = false;
    for (const auto& next : it->second) {
      if (reach(succ, next).count(id) != 0) {
        cyclic = true;
        break;
      }
    }
    if (cyclic) {
      out.push_back(make("RC-03", plan.name(), id,
                         "node lies on a directed cycle; compiled plans must be acyclic"));
    }
  }
  return out;
}

std::vector<Diagnostic> check_well_structured(const PlanSet& set, const Repository* repo) {
  std::vector<Diagnostic> out;
  const auto refs = references(set);

  // Plans from which `target` can be reached through meta-place references.
  auto reaches = [&](const std::string& from, const std::string& target) {
    std::set<std::string> seen{from};
    std::deque<std::string> queue{from};
    while (!queue.empty()) {
      auto name = queue.front();
      queue.pop_front();
      if (name == target) return true;
      auto it = refs.find(name);
      if (it == refs.end()) continue;
      for (const auto& [meta, sub] : it->second) {
        if (seen.insert(sub).second) queue.push_back(sub);
      }
    }
    return false;
  };

  for (const auto& plan : set.plans) {
    for (const auto& place : plan.places()) {
      if (!place.is_meta()) continue;
      const std::string& sub = *place.subplan;
      const VPlan* target = set.find(sub);
      if (target == nullptr) {
        out.push_back(make("WS-01", plan.name(), place.id,
                           "meta-place references plan '" + sub + "' which does not exist"));
        continue;
      }
      if (reaches(sub, plan.name())) {
        out.push_back(make("WS-02", plan.name(), place.id,
                           "subplan reference '" + sub + "' closes a cycle back to " +
                               plan.name()));
        continue;
      }
      auto wf = check_plan_well_formed(*target);
      if (!wf.empty()) {
        std::vector<std::string> codes;
        for (const auto& d : wf) {
          if (std::find(codes.begin(), codes.end(), d.code) == codes.end()) codes.push_back(d.code);
        }
        out.push_back(make("WS-03", plan.name(), place.id,
                           "subplan '" + sub + "' is not well-formed (" + join(codes) + ")"));
      }
    }

    for (const auto& t : plan.transitions()) {
      for (const auto& a : t.annotations) {
        if (a.kind == Annotation::Kind::on_event && a.event.empty()) {
          out.push_back(make("AN-05", plan.name(), t.id, "on_event annotation has an empty event name"));
        }
      }
      if (!t.call || repo == nullptr) continue;
      const RepositoryEntry* entry = repo->find(t.call->module);
      if (entry == nullptr) {
        out.push_back(make("AN-01", plan.name(), t.id,
                           "calls unknown repository module '" + t.call->module + "'"));
        continue;
      }
      for (const auto& issue : check_args(*entry, *t.call)) {
        const char* code = issue.kind == ArgIssueKind::missing_required ? "AN-02"
                           : issue.kind == ArgIssueKind::unknown_arg    ? "AN-03"
                                                                        : "AN-04";
        out.push_back(make(code, plan.name(), t.id, issue.message));
      }
    }
  }
  return out;
}

ValidationReport make_report(std::vector<Diagnostic> diagnostics) {
  auto key = [](const Diagnostic& d) {
    return std::make_tuple(std::cref(d.plan), std::cref(d.code), d.node.has_value(),
                           d.node ? std::string_view(*d.node) : std::string_view{});
  };
  std::stable_sort(diagnostics.begin(), diagnostics.end(),
                   [&](const Diagnostic& a, const Diagnostic& b) { return key(a) < key(b); });
  std::vector<Diagnostic> unique;
  for (auto& d : diagnostics) {
    if (std::find(unique.begin(), unique.end(), d) == unique.end()) unique.push_back(std::move(d));
  }
  ValidationReport report;
  report.ok = !has_errors(unique);
  report.diagnostics = std::move(unique);
  return report;
}

ValidationReport validate(const PlanSet& set, const Repository* repo) {
  std::vector<Diagnostic> all = check_well_formed(set);
  auto ws = check_well_structured(set, repo);
  all.insert(all.end(), ws.begin(), ws.end());

  for (const auto& plan : set.plans) {
    if (!check_plan_well_formed(plan).empty()) continue;
    auto rc = check_reachability(plan);
    if (rc.empty()) rc = check_acyclic(plan);
    all.insert(all.end(), rc.begin(), rc.end());
  }
  return make_report(std::move(all));
}

}  // namespace vflow
