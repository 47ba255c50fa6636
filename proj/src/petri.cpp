#include "vflow/petri.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "vflow/error.hpp"

namespace vflow {

std::string_view to_string(EventAction action) {
  switch (action) {
    case EventAction::interrupt: return "interrupt";
    case EventAction::skip: return "skip";
    case EventAction::retry: return "retry";
  }
  return "interrupt";
}

std::optional<EventAction> parse_event_action(std::string_view text) {
  if (text == "interrupt") return EventAction::interrupt;
  if (text == "skip") return EventAction::skip;
  if (text == "retry") return EventAction::retry;
  return std::nullopt;
}

const std::string* TaskCall::find_arg(std::string_view key) const {
  for (const auto& [k, v] : args) {
    if (k == key) return &v;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// VPlan

void VPlan::add_place(Place place) {
  if (kinds_.count(place.id) != 0) {
    throw Error(ErrorCode::DuplicateNode, "duplicate node id '" + place.id + "' in plan " + name_);
  }
  kinds_.emplace(place.id, NodeKind::place);
  places_.push_back(std::move(place));
}

void VPlan::add_transition(Transition transition) {
  if (kinds_.count(transition.id) != 0) {
    throw Error(ErrorCode::DuplicateNode,
                "duplicate node id '" + transition.id + "' in plan " + name_);
  }
  kinds_.emplace(transition.id, NodeKind::transition);
  transitions_.push_back(std::move(transition));
}

void VPlan::add_arc(const std::string& from, const std::string& to) {
  auto from_kind = kind_of(from);
  if (!from_kind) throw Error(ErrorCode::UnknownNode, "unknown node '" + from + "'");
  auto to_kind = kind_of(to);
  if (!to_kind) throw Error(ErrorCode::UnknownNode, "unknown node '" + to + "'");
  if (*from_kind == *to_kind) {
    throw Error(ErrorCode::NonBipartite,
                "arc " + from + "->" + to + " must connect a place and a transition");
  }
  for (const auto& arc : arcs_) {
    if (arc.from == from && arc.to == to) {
      throw Error(ErrorCode::DuplicateArc, "duplicate arc " + from + "->" + to);
    }
  }
  arcs_.push_back({from, to});
}

std::optional<NodeKind> VPlan::kind_of(std::string_view id) const {
  auto it = kinds_.find(std::string(id));
  if (it == kinds_.end()) return std::nullopt;
  return it->second;
}

const Place* VPlan::find_place(std::string_view id) const {
  for (const auto& p : places_) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const Transition* VPlan::find_transition(std::string_view id) const {
  for (const auto& t : transitions_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::vector<std::string> VPlan::inputs(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& arc : arcs_) {
    if (arc.to == id) out.push_back(arc.from);
  }
  return out;
}

std::vector<std::string> VPlan::outputs(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& arc : arcs_) {
    if (arc.from == id) out.push_back(arc.to);
  }
  return out;
}

std::size_t VPlan::in_degree(std::string_view id) const {
  return static_cast<std::size_t>(
      std::count_if(arcs_.begin(), arcs_.end(), [&](const Arc& a) { return a.to == id; }));
}

std::size_t VPlan::out_degree(std::string_view id) const {
  return static_cast<std::size_t>(
      std::count_if(arcs_.begin(), arcs_.end(), [&](const Arc& a) { return a.from == id; }));
}

bool VPlan::operator==(const VPlan& other) const {
  return name_ == other.name_ && places_ == other.places_ &&
         transitions_ == other.transitions_ && arcs_ == other.arcs_;
}

// ---------------------------------------------------------------------------
// PlanSet

const VPlan* PlanSet::find(std::string_view name) const {
  for (const auto& plan : plans) {
    if (plan.name() == name) return &plan;
  }
  return nullptr;
}

const VPlan& PlanSet::main_plan() const {
  const VPlan* plan = find(main);
  if (plan == nullptr) {
    throw Error(ErrorCode::MissingSubplan, "main plan '" + main + "' is not defined");
  }
  return *plan;
}

// ---------------------------------------------------------------------------
// Marking

Marking::Marking(std::initializer_list<std::pair<const std::string, std::size_t>> init) {
  for (const auto& [place, n] : init) add(place, n);
}

std::size_t Marking::count(std::string_view place) const {
  auto it = tokens_.find(place);
  return it == tokens_.end() ? 0 : it->second;
}

std::size_t Marking::total() const {
  return std::accumulate(tokens_.begin(), tokens_.end(), std::size_t{0},
                         [](std::size_t acc, const auto& kv) { return acc + kv.second; });
}

void Marking::add(const std::string& place, std::size_t n) {
  if (n == 0) return;
  tokens_[place] += n;
}

void Marking::remove(const std::string& place, std::size_t n) {
  auto it = tokens_.find(place);
  if (it == tokens_.end() || it->second < n) {
    throw Error(ErrorCode::NotEnabled, "place '" + place + "' holds too few tokens");
  }
  it->second -= n;
  if (it->second == 0) tokens_.erase(it);
}

std::string to_string(const Marking& marking) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (const auto& [place, n] : marking.tokens()) {
    if (!first) os << ", ";
    first = false;
    os << place << ':' << n;
  }
  os << '}';
  return os.str();
}

// ---------------------------------------------------------------------------
// Token game

namespace {

std::vector<std::string> places_with(const VPlan& plan, bool zero_in) {
  std::vector<std::string> found;
  for (const auto& p : plan.places()) {
    std::size_t degree = zero_in ? plan.in_degree(p.id) : plan.out_degree(p.id);
    if (degree == 0) found.push_back(p.id);
  }
  return found;
}

}  // namespace

std::string start_place(const VPlan& plan) {
  auto found = places_with(plan, true);
  if (found.empty()) throw Error(ErrorCode::NoStart, "plan " + plan.name() + " has no start place");
  if (found.size() > 1) {
    throw Error(ErrorCode::AmbiguousStart, "plan " + plan.name() + " has " +
                                               std::to_string(found.size()) + " start places");
  }
  return found.front();
}

std::string end_place(const VPlan& plan) {
  auto found = places_with(plan, false);
  if (found.empty()) throw Error(ErrorCode::NoEnd, "plan " + plan.name() + " has no end place");
  if (found.size() > 1) {
    throw Error(ErrorCode::AmbiguousEnd, "plan " + plan.name() + " has " +
                                             std::to_string(found.size()) + " end places");
  }
  return found.front();
}

Marking initial_marking(const VPlan& plan) {
  Marking m;
  m.add(start_place(plan));
  return m;
}

bool is_enabled(const VPlan& plan, const Marking& marking, std::string_view transition) {
  bool has_input = false;
  for (const auto& arc : plan.arcs()) {
    if (arc.to != transition) continue;
    has_input = true;
    if (marking.count(arc.from) == 0) return false;
  }
  return has_input;
}

std::set<std::string> enabled_transitions(const VPlan& plan, const Marking& marking) {
  std::set<std::string> enabled;
  for (const auto& t : plan.transitions()) {
    if (is_enabled(plan, marking, t.id)) enabled.insert(t.id);
  }
  return enabled;
}

Marking fire(const VPlan& plan, const Marking& marking, std::string_view transition) {
  if (plan.find_transition(transition) == nullptr) {
    throw Error(ErrorCode::UnknownTransition, "unknown transition '" + std::string(transition) + "'");
  }
  if (!is_enabled(plan, marking, transition)) {
    throw Error(ErrorCode::NotEnabled, "transition '" + std::string(transition) + "' is not enabled");
  }
  Marking next = marking;
  for (const auto& arc : plan.arcs()) {
    if (arc.to == transition) next.remove(arc.from);
  }
  for (const auto& arc : plan.arcs()) {
    if (arc.from == transition) next.add(arc.to);
  }
  return next;
}

bool is_clean_final(const VPlan& plan, const Marking& marking) {
  const std::string end = end_place(plan);
  return marking.tokens().size() == 1 && marking.count(end) == 1;
}

// ---------------------------------------------------------------------------
// Hierarchy

namespace {

struct Boundary {
  std::string entry;
  std::string exit;
};

VPlan flatten_plan(const PlanSet& set, const VPlan& plan, std::vector<std::string>& stack,
                   bool is_root) {
  if (std::find(stack.begin(), stack.end(), plan.name()) != stack.end()) {
    std::string chain;
    for (const auto& name : stack) chain += name + " -> ";
    throw Error(ErrorCode::CyclicHierarchy, "subplan cycle: " + chain + plan.name());
  }
  stack.push_back(plan.name());

  VPlan out(plan.name());
  std::unordered_map<std::string, Boundary> boundaries;
  std::vector<Transition> nested_transitions;
  std::vector<Arc> nested_arcs;

  for (const auto& place : plan.places()) {
    if (!place.is_meta()) {
      out.add_place(place);
      continue;
    }
    const VPlan* sub = set.find(*place.subplan);
    if (sub == nullptr) {
      throw Error(ErrorCode::MissingSubplan, "meta-place " + plan.name() + ":" + place.id +
                                                 " references missing plan '" + *place.subplan +
                                                 "'");
    }
    VPlan flat_sub = flatten_plan(set, *sub, stack, false);
    const std::string prefix = place.id + ".";
    boundaries[place.id] = {prefix + start_place(flat_sub), prefix + end_place(flat_sub)};
    for (const auto& p : flat_sub.places()) out.add_place({prefix + p.id, std::nullopt});
    for (auto t : flat_sub.transitions()) {
      t.id = prefix + t.id;
      nested_transitions.push_back(std::move(t));
    }
    for (const auto& a : flat_sub.arcs()) nested_arcs.push_back({prefix + a.from, prefix + a.to});
  }

  for (auto t : plan.transitions()) {
    if (!is_root && t.origin_plan.empty()) t.origin_plan = plan.name();
    out.add_transition(std::move(t));
  }
  for (auto& t : nested_transitions) out.add_transition(std::move(t));

  for (const auto& arc : plan.arcs()) {
    std::string from = arc.from;
    std::string to = arc.to;
    if (auto it = boundaries.find(from); it != boundaries.end()) from = it->second.exit;
    if (auto it = boundaries.find(to); it != boundaries.end()) to = it->second.entry;
    out.add_arc(from, to);
  }
  for (const auto& arc : nested_arcs) out.add_arc(arc.from, arc.to);

  stack.pop_back();
  return out;
}

}  // namespace

VPlan flatten(const PlanSet& set) {
  std::vector<std::string> stack;
  return flatten_plan(set, set.main_plan(), stack, true);
}

}  // namespace vflow
