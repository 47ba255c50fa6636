#pragma once

// Net structure for vPlans and the token game played on them.
//
// A VPlan is a bipartite directed graph of places and transitions. Places may
// be meta-places that stand for a whole lower-level plan; flatten() expands
// them. Arc weights are always one.

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vflow {

enum class EventAction { interrupt, skip, retry };

std::string_view to_string(EventAction action);
std::optional<EventAction> parse_event_action(std::string_view text);

struct Annotation {
  enum class Kind { args_doc, on_event };

  Kind kind = Kind::on_event;
  std::string text;   // args_doc only
  std::string event;  // on_event only
  EventAction action = EventAction::interrupt;

  static Annotation on_event(std::string event, EventAction action) {
    return {Kind::on_event, {}, std::move(event), action};
  }
  static Annotation args_doc(std::string text) {
    return {Kind::args_doc, std::move(text), {}, EventAction::interrupt};
  }

  bool operator==(const Annotation&) const = default;
};

/// Ordered key/value pairs; declaration order is preserved for round-trips.
using ArgList = std::vector<std::pair<std::string, std::string>>;

struct TaskCall {
  std::string module;
  ArgList args;

  const std::string* find_arg(std::string_view key) const;
  bool operator==(const TaskCall&) const = default;
};

struct Place {
  std::string id;
  std::optional<std::string> subplan;

  bool is_meta() const { return subplan.has_value(); }
  bool operator==(const Place&) const = default;
};

struct Transition {
  std::string id;
  std::optional<TaskCall> call;
  std::vector<Annotation> annotations;
  // Plan the transition was declared in. Set by flatten(); empty otherwise.
  std::string origin_plan;

  bool operator==(const Transition&) const = default;
};

struct Arc {
  std::string from;
  std::string to;

  bool operator==(const Arc&) const = default;
};

enum class NodeKind { place, transition };

class VPlan {
 public:
  VPlan() = default;
  explicit VPlan(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<Place>& places() const { return places_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<Arc>& arcs() const { return arcs_; }

  /// Throws DuplicateNode when the id is already used by a place or transition.
  void add_place(Place place);
  void add_transition(Transition transition);
  /// Throws UnknownNode, NonBipartite or DuplicateArc; the plan is unchanged on error.
  void add_arc(const std::string& from, const std::string& to);

  std::optional<NodeKind> kind_of(std::string_view id) const;
  bool has_node(std::string_view id) const { return kind_of(id).has_value(); }
  const Place* find_place(std::string_view id) const;
  const Transition* find_transition(std::string_view id) const;

  /// Sources of arcs ending at `id`, in arc order.
  std::vector<std::string> inputs(std::string_view id) const;
  /// Targets of arcs leaving `id`, in arc order.
  std::vector<std::string> outputs(std::string_view id) const;
  std::size_t in_degree(std::string_view id) const;
  std::size_t out_degree(std::string_view id) const;
  std::size_t node_count() const { return places_.size() + transitions_.size(); }

  bool operator==(const VPlan& other) const;

 private:
  std::string name_;
  std::vector<Place> places_;
  std::vector<Transition> transitions_;
  std::vector<Arc> arcs_;
  std::unordered_map<std::string, NodeKind> kinds_;
};

struct PlanSet {
  std::vector<VPlan> plans;  // declaration order
  std::string main;

  const VPlan* find(std::string_view name) const;
  /// Throws MissingSubplan when `main` does not name a plan of the set.
  const VPlan& main_plan() const;

  bool operator==(const PlanSet&) const = default;
};

/// Multiset of tokens over place ids. Places that are absent hold zero tokens.
class Marking {
 public:
  Marking() = default;
  Marking(std::initializer_list<std::pair<const std::string, std::size_t>> init);

  std::size_t count(std::string_view place) const;
  std::size_t total() const;
  bool empty() const { return tokens_.empty(); }
  const std::map<std::string, std::size_t, std::less<>>& tokens() const { return tokens_; }

  void add(const std::string& place, std::size_t n = 1);
  /// Precondition: count(place) >= n.
  void remove(const std::string& place, std::size_t n = 1);

  auto operator<=>(const Marking&) const = default;
  bool operator==(const Marking&) const = default;

 private:
  std::map<std::string, std::size_t, std::less<>> tokens_;
};

std::string to_string(const Marking& marking);

/// The unique place with in-degree zero. Throws NoStart or AmbiguousStart.
std::string start_place(const VPlan& plan);
/// The unique place with out-degree zero. Throws NoEnd or AmbiguousEnd.
std::string end_place(const VPlan& plan);

Marking initial_marking(const VPlan& plan);

/// Transitions whose every input place holds a token. Transitions without
/// input arcs are never enabled.
std::set<std::string> enabled_transitions(const VPlan& plan, const Marking& marking);
bool is_enabled(const VPlan& plan, const Marking& marking, std::string_view transition);

/// Returns the successor marking; `marking` itself is not modified.
/// Throws UnknownTransition or NotEnabled.
Marking fire(const VPlan& plan, const Marking& marking, std::string_view transition);

/// True iff the marking is exactly one token on the end place.
bool is_clean_final(const VPlan& plan, const Marking& marking);

/// Expands meta-places of the main plan recursively into one flat net. A
/// meta-place `m` referencing plan S becomes a copy of S with ids prefixed
/// `m.`; arcs into `m` target S's start, arcs out of `m` leave S's end.
/// Throws CyclicHierarchy, MissingSubplan, or start/end errors of subplans.
VPlan flatten(const PlanSet& set);

}  // namespace vflow
