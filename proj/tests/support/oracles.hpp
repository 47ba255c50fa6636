#pragma once

// Independent reference computations. These work from raw arc lists and
// plain arithmetic, never from the library routines they are compared with.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vflow/petri.hpp"

namespace vflow::testing {

// ---------------------------------------------------------------------------
// State-space enumeration over the incidence matrix

struct StateSpace {
  std::set<Marking> markings;
  bool truncated = false;
};

/// BFS over integer vectors using pre/post incidence rows built from the arc list.
/// Stops after the first complete level at which `bound` markings have been seen.
inline StateSpace enumerate_states(const VPlan& plan, const Marking& m0, std::size_t bound) {
  std::vector<std::string> places;
  std::map<std::string, std::size_t> index;
  for (const auto& p : plan.places()) {
    index[p.id] = places.size();
    places.push_back(p.id);
  }
  const std::size_t n = places.size();
  std::vector<std::vector<int>> pre, post;
  std::map<std::string, std::size_t> tindex;
  for (const auto& t : plan.transitions()) {
    tindex[t.id] = pre.size();
    pre.emplace_back(n, 0);
    post.emplace_back(n, 0);
  }
  for (const auto& a : plan.arcs()) {
    if (index.count(a.from) != 0) pre[tindex.at(a.to)][index.at(a.from)] += 1;
    else post[tindex.at(a.from)][index.at(a.to)] += 1;
  }

  auto to_marking = [&](const std::vector<int>& v) {
    Marking m;
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > 0) m.add(places[i], static_cast<std::size_t>(v[i]));
    }
    return m;
  };

  std::vector<int> start(n, 0);
  for (const auto& [p, c] : m0.tokens()) start[index.at(p)] = static_cast<int>(c);

  // Whole BFS levels are expanded, so a bounded result is "every marking within
  // depth d" and does not depend on the order transitions are tried.
  std::set<std::vector<int>> seen{start};
  std::vector<std::vector<int>> frontier{start};
  StateSpace out;
  while (!frontier.empty()) {
    if (seen.size() >= bound) {
      out.truncated = true;
      break;
    }
    std::vector<std::vector<int>> next;
    for (const auto& v : frontier) {
      for (std::size_t t = 0; t < pre.size(); ++t) {
        bool has_input = false;
        bool enabled = true;
        for (std::size_t i = 0; i < n; ++i) {
          if (pre[t][i] > 0) has_input = true;
          if (v[i] < pre[t][i]) enabled = false;
        }
        if (!has_input || !enabled) continue;
        std::vector<int> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = v[i] - pre[t][i] + post[t][i];
        if (seen.insert(w).second) next.push_back(std::move(w));
      }
    }
    frontier = std::move(next);
  }
  for (const auto& v : seen) out.markings.insert(to_marking(v));
  return out;
}

// ---------------------------------------------------------------------------
// Boolean transitive closure by repeated squaring

using BoolMatrix = std::vector<std::vector<bool>>;

/// Reflexive-transitive closure of the adjacency matrix.
inline BoolMatrix closure(BoolMatrix m) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) m[i][i] = true;
  for (;;) {
    BoolMatrix sq(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (!m[i][k]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (m[k][j]) sq[i][j] = true;
        }
      }
    }
    if (sq == m) return m;
    m = std::move(sq);
  }
}

/// Nodes v with closure[start][v] and closure[v][end]; nullopt when start/end are not unique.
inline std::optional<std::set<std::string>> rc_clean_nodes(const VPlan& plan) {
  std::vector<std::string> nodes;
  std::map<std::string, std::size_t> index;
  for (const auto& p : plan.places()) {
    index[p.id] = nodes.size();
    nodes.push_back(p.id);
  }
  for (const auto& t : plan.transitions()) {
    index[t.id] = nodes.size();
    nodes.push_back(t.id);
  }
  const std::size_t n = nodes.size();
  BoolMatrix adj(n, std::vector<bool>(n, false));
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  for (const auto& a : plan.arcs()) {
    adj[index.at(a.from)][index.at(a.to)] = true;
    ++outdeg[index.at(a.from)];
    ++indeg[index.at(a.to)];
  }
  std::vector<std::size_t> starts, ends;
  for (std::size_t i = 0; i < plan.places().size(); ++i) {
    if (indeg[i] == 0) starts.push_back(i);
    if (outdeg[i] == 0) ends.push_back(i);
  }
  if (starts.size() != 1 || ends.size() != 1) return std::nullopt;
  const auto c = closure(adj);
  std::set<std::string> clean;
  for (std::size_t v = 0; v < n; ++v) {
    if (c[starts[0]][v] && c[v][ends[0]]) clean.insert(nodes[v]);
  }
  return clean;
}

// ---------------------------------------------------------------------------
// Place-mediated dependencies and choice groups

/// (a, b) for every pair of transitions with arcs a -> p -> b for some place p.
inline std::set<std::pair<std::string, std::string>> dependency_scan(const VPlan& flat) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& a : flat.transitions()) {
    for (const auto& b : flat.transitions()) {
      for (const auto& p : flat.places()) {
        bool a_to_p = false, p_to_b = false;
        for (const auto& arc : flat.arcs()) {
          if (arc.from == a.id && arc.to == p.id) a_to_p = true;
          if (arc.from == p.id && arc.to == b.id) p_to_b = true;
        }
        if (a_to_p && p_to_b) out.insert({a.id, b.id});
      }
    }
  }
  return out;
}

/// Transition -> smallest input place id whose out-degree exceeds one.
inline std::map<std::string, std::string> choice_scan(const VPlan& flat) {
  std::map<std::string, std::string> out;
  for (const auto& p : flat.places()) {
    std::vector<std::string> consumers;
    for (const auto& arc : flat.arcs()) {
      if (arc.from == p.id) consumers.push_back(arc.to);
    }
    if (consumers.size() < 2) continue;
    for (const auto& t : consumers) {
      auto it = out.find(t);
      if (it == out.end() || p.id < it->second) out[t] = p.id;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schedules

/// Minutes m in (from, until] whose UTC time of day is hh:mm.
inline int minute_scan_daily(std::chrono::sys_seconds from, std::chrono::sys_seconds until, int hh, int mm) {
  using namespace std::chrono;
  int count = 0;
  for (auto t = floor<minutes>(from) + minutes(1); t <= until; t += minutes(1)) {
    if (t <= from) continue;
    const auto since_midnight = t - floor<days>(t);
    if (since_midnight == hours(hh) + minutes(mm)) ++count;
  }
  return count;
}

/// Minutes m in (from, until] that are a whole number of periods after `from` (period a multiple of 60).
inline int minute_scan_every(std::chrono::sys_seconds from, std::chrono::sys_seconds until, std::int64_t period_s) {
  using namespace std::chrono;
  int count = 0;
  for (auto t = from + minutes(1); t <= until; t += minutes(1)) {
    if ((t - from).count() % period_s == 0) ++count;
  }
  return count;
}

}  // namespace vflow::testing
