#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vflow/repository.hpp"
#include "vflow/text.hpp"

namespace vflow::testing {

inline std::filesystem::path fixture_path(const std::string& rel) {
  return std::filesystem::path(VFLOW_FIXTURES) / rel;
}

inline std::string read_fixture(const std::string& rel) {
  std::ifstream in(fixture_path(rel), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + rel);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline PlanSet load_plan(const std::string& rel) {
  auto parsed = text::parse(read_fixture(rel));
  if (!parsed.ok()) throw std::runtime_error("fixture " + rel + " does not parse");
  return parsed.plan_set;
}

inline Repository demo_repo() { return Repository::load_manifest(fixture_path("repo.manifest")); }

inline Repository events_repo() { return Repository::load_manifest(fixture_path("events.manifest")); }

/// Compile fixtures and the manifest each one binds against.
struct PlanFixture {
  std::string file;
  std::string manifest;
};

inline const std::vector<PlanFixture>& plan_fixtures() {
  static const std::vector<PlanFixture> all = {
      {"demo.vplan", "repo.manifest"},          {"plans/chain.vplan", "repo.manifest"},
      {"plans/choice.vplan", "repo.manifest"},  {"plans/diamond.vplan", "repo.manifest"},
      {"plans/fork_join.vplan", "repo.manifest"}, {"plans/nested.vplan", "repo.manifest"},
      {"plans/events.vplan", "events.manifest"},
  };
  return all;
}

}  // namespace vflow::testing
