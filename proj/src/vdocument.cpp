#include "vflow/vdocument.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "json.hpp"
#include "vflow/text.hpp"
#include "vflow/validator.hpp"

namespace vflow {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Schedules

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool valid_hh_mm(std::string_view s) {
  if (s.size() != 5 || s[2] != ':') return false;
  std::int64_t h = 0;
  std::int64_t m = 0;
  return parse_int(s.substr(0, 2), h) && parse_int(s.substr(3, 2), m) && h >= 0 && h < 24 &&
         m >= 0 && m < 60;
}

}  // namespace

std::string_view to_string(ScheduleSpec::Kind kind) {
  switch (kind) {
    case ScheduleSpec::Kind::once: return "once";
    case ScheduleSpec::Kind::every: return "every";
    case ScheduleSpec::Kind::daily: return "daily";
  }
  return "once";
}

std::optional<ScheduleSpec> ScheduleSpec::parse(std::string_view text) {
  if (text == "once") return once();
  if (text.rfind("daily@", 0) == 0) {
    auto at = text.substr(6);
    if (!valid_hh_mm(at)) return std::nullopt;
    return daily(std::string(at));
  }
  if (text.rfind("every@", 0) == 0) {
    std::int64_t secs = 0;
    if (!parse_int(text.substr(6), secs) || secs <= 0) return std::nullopt;
    return every_seconds(secs);
  }
  return std::nullopt;
}

bool ScheduleSpec::valid() const {
  switch (kind) {
    case Kind::once: return !every && !at;
    case Kind::every: return every && *every > 0 && !at;
    case Kind::daily: return !every && at && valid_hh_mm(*at);
  }
  return false;
}

std::string ScheduleSpec::to_cli() const {
  switch (kind) {
    case Kind::once: return "once";
    case Kind::every: return "every@" + std::to_string(every.value_or(0));
    case Kind::daily: return "daily@" + at.value_or("");
  }
  return "once";
}

const TaskSpec* VDocument::find_task(std::string_view id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Digest

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string source_digest(const PlanSet& set, const Repository& repo) {
  return sha256_hex(text::serialize(set) + repo.save_manifest());
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

ErrorCode failure_code(const std::vector<Diagnostic>& diagnostics) {
  auto any = [&](auto pred) { return std::any_of(diagnostics.begin(), diagnostics.end(), pred); };
  if (any([](const Diagnostic& d) { return d.code == "RC-03"; })) return ErrorCode::CyclicDependency;
  if (any([](const Diagnostic& d) {
        return d.code == "AN-01" || d.code == "AN-02" || d.code == "AN-03" || d.code == "AN-04";
      })) {
    return ErrorCode::BindFailure;
  }
  return ErrorCode::NotValidated;
}

// Kahn's algorithm; ready tasks leave in id order.
std::vector<TaskSpec> topological(std::vector<TaskSpec> tasks) {
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  std::map<std::string, TaskSpec> by_id;
  for (auto& t : tasks) {
    pending[t.id] = t.after.size();
    for (const auto& a : t.after) dependents[a].push_back(t.id);
    by_id.emplace(t.id, std::move(t));
  }
  std::set<std::string> ready;
  for (const auto& [id, n] : pending) {
    if (n == 0) ready.insert(id);
  }
  std::vector<TaskSpec> ordered;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& d : dependents[id]) {
      if (--pending[d] == 0) ready.insert(d);
    }
    ordered.push_back(std::move(by_id.at(id)));
  }
  if (ordered.size() != by_id.size()) {
    std::string stuck;
    for (const auto& [id, n] : pending) {
      if (n > 0) stuck += (stuck.empty() ? "" : ", ") + id;
    }
    throw CompileError(ErrorCode::CyclicDependency, "task dependencies form a cycle: " + stuck);
  }
  return ordered;
}

}  // namespace

VDocument compile(const PlanSet& set, const Repository& repo,
                  const std::optional<ScheduleSpec>& schedule) {
  if (schedule && !schedule->valid()) {
    throw CompileError(ErrorCode::NotValidated, "schedule is malformed");
  }
  ValidationReport report = validate(set, repo);
  if (!report.ok) {
    throw CompileError(failure_code(report.diagnostics),
                       "plan set failed validation:\n" + report.render(), report.diagnostics);
  }

  VPlan flat;
  try {
    flat = flatten(set);
  } catch (const Error& e) {
    throw CompileError(ErrorCode::NotValidated, e.what());
  }

  std::vector<TaskSpec> tasks;
  for (const auto& t : flat.transitions()) {
    TaskSpec spec;
    spec.id = t.id;
    spec.origin_plan = t.origin_plan.empty() ? set.main : t.origin_plan;
    if (t.call) {
      spec.calls = *t.call;
      try {
        BoundTask bound = bind(repo.lookup(t.call->module), *t.call);
        spec.provider_ops = std::move(bound.provider_ops);
        spec.command = std::move(bound.command);
      } catch (const Error& e) {
        throw CompileError(ErrorCode::BindFailure, t.id + ": " + e.what());
      }
    }
    for (const auto& a : t.annotations) {
      if (a.kind == Annotation::Kind::on_event) spec.on_event.push_back({a.event, a.action});
    }

    std::set<std::string> after;
    std::optional<std::string> group;
    for (const auto& place : flat.inputs(t.id)) {
      spec.inputs.push_back(place);
      for (const auto& producer : flat.inputs(place)) after.insert(producer);
      if (flat.out_degree(place) >= 2 && (!group || place < *group)) group = place;
    }
    spec.outputs = flat.outputs(t.id);
    spec.after.assign(after.begin(), after.end());
    spec.choice_group = std::move(group);
    tasks.push_back(std::move(spec));
  }

  VDocument doc;
  doc.plan = set.main;
  doc.source_digest = source_digest(set, repo);
  doc.schedule = schedule;
  doc.tasks = topological(std::move(tasks));
  return doc;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ojson schedule_json(const ScheduleSpec& s) {
  ojson j = ojson::object();
  j["kind"] = std::string(to_string(s.kind));
  if (s.every) j["every"] = *s.every;
  if (s.at) j["at"] = *s.at;
  return j;
}

ojson task_json(const TaskSpec& t) {
  ojson j = ojson::object();
  j["id"] = t.id;
  j["origin_plan"] = t.origin_plan;
  if (t.calls) {
    ojson args = ojson::object();
    for (const auto& [k, v] : t.calls->args) args[k] = v;
    j["calls"] = ojson{{"module", t.calls->module}, {"args", args}};
  } else {
    j["calls"] = nullptr;
  }
  ojson ops = ojson::array();
  for (const auto& op : t.provider_ops) {
    ojson params = ojson::object();
    for (const auto& [k, v] : op.params) params[k] = v;
    ops.push_back(ojson{{"op", std::string(cloud::to_string(op.op))}, {"params", params}});
  }
  j["provider_ops"] = ops;
  j["command"] = t.command ? ojson(*t.command) : ojson(nullptr);
  j["after"] = t.after;
  j["choice_group"] = t.choice_group ? ojson(*t.choice_group) : ojson(nullptr);
  ojson handlers = ojson::array();
  for (const auto& h : t.on_event) {
    handlers.push_back(ojson{{"event", h.event}, {"action", std::string(to_string(h.action))}});
  }
  j["on_event"] = handlers;
  j["inputs"] = t.inputs;
  j["outputs"] = t.outputs;
  return j;
}

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::DocumentSyntax, "malformed vDocument: " + what);
}

const ojson& field(const ojson& obj, const char* key) {
  if (!obj.is_object()) bad("expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::string str(const ojson& j, const char* what) {
  if (!j.is_string()) bad(std::string(what) + " must be a string");
  return j.get<std::string>();
}

std::vector<std::string> str_list(const ojson& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(str(e, what));
  return out;
}

TaskSpec task_from(const ojson& j) {
  TaskSpec t;
  t.id = str(field(j, "id"), "id");
  t.origin_plan = str(field(j, "origin_plan"), "origin_plan");
  const ojson& calls = field(j, "calls");
  if (!calls.is_null()) {
    TaskCall call;
    call.module = str(field(calls, "module"), "calls.module");
    const ojson& args = field(calls, "args");
    if (!args.is_object()) bad("calls.args must be an object");
    for (const auto& [k, v] : args.items()) call.args.emplace_back(k, str(v, "argument value"));
    t.calls = std::move(call);
  }
  const ojson& ops = field(j, "provider_ops");
  if (!ops.is_array()) bad("provider_ops must be an array");
  for (const auto& o : ops) {
    auto kind = cloud::parse_op_kind(str(field(o, "op"), "op"));
    if (!kind) bad("unknown provider op");
    cloud::ProviderOp op;
    op.op = *kind;
    const ojson& params = field(o, "params");
    if (!params.is_object()) bad("params must be an object");
    for (const auto& [k, v] : params.items()) op.params[k] = str(v, "param value");
    t.provider_ops.push_back(std::move(op));
  }
  const ojson& command = field(j, "command");
  if (!command.is_null()) t.command = str(command, "command");
  t.after = str_list(field(j, "after"), "after");
  const ojson& group = field(j, "choice_group");
  if (!group.is_null()) t.choice_group = str(group, "choice_group");
  const ojson& handlers = field(j, "on_event");
  if (!handlers.is_array()) bad("on_event must be an array");
  for (const auto& h : handlers) {
    auto action = parse_event_action(str(field(h, "action"), "action"));
    if (!action) bad("unknown event action");
    t.on_event.push_back({str(field(h, "event"), "event"), *action});
  }
  t.inputs = str_list(field(j, "inputs"), "inputs");
  t.outputs = str_list(field(j, "outputs"), "outputs");
  return t;
}

}  // namespace

std::string emit(const VDocument& doc) {
  ojson j = ojson::object();
  j["format_version"] = doc.format_version;
  j["plan"] = doc.plan;
  j["digest_alg"] = doc.digest_alg;
  j["source_digest"] = doc.source_digest;
  j["schedule"] = doc.schedule ? schedule_json(*doc.schedule) : ojson(nullptr);
  ojson tasks = ojson::array();
  for (const auto& t : doc.tasks) tasks.push_back(task_json(t));
  j["tasks"] = tasks;
  return j.dump(2) + "\n";
}

VDocument parse_vdoc(std::string_view json) {
  ojson j;
  try {
    j = ojson::parse(json.begin(), json.end());
  } catch (const ojson::parse_error& e) {
    bad(e.what());
  }
  VDocument doc;
  const ojson& version = field(j, "format_version");
  if (!version.is_number_integer() || version.get<int>() != 1) bad("format_version must be 1");
  doc.plan = str(field(j, "plan"), "plan");
  doc.digest_alg = str(field(j, "digest_alg"), "digest_alg");
  doc.source_digest = str(field(j, "source_digest"), "source_digest");
  const ojson& sched = field(j, "schedule");
  if (!sched.is_null()) {
    ScheduleSpec s;
    const std::string kind = str(field(sched, "kind"), "schedule.kind");
    if (kind == "once") {
      s.kind = ScheduleSpec::Kind::once;
    } else if (kind == "every") {
      s.kind = ScheduleSpec::Kind::every;
    } else if (kind == "daily") {
      s.kind = ScheduleSpec::Kind::daily;
    } else {
      bad("unknown schedule kind");
    }
    if (auto it = sched.find("every"); it != sched.end()) {
      if (!it->is_number_integer()) bad("schedule.every must be an integer");
      s.every = it->get<std::int64_t>();
    }
    if (auto it = sched.find("at"); it != sched.end()) s.at = str(*it, "schedule.at");
    if (!s.valid()) bad("schedule fields do not match its kind");
    doc.schedule = std::move(s);
  }
  const ojson& tasks = field(j, "tasks");
  if (!tasks.is_array()) bad("tasks must be an array");
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    doc.tasks.push_back(task_from(t));
    if (!ids.insert(doc.tasks.back().id).second) bad("duplicate task id " + doc.tasks.back().id);
  }
  for (const auto& t : doc.tasks) {
    for (const auto& a : t.after) {
      if (ids.count(a) == 0) bad("task " + t.id + " depends on unknown task " + a);
    }
  }
  return doc;
}

}  // namespace vflow
