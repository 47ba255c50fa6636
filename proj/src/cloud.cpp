#include "vflow/cloud.hpp"

#include <charconv>
#include <cstdio>

namespace vflow::cloud {

namespace {

struct OpName {
  OpKind op;
  std::string_view name;
};

constexpr OpName kOps[] = {
    {OpKind::run_instance, "run_instance"}, {OpKind::terminate_instance, "terminate_instance"},
    {OpKind::put_object, "put_object"},     {OpKind::get_object, "get_object"},
    {OpKind::submit_job, "submit_job"},     {OpKind::wait_job, "wait_job"},
};

std::string make_id(char prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c-%04llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

OpResult failure(ErrorCode code, std::string message) {
  return {code, std::move(message), {}};
}

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ',';
    out += id;
  }
  return out;
}

bool parse_u64(std::string_view text, std::uint64_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

void tick_pending(ProviderState& state) {
  for (auto it = state.pending_left.begin(); it != state.pending_left.end();) {
    if (--it->second <= 0) {
      state.instances[it->first] = InstanceState::running;
      it = state.pending_left.erase(it);
    } else {
      ++it;
    }
  }
}

OpResult apply(ProviderState& state, const ProviderOp& op) {
  for (const auto& key : required_params(op.op)) {
    if (op.params.count(key) == 0) {
      return failure(ErrorCode::MissingParam,
                     std::string(to_string(op.op)) + " requires parameter '" + key + "'");
    }
  }
  const auto& p = op.params;
  switch (op.op) {
    case OpKind::run_instance: {
      std::uint64_t count = 0;
      if (!parse_u64(p.at("count"), count) || count == 0 || count > 1000) {
        return failure(ErrorCode::TypeMismatch, "count must be an integer in 1..1000");
      }
      std::vector<std::string> ids;
      for (std::uint64_t i = 0; i < count; ++i) {
        std::string id = make_id('i', state.next_instance++);
        if (state.pending_steps > 0) {
          state.instances[id] = InstanceState::pending;
          state.pending_left[id] = state.pending_steps;
        } else {
          state.instances[id] = InstanceState::running;
        }
        ids.push_back(std::move(id));
      }
      return {std::nullopt, join(ids), ids};
    }
    case OpKind::terminate_instance: {
      const std::string& id = p.at("instance_id");
      auto it = state.instances.find(id);
      if (it == state.instances.end()) return failure(ErrorCode::UnknownId, "no instance " + id);
      if (it->second == InstanceState::terminated) {
        return failure(ErrorCode::AlreadyTerminated, "instance " + id + " already terminated");
      }
      if (it->second == InstanceState::pending) {
        return failure(ErrorCode::NotRunning, "instance " + id + " is still pending");
      }
      it->second = InstanceState::terminated;
      return {std::nullopt, id, {id}};
    }
    case OpKind::put_object: {
      std::uint64_t size = 0;
      if (auto it = p.find("size"); it != p.end() && !parse_u64(it->second, size)) {
        return failure(ErrorCode::TypeMismatch, "size must be a non-negative integer");
      }
      const std::string ref = p.at("bucket") + "/" + p.at("key");
      state.objects[{p.at("bucket"), p.at("key")}] = size;
      return {std::nullopt, ref, {ref}};
    }
    case OpKind::get_object: {
      auto it = state.objects.find({p.at("bucket"), p.at("key")});
      const std::string ref = p.at("bucket") + "/" + p.at("key");
      if (it == state.objects.end()) return failure(ErrorCode::UnknownId, "no object " + ref);
      return {std::nullopt, ref + " size=" + std::to_string(it->second), {ref}};
    }
    case OpKind::submit_job: {
      std::string id = make_id('j', state.next_job++);
      state.jobs[id] = JobState::queued;
      return {std::nullopt, id, {id}};
    }
    case OpKind::wait_job: {
      const std::string& id = p.at("job_id");
      auto it = state.jobs.find(id);
      if (it == state.jobs.end()) return failure(ErrorCode::UnknownId, "no job " + id);
      it->second = JobState::done;
      return {std::nullopt, id + " done", {id}};
    }
  }
  return failure(ErrorCode::MissingParam, "unsupported op");
}

bool needs_quotes(std::string_view v) {
  if (v.empty()) return true;
  for (char c : v) {
    if (c == ' ' || c == '\t' || c == '"' || c == '\n') return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(OpKind op) {
  for (const auto& entry : kOps) {
    if (entry.op == op) return entry.name;
  }
  return "unknown";
}

std::optional<OpKind> parse_op_kind(std::string_view name) {
  for (const auto& entry : kOps) {
    if (entry.name == name) return entry.op;
  }
  return std::nullopt;
}

const std::vector<std::string>& required_params(OpKind op) {
  static const std::vector<std::string> run{"count", "image"};
  static const std::vector<std::string> terminate{"instance_id"};
  static const std::vector<std::string> object{"bucket", "key"};
  static const std::vector<std::string> submit{"command"};
  static const std::vector<std::string> wait{"job_id"};
  switch (op) {
    case OpKind::run_instance: return run;
    case OpKind::terminate_instance: return terminate;
    case OpKind::put_object:
    case OpKind::get_object: return object;
    case OpKind::submit_job: return submit;
    case OpKind::wait_job: return wait;
  }
  return run;
}

std::string_view to_string(InstanceState state) {
  switch (state) {
    case InstanceState::pending: return "pending";
    case InstanceState::running: return "running";
    case InstanceState::terminated: return "terminated";
  }
  return "pending";
}

std::string_view to_string(JobState state) {
  return state == JobState::queued ? "queued" : "done";
}

std::pair<ProviderState, OpResult> invoke(ProviderState state, const ProviderOp& op) {
  tick_pending(state);
  OpResult result = apply(state, op);
  const std::uint64_t seq = state.call_log.size() + 1;
  state.call_log.push_back({seq, op, result});
  return {std::move(state), std::move(result)};
}

const OpResult& MockProvider::invoke(const ProviderOp& op) {
  auto [next, result] = cloud::invoke(std::move(state_), op);
  state_ = std::move(next);
  return state_.call_log.back().result;
}

std::string format_call(const CallRecord& record) {
  std::string line = std::to_string(record.seq) + " " + std::string(to_string(record.op.op));
  for (const auto& [k, v] : record.op.params) {
    line += " " + k + "=";
    if (needs_quotes(v)) {
      line += '"';
      for (char c : v) {
        if (c == '"' || c == '\\') line += '\\';
        line += c == '\n' ? ' ' : c;
      }
      line += '"';
    } else {
      line += v;
    }
  }
  line += " -> ";
  if (record.result.ok()) {
    line += "ok " + record.result.text;
  } else {
    line += "error " + std::string(vflow::to_string(*record.result.error)) + ": " +
            record.result.text;
  }
  return line;
}

std::string export_call_log(const std::vector<CallRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += format_call(r);
    out += '\n';
  }
  return out;
}

ProviderState replay(const std::vector<CallRecord>& log, int pending_steps) {
  ProviderState state;
  state.pending_steps = pending_steps;
  for (const auto& r : log) state = invoke(std::move(state), r.op).first;
  return state;
}

}  // namespace vflow::cloud
