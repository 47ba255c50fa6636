#include "vflow/executor.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <thread>

#include "vflow/error.hpp"

namespace vflow::exec {

std::string_view to_string(Status status) {
  switch (status) {
    case Status::ready: return "ready";
    case Status::paused: return "paused";
    case Status::interrupted: return "interrupted";
    case Status::finished: return "finished";
    case Status::failed: return "failed";
  }
  return "ready";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::ok: return "ok";
    case Outcome::skipped: return "skipped";
    case Outcome::error: return "error";
  }
  return "ok";
}

std::string format_record(const LogRecord& r) {
  return std::to_string(r.seq) + " task=" + r.task + " outcome=" + std::string(to_string(r.outcome)) +
         " calls=" + std::to_string(r.calls.size()) + " note=" + r.note;
}

std::string export_log(const ExecutionLog& log, const std::vector<cloud::CallRecord>& calls) {
  std::string out;
  for (const auto& r : log.records) {
    out += format_record(r);
    out += '\n';
    for (auto seq : r.calls) {
      if (seq == 0 || seq > calls.size()) continue;
      out += "  ";
      out += cloud::format_call(calls[seq - 1]);
      out += '\n';
    }
  }
  return out;
}

std::string lowest_id_policy(const std::vector<std::string>& eligible) {
  return *std::min_element(eligible.begin(), eligible.end());
}

void EventQueue::push(std::string event) {
  std::lock_guard lock(mutex_);
  events_.push_back(std::move(event));
}

std::vector<std::string> EventQueue::drain() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out(std::make_move_iterator(events_.begin()),
                               std::make_move_iterator(events_.end()));
  events_.clear();
  return out;
}

std::set<std::string> runnable_closure(const VDocument& doc,
                                       const std::optional<std::string>& scope) {
  std::set<std::string> out;
  if (!scope) {
    for (const auto& t : doc.tasks) out.insert(t.id);
    return out;
  }
  std::vector<std::string> stack;
  for (const auto& t : doc.tasks) {
    if (t.origin_plan == *scope) stack.push_back(t.id);
  }
  while (!stack.empty()) {
    std::string id = std::move(stack.back());
    stack.pop_back();
    if (!out.insert(id).second) continue;
    if (const TaskSpec* t = doc.find_task(id)) {
      for (const auto& a : t->after) stack.push_back(a);
    }
  }
  return out;
}

Marking initial_token_view(const VDocument& doc) {
  std::set<std::string> produced;
  for (const auto& t : doc.tasks) produced.insert(t.outputs.begin(), t.outputs.end());
  std::set<std::string> starts;
  for (const auto& t : doc.tasks) {
    for (const auto& p : t.inputs) {
      if (produced.count(p) == 0) starts.insert(p);
    }
  }
  Marking m;
  for (const auto& p : starts) m.add(p);
  return m;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(VDocument doc, std::optional<std::string> scope, SessionOptions options)
    : doc_(std::move(doc)),
      scope_(std::move(scope)),
      options_(std::move(options)),
      provider_(options_.pending_steps),
      queue_(std::make_unique<EventQueue>()) {
  if (scope_) {
    const bool known = std::any_of(doc_.tasks.begin(), doc_.tasks.end(),
                                   [&](const TaskSpec& t) { return t.origin_plan == *scope_; });
    if (!known) throw Error(ErrorCode::UnknownScope, "no task originates from plan '" + *scope_ + "'");
  }
  if (!options_.choice) options_.choice = lowest_id_policy;
  runnable_ = runnable_closure(doc_, scope_);
  marking_ = initial_token_view(doc_);
}

Session open_session(VDocument doc, std::optional<std::string> scope, SessionOptions options) {
  return Session(std::move(doc), std::move(scope), std::move(options));
}

void Session::raise_event(std::string event) { queue_->push(std::move(event)); }
void Session::add_breakpoint(const std::string& task) { breakpoints_.insert(task); }
void Session::remove_breakpoint(const std::string& task) { breakpoints_.erase(task); }

void Session::resume() {
  if (status_ == Status::interrupted) status_ = Status::paused;
}

bool Session::enabled(const TaskSpec& task) const {
  if (task.inputs.empty()) return false;
  return std::all_of(task.inputs.begin(), task.inputs.end(),
                     [&](const std::string& p) { return marking_.count(p) > 0; });
}

bool Session::after_resolved(const TaskSpec& task) const {
  return std::all_of(task.after.begin(), task.after.end(), [&](const std::string& a) {
    return resolved_.count(a) != 0 || runnable_.count(a) == 0;
  });
}

bool Session::eligible(const TaskSpec& task) const {
  return runnable_.count(task.id) != 0 && resolved_.count(task.id) == 0 && after_resolved(task) &&
         enabled(task);
}

bool Session::has_handler(const TaskSpec& task, const std::string& event) const {
  return std::any_of(task.on_event.begin(), task.on_event.end(),
                     [&](const EventHandler& h) { return h.event == event; });
}

void Session::fire_token(const TaskSpec& task) {
  for (const auto& p : task.inputs) marking_.remove(p);
  for (const auto& p : task.outputs) marking_.add(p);
  fired_.push_back(task.id);
}

LogRecord& Session::record(const std::string& task, Outcome outcome, std::string note,
                           std::vector<std::uint64_t> calls) {
  LogRecord r;
  r.seq = log_.records.size() + 1;
  r.task = task;
  r.calls = std::move(calls);
  r.outcome = outcome;
  r.note = std::move(note);
  log_.records.push_back(std::move(r));
  return log_.records.back();
}

void Session::execute(const TaskSpec& task, bool retry_armed, StepResult& result) {
  const int max_attempts = retry_armed ? 1 + options_.max_retries : 1;
  std::vector<std::uint64_t> calls;
  std::string failure;
  int attempt = 0;
  for (; attempt < max_attempts; ++attempt) {
    failure.clear();
    for (const auto& op : task.provider_ops) {
      const auto& res = provider_.invoke(op);
      calls.push_back(provider_.state().call_log.back().seq);
      if (!res.ok()) {
        failure = std::string(to_string(*res.error)) + ": " + res.text;
        break;
      }
    }
    if (failure.empty() && task.command && options_.command_runner) {
      const int rc = options_.command_runner(*task.command);
      if (rc != 0) failure = "command exited with status " + std::to_string(rc);
    }
    if (failure.empty()) break;
  }

  std::string note;
  if (retry_armed) {
    note = "retries=" + std::to_string(std::min(attempt, max_attempts - 1)) + "/" +
           std::to_string(options_.max_retries);
  }
  auto append = [&](const std::string& s) {
    if (!note.empty()) note += "; ";
    note += s;
  };
  if (failure.empty() && task.command && !options_.command_runner) {
    append("command not run: " + *task.command);
  }

  if (failure.empty()) {
    fire_token(task);
    resolved_.insert(task.id);
    result.records.push_back(record(task.id, Outcome::ok, note, std::move(calls)));
  } else {
    append(failure);
    resolved_.insert(task.id);
    result.records.push_back(record(task.id, Outcome::error, note, std::move(calls)));
    status_ = Status::failed;
  }
}

void Session::resolve_dead(StepResult& result) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& t : doc_.tasks) {
      if (runnable_.count(t.id) == 0 || resolved_.count(t.id) != 0) continue;
      if (after_resolved(t) && !enabled(t)) {
        resolved_.insert(t.id);
        result.records.push_back(record(t.id, Outcome::skipped, "dead path"));
        changed = true;
      }
    }
  }
}

bool Session::finish_if_done(StepResult& result) {
  const bool any_eligible =
      std::any_of(doc_.tasks.begin(), doc_.tasks.end(), [&](const TaskSpec& t) { return eligible(t); });
  if (any_eligible) return false;
  // Nothing can run any more; whatever is left is blocked for good.
  for (const auto& t : doc_.tasks) {
    if (runnable_.count(t.id) != 0 && resolved_.count(t.id) == 0) {
      resolved_.insert(t.id);
      result.records.push_back(record(t.id, Outcome::skipped, "unreachable"));
    }
  }
  status_ = Status::finished;
  return true;
}

StepResult Session::advance(bool honor_breakpoints) {
  if (status_ != Status::ready && status_ != Status::paused) {
    throw Error(ErrorCode::NotSteppable,
                "session is " + std::string(to_string(status_)) + "; expected ready or paused");
  }
  StepResult result;

  for (auto& e : queue_->drain()) {
    const bool handled = std::any_of(doc_.tasks.begin(), doc_.tasks.end(), [&](const TaskSpec& t) {
      return runnable_.count(t.id) != 0 && resolved_.count(t.id) == 0 && has_handler(t, e);
    });
    if (handled) active_events_.push_back(std::move(e));
  }

  resolve_dead(result);
  if (finish_if_done(result)) {
    result.status = status_;
    return result;
  }

  const TaskSpec* next = nullptr;
  for (const auto& t : doc_.tasks) {
    if (eligible(t)) {
      next = &t;
      break;
    }
  }
  std::vector<std::string> rivals;
  if (next->choice_group) {
    std::vector<std::string> members;
    for (const auto& t : doc_.tasks) {
      if (t.choice_group == next->choice_group && eligible(t)) members.push_back(t.id);
    }
    const std::string chosen = options_.choice(members);
    next = doc_.find_task(chosen);
    for (auto& m : members) {
      if (m != chosen) rivals.push_back(std::move(m));
    }
  }
  result.task = next->id;

  if (honor_breakpoints && breakpoints_.count(next->id) != 0 && resume_past_ != next->id) {
    status_ = Status::paused;
    resume_past_ = next->id;
    result.status = status_;
    return result;
  }
  resume_past_.reset();

  auto matched = std::find_if(active_events_.begin(), active_events_.end(),
                              [&](const std::string& e) { return has_handler(*next, e); });
  std::optional<EventAction> action;
  std::string event;
  if (matched != active_events_.end()) {
    event = *matched;
    active_events_.erase(matched);
    for (const auto& h : next->on_event) {
      if (h.event == event) {
        action = h.action;
        break;
      }
    }
  }

  ++steps_taken_;
  if (action == EventAction::interrupt) {
    status_ = Status::interrupted;
    result.status = status_;
    return result;
  }
  if (action == EventAction::skip) {
    fire_token(*next);
    resolved_.insert(next->id);
    result.records.push_back(record(next->id, Outcome::skipped, "event " + event + ": skip"));
  } else {
    execute(*next, action == EventAction::retry, result);
  }

  for (const auto& r : rivals) {
    if (resolved_.count(r) != 0) continue;
    resolved_.insert(r);
    result.records.push_back(
        record(r, Outcome::skipped, "choice " + *next->choice_group + ": " + next->id + " selected"));
  }

  if (status_ != Status::failed) {
    resolve_dead(result);
    finish_if_done(result);
  }
  result.status = status_;
  return result;
}

StepResult Session::step() { return advance(false); }

StepResult Session::run_step() { return advance(true); }

void Session::run() {
  if (status_ != Status::ready && status_ != Status::paused) {
    throw Error(ErrorCode::NotSteppable,
                "session is " + std::string(to_string(status_)) + "; expected ready or paused");
  }
  status_ = Status::ready;
  while (status_ == Status::ready) run_step();
}

std::string Session::export_text() const { return export_log(log_, provider_.state().call_log); }

// ---------------------------------------------------------------------------
// Scheduling

std::string format_utc(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::optional<Timestamp> parse_utc(std::string_view text) {
  using namespace std::chrono;
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && p == text.data() + pos + len;
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (text.size() < 17 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':') {
    return std::nullopt;
  }
  if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d) || !num(11, 2, h) || !num(14, 2, mi)) {
    return std::nullopt;
  }
  std::size_t rest = 16;
  if (text.size() > rest && text[rest] == ':') {
    if (!num(rest + 1, 2, s)) return std::nullopt;
    rest += 3;
  }
  if (text.substr(rest) != "Z") return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

Timestamp ClockSource::now() const {
  if (kind_ == Kind::wall) {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  }
  return now_;
}

void ClockSource::advance_to(Timestamp t) {
  if (kind_ == Kind::simulated && t > now_) now_ = t;
}

void ClockSource::wait_until(Timestamp t) {
  if (kind_ == Kind::wall) {
    std::this_thread::sleep_until(t);
  } else {
    advance_to(t);
  }
}

std::vector<Timestamp> schedule_points(const ScheduleSpec& spec, Timestamp from, Timestamp until) {
  using namespace std::chrono;
  std::vector<Timestamp> out;
  switch (spec.kind) {
    case ScheduleSpec::Kind::once:
      if (from <= until) out.push_back(from);
      break;
    case ScheduleSpec::Kind::every: {
      const seconds step{spec.every.value_or(0)};
      if (step <= seconds{0}) break;
      for (Timestamp t = from + step; t <= until; t += step) out.push_back(t);
      break;
    }
    case ScheduleSpec::Kind::daily: {
      const std::string at = spec.at.value_or("00:00");
      const auto offset = hours{std::stoi(at.substr(0, 2))} + minutes{std::stoi(at.substr(3, 2))};
      Timestamp t = floor<days>(from) + offset;
      if (t <= from) t += days{1};
      for (; t <= until; t += days{1}) out.push_back(t);
      break;
    }
  }
  return out;
}

std::vector<ScheduledRun> schedule_runs(const VDocument& doc, ClockSource& clock, Timestamp until,
                                        const SessionOptions& options) {
  if (!doc.schedule) throw Error(ErrorCode::NoSchedule, "document " + doc.plan + " has no schedule");
  std::vector<ScheduledRun> runs;
  for (Timestamp t : schedule_points(*doc.schedule, clock.now(), until)) {
    clock.wait_until(t);
    Session session(doc, std::nullopt, options);
    while (session.status() == Status::ready || session.status() == Status::paused) session.run();
    runs.push_back({t, session.log(), session.status(), session.provider().call_log});
  }
  return runs;
}

}  // namespace vflow::exec
