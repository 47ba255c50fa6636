#include "vflow/service.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "vflow/error.hpp"
#include "vflow/pipeline.hpp"
#include "vflow/vdocument.hpp"

namespace vflow::service {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::text: return "text";
    case Origin::graphic: return "graphic";
    case Origin::system: return "system";
  }
  return "text";
}

std::optional<Origin> parse_origin(std::string_view text) {
  if (text == "text") return Origin::text;
  if (text == "graphic") return Origin::graphic;
  if (text == "system") return Origin::system;
  return std::nullopt;
}

bool valid_plan_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// ---------------------------------------------------------------------------
// PlanStore

namespace {

exec::Timestamp now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace

PlanStore::PlanStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create plans directory " + dir_.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".vplan") continue;
    const std::string id = entry.path().stem().string();
    if (!valid_plan_id(id)) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    plans_[id] = PlanRecord{id, {buf.str(), 0}, now_utc()};
  }
}

std::optional<PlanRecord> PlanStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = plans_.find(id);
  if (it == plans_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> PlanStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, rec] : plans_) out.push_back(id);
  return out;
}

PutResult PlanStore::put(const std::string& id, const std::string& text,
                         std::uint64_t base_revision, Origin origin) {
  // Parsing needs no lock; the revision check and commit happen atomically below.
  auto parsed = text::parse(text);

  std::unique_lock lock(mutex_);
  auto it = plans_.find(id);
  const std::uint64_t current = it == plans_.end() ? 0 : it->second.document.revision;
  if (base_revision != current) return {PutResult::Kind::conflict, current, {}};
  if (!parsed.ok()) return {PutResult::Kind::invalid, current, std::move(parsed.diagnostics)};

  if (!dir_.empty()) {
    const auto path = dir_ / (id + ".vplan");
    const auto tmp = dir_ / (id + ".vplan.tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string());
  }

  const std::uint64_t revision = current + 1;
  plans_[id] = PlanRecord{id, {text, revision}, now_utc()};
  notices_[id].push_back({id, revision, origin});
  lock.unlock();
  changed_.notify_all();
  return {PutResult::Kind::accepted, revision, {}};
}

std::vector<ChangeNotice> PlanStore::changes(const std::string& id, std::uint64_t since,
                                             std::chrono::milliseconds timeout) const {
  auto collect = [&] {
    std::vector<ChangeNotice> out;
    auto it = notices_.find(id);
    if (it == notices_.end()) return out;
    for (const auto& n : it->second) {
      if (n.revision > since) out.push_back(n);
    }
    return out;
  };
  std::unique_lock lock(mutex_);
  std::vector<ChangeNotice> out;
  changed_.wait_for(lock, timeout, [&] {
    out = collect();
    return !out.empty() || stopping_;
  });
  return out;
}

void PlanStore::shutdown() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
}

// ---------------------------------------------------------------------------
// JSON views

namespace {

ojson diagnostic_json(const Diagnostic& d) {
  ojson j = ojson::object();
  j["code"] = d.code;
  j["severity"] = d.severity == Severity::error ? "error" : "warning";
  j["plan"] = d.plan;
  j["node"] = d.node ? ojson(*d.node) : ojson(nullptr);
  j["line"] = d.line ? ojson(*d.line) : ojson(nullptr);
  j["message"] = d.message;
  return j;
}

ojson diagnostics_json(const std::vector<Diagnostic>& ds) {
  ojson arr = ojson::array();
  for (const auto& d : ds) arr.push_back(diagnostic_json(d));
  return arr;
}

ojson report_json(const ValidationReport& report) {
  ojson j = ojson::object();
  j["ok"] = report.ok;
  j["diagnostics"] = diagnostics_json(report.diagnostics);
  j["report"] = report.render();
  return j;
}

ojson record_json(const exec::LogRecord& r) {
  ojson j = ojson::object();
  j["seq"] = r.seq;
  j["task"] = r.task;
  j["calls"] = r.calls;
  j["outcome"] = std::string(exec::to_string(r.outcome));
  j["note"] = r.note;
  return j;
}

ojson records_json(const std::vector<exec::LogRecord>& records) {
  ojson arr = ojson::array();
  for (const auto& r : records) arr.push_back(record_json(r));
  return arr;
}

ojson marking_json(const Marking& m) {
  ojson j = ojson::object();
  for (const auto& [place, n] : m.tokens()) j[place] = n;
  return j;
}

ojson step_json(const exec::Session& s, const exec::StepResult& r) {
  ojson j = ojson::object();
  j["record"] = r.records.empty() ? ojson(nullptr) : record_json(r.records.front());
  j["records"] = records_json(r.records);
  j["task"] = r.task ? ojson(*r.task) : ojson(nullptr);
  j["status"] = std::string(exec::to_string(s.status()));
  j["marking"] = marking_json(s.marking());
  return j;
}

ojson session_json(const exec::Session& s) {
  ojson j = ojson::object();
  j["status"] = std::string(exec::to_string(s.status()));
  j["completed"] = s.completed();
  j["log"] = records_json(s.log().records);
  j["marking"] = marking_json(s.marking());
  j["breakpoints"] = s.breakpoints();
  j["log_text"] = s.export_text();
  return j;
}

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<Diagnostic>* diagnostics = nullptr) {
  ojson j = ojson::object();
  j["code"] = std::string(code);
  j["message"] = message;
  if (diagnostics != nullptr) j["diagnostics"] = diagnostics_json(*diagnostics);
  send_json(res, status, j);
}

/// Parses the body as a JSON object; an empty body is an empty object.
std::optional<ojson> body_json(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return ojson::object();
  try {
    ojson j = ojson::parse(req.body);
    if (!j.is_object()) {
      send_error(res, 400, "BadRequest", "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const ojson::parse_error& e) {
    send_error(res, 400, "BadRequest", std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

/// Accepts either the CLI form ("daily@00:00") or {kind, at?, every?}.
std::optional<ScheduleSpec> schedule_from(const ojson& j, std::string& error) {
  if (j.is_string()) {
    auto s = ScheduleSpec::parse(j.get<std::string>());
    if (!s) error = "schedule must be daily@HH:MM, every@SECONDS or once";
    return s;
  }
  if (j.is_object() && j.contains("kind") && j["kind"].is_string()) {
    ScheduleSpec s;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "once") {
      s.kind = ScheduleSpec::Kind::once;
    } else if (kind == "every") {
      s.kind = ScheduleSpec::Kind::every;
    } else if (kind == "daily") {
      s.kind = ScheduleSpec::Kind::daily;
    } else {
      error = "unknown schedule kind";
      return std::nullopt;
    }
    if (j.contains("every") && j["every"].is_number_integer()) s.every = j["every"].get<std::int64_t>();
    if (j.contains("at") && j["at"].is_string()) s.at = j["at"].get<std::string>();
    if (s.valid()) return s;
  }
  error = "malformed schedule";
  return std::nullopt;
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  char buf[20];
  std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Service

Service::Service(ServiceConfig config)
    : config_(std::move(config)), plans_(config_.plans_dir) {}

Service::~Service() { stop(); }

const Repository& Service::repository() const {
  return config_.repo ? *config_.repo : empty_repo_;
}

std::shared_ptr<Service::SessionSlot> Service::find_session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string Service::add_session(exec::Session session) {
  auto slot = std::make_shared<SessionSlot>();
  slot->session = std::make_unique<exec::Session>(std::move(session));
  std::lock_guard lock(sessions_mutex_);
  std::string id;
  do {
    id = new_session_id();
  } while (sessions_.count(id) != 0);
  sessions_[id] = std::move(slot);
  return id;
}

void Service::mount(httplib::Server& server) {
  static const std::string plan = R"(/plans/([A-Za-z0-9_\-]+))";
  static const std::string session = R"(/sessions/([A-Za-z0-9_\-]+))";

  server.Get(plan, [this](const httplib::Request& req, httplib::Response& res) {
    auto rec = plans_.get(req.matches[1]);
    if (!rec) return send_error(res, 404, "NotFound", "no plan '" + std::string(req.matches[1]) + "'");
    ojson j = ojson::object();
    j["text"] = rec->document.text;
    j["revision"] = rec->document.revision;
    send_json(res, 200, j);
  });

  server.Put(plan, [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto body = body_json(req, res);
    if (!body) return;
    if (!body->contains("text") || !(*body)["text"].is_string() || !body->contains("base_revision") ||
        !(*body)["base_revision"].is_number_unsigned()) {
      return send_error(res, 400, "BadRequest", "body needs {text, base_revision, origin}");
    }
    Origin origin = Origin::text;
    if (body->contains("origin")) {
      auto o = (*body)["origin"].is_string() ? parse_origin((*body)["origin"].get<std::string>())
                                             : std::nullopt;
      if (!o) return send_error(res, 400, "BadRequest", "origin must be text, graphic or system");
      origin = *o;
    }
    PutResult result;
    try {
      result = plans_.put(id, (*body)["text"].get<std::string>(),
                          (*body)["base_revision"].get<std::uint64_t>(), origin);
    } catch (const Error& e) {
      return send_error(res, 500, to_string(e.code()), e.what());
    }
    switch (result.kind) {
      case PutResult::Kind::conflict: {
        ojson j = ojson::object();
        j["code"] = "Conflict";
        j["message"] = "base_revision is stale";
        j["current_revision"] = result.revision;
        return send_json(res, 409, j);
      }
      case PutResult::Kind::invalid:
        return send_error(res, 422, "ParseError", "plan text does not parse", &result.diagnostics);
      case PutResult::Kind::accepted: {
        ojson j = ojson::object();
        j["revision"] = result.revision;
        return send_json(res, 200, j);
      }
    }
  });

  server.Get(plan + "/changes", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t since = 0;
    if (req.has_param("since")) {
      const std::string s = req.get_param_value("since");
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), since);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        return send_error(res, 400, "BadRequest", "since must be a revision number");
      }
    }
    auto notices = plans_.changes(req.matches[1], since, config_.poll_timeout);
    ojson arr = ojson::array();
    for (const auto& n : notices) {
      arr.push_back(ojson{{"plan_id", n.plan_id},
                          {"revision", n.revision},
                          {"origin", std::string(to_string(n.origin))}});
    }
    send_json(res, 200, ojson{{"changes", arr}});
  });

  server.Post(plan + "/validate", [this](const httplib::Request& req, httplib::Response& res) {
    auto rec = plans_.get(req.matches[1]);
    if (!rec) return send_error(res, 404, "NotFound", "no plan '" + std::string(req.matches[1]) + "'");
    const Repository* repo = config_.repo ? &*config_.repo : nullptr;
    send_json(res, 200, report_json(validate_source(rec->document.text, repo)));
  });

  server.Post(plan + "/compile", [this](const httplib::Request& req, httplib::Response& res) {
    auto rec = plans_.get(req.matches[1]);
    if (!rec) return send_error(res, 404, "NotFound", "no plan '" + std::string(req.matches[1]) + "'");
    auto body = body_json(req, res);
    if (!body) return;
    std::optional<ScheduleSpec> schedule;
    if (body->contains("schedule") && !(*body)["schedule"].is_null()) {
      std::string error;
      schedule = schedule_from((*body)["schedule"], error);
      if (!schedule) return send_error(res, 400, "BadRequest", error);
    }
    try {
      VDocument doc = compile_source(rec->document.text, repository(), schedule);
      res.status = 200;
      res.set_content(emit(doc), "application/json");
    } catch (const CompileError& e) {
      send_error(res, 422, to_string(e.code()), e.what(), &e.diagnostics());
    }
  });

  server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_json(req, res);
    if (!body) return;
    std::optional<VDocument> doc;
    try {
      if (body->contains("vdocument")) {
        const ojson& v = (*body)["vdocument"];
        doc = parse_vdoc(v.is_string() ? v.get<std::string>() : v.dump());
      } else if (body->contains("plan_id") && (*body)["plan_id"].is_string()) {
        const std::string id = (*body)["plan_id"].get<std::string>();
        auto rec = plans_.get(id);
        if (!rec) return send_error(res, 404, "NotFound", "no plan '" + id + "'");
        std::optional<ScheduleSpec> schedule;
        if (body->contains("schedule") && !(*body)["schedule"].is_null()) {
          std::string error;
          schedule = schedule_from((*body)["schedule"], error);
          if (!schedule) return send_error(res, 400, "BadRequest", error);
        }
        doc = compile_source(rec->document.text, repository(), schedule);
      } else {
        return send_error(res, 400, "BadRequest", "body needs vdocument or plan_id");
      }
      std::optional<std::string> scope;
      if (body->contains("module") && (*body)["module"].is_string()) {
        scope = (*body)["module"].get<std::string>();
      }
      std::string id = add_session(exec::open_session(std::move(*doc), scope));
      send_json(res, 201, ojson{{"session_id", id}});
    } catch (const CompileError& e) {
      send_error(res, 422, to_string(e.code()), e.what(), &e.diagnostics());
    } catch (const Error& e) {
      send_error(res, 422, to_string(e.code()), e.what());
    }
  });

  auto with_session = [this](const httplib::Request& req, httplib::Response& res, auto&& fn) {
    auto slot = find_session(req.matches[1]);
    if (!slot) return send_error(res, 404, "NotFound", "no session '" + std::string(req.matches[1]) + "'");
    std::lock_guard lock(slot->mutex);
    try {
      fn(*slot->session);
    } catch (const Error& e) {
      send_error(res, 409, to_string(e.code()), e.what());
    }
  };

  server.Get(session, [with_session](const httplib::Request& req, httplib::Response& res) {
    with_session(req, res, [&](exec::Session& s) { send_json(res, 200, session_json(s)); });
  });

  server.Post(session + "/step", [with_session](const httplib::Request& req, httplib::Response& res) {
    with_session(req, res, [&](exec::Session& s) {
      auto r = s.step();
      send_json(res, 200, step_json(s, r));
    });
  });

  server.Post(session + "/run", [with_session](const httplib::Request& req, httplib::Response& res) {
    with_session(req, res, [&](exec::Session& s) {
      const std::size_t before = s.log().records.size();
      s.run();
      exec::StepResult r;
      r.records.assign(s.log().records.begin() + static_cast<std::ptrdiff_t>(before),
                       s.log().records.end());
      r.status = s.status();
      send_json(res, 200, step_json(s, r));
    });
  });

  server.Post(session + "/resume", [with_session](const httplib::Request& req, httplib::Response& res) {
    with_session(req, res, [&](exec::Session& s) {
      s.resume();
      send_json(res, 200, ojson{{"status", std::string(exec::to_string(s.status()))}});
    });
  });

  server.Post(session + "/breakpoints",
              [with_session](const httplib::Request& req, httplib::Response& res) {
                auto body = body_json(req, res);
                if (!body) return;
                if (!body->contains("task_id") || !(*body)["task_id"].is_string()) {
                  return send_error(res, 400, "BadRequest", "body needs {task_id}");
                }
                with_session(req, res, [&](exec::Session& s) {
                  const std::string task = (*body)["task_id"].get<std::string>();
                  if (s.doc().find_task(task) == nullptr) {
                    return send_error(res, 404, "NotFound", "no task '" + task + "'");
                  }
                  s.add_breakpoint(task);
                  send_json(res, 200, ojson{{"breakpoints", s.breakpoints()}});
                });
              });

  server.Post(session + "/events", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_json(req, res);
    if (!body) return;
    if (!body->contains("event") || !(*body)["event"].is_string()) {
      return send_error(res, 400, "BadRequest", "body needs {event}");
    }
    auto slot = find_session(req.matches[1]);
    if (!slot) return send_error(res, 404, "NotFound", "no session '" + std::string(req.matches[1]) + "'");
    // The event queue is the one channel that does not need the session lock.
    slot->session->raise_event((*body)["event"].get<std::string>());
    send_json(res, 202, ojson{{"queued", true}});
  });
}

void Service::listen(const std::string& host, int port, const std::function<void(int)>& on_bound) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  if (on_bound) on_bound(bound);
  server_->listen_after_bind();
}

void Service::stop() {
  plans_.shutdown();
  if (server_) server_->stop();
}

int serve(ServiceConfig config, const std::string& host, int port) {
  Service service(std::move(config));
  service.listen(host, port, [&](int bound) {
    std::fprintf(stderr, "vflow service listening on %s:%d\n", host.c_str(), bound);
  });
  return 0;
}

}  // namespace vflow::service
