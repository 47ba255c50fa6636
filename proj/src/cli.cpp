#include "vflow/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "vflow/error.hpp"
#include "vflow/executor.hpp"
#include "vflow/pipeline.hpp"
#include "vflow/repository.hpp"
#include "vflow/service.hpp"

namespace vflow {
namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;

struct IoFailure {
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure{"cannot read " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::IoError ? kIo : kFailed;
}

struct ValidateArgs {
  std::string file;
  std::string repo;
};

struct CompileArgs {
  std::string file;
  std::string repo;
  std::string output;
  std::string schedule;
};

struct RunArgs {
  std::string file;
  bool step = false;
  std::string module;
  std::vector<std::string> breaks;
  std::vector<std::string> events;
};

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string plans_dir = "plans";
  std::string repo;
};

int do_validate(const ValidateArgs& args, std::ostream& out) {
  const std::string text = read_file(args.file);
  std::optional<Repository> repo;
  if (!args.repo.empty()) repo = Repository::load_manifest(args.repo);
  auto report = validate_source(text, repo ? &*repo : nullptr);
  out << report.render();
  return report.ok ? kOk : kFailed;
}

int do_compile(const CompileArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<ScheduleSpec> schedule;
  if (!args.schedule.empty()) {
    schedule = ScheduleSpec::parse(args.schedule);
    if (!schedule) {
      err << "error: --schedule must be daily@HH:MM, every@SECONDS or once\n";
      return kUsage;
    }
  }
  const std::string text = read_file(args.file);
  Repository repo = Repository::load_manifest(args.repo);
  try {
    const std::string doc = emit(compile_source(text, repo, schedule));
    if (args.output.empty()) {
      out << doc;
      return kOk;
    }
    std::ofstream file(args.output, std::ios::binary | std::ios::trunc);
    file << doc;
    if (!file) throw IoFailure{"cannot write " + args.output};
    return kOk;
  } catch (const CompileError& e) {
    out << make_report(e.diagnostics()).render();
    const std::string what = e.what();
    err << "error: " << to_string(e.code()) << ": " << what.substr(0, what.find('\n')) << "\n";
    return kFailed;
  }
}

/// `name@k` -> (k, name); the event is raised before the k-th step (0-based).
std::optional<std::pair<std::uint64_t, std::string>> parse_event_option(const std::string& text) {
  const auto at = text.rfind('@');
  if (at == std::string::npos || at == 0 || at + 1 == text.size()) return std::nullopt;
  std::uint64_t k = 0;
  const char* first = text.data() + at + 1;
  const char* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(first, last, k);
  if (ec != std::errc{} || p != last) return std::nullopt;
  return std::pair{k, text.substr(0, at)};
}

int do_run(const RunArgs& args, std::istream& in, std::ostream& out, std::ostream& err) {
  std::multimap<std::uint64_t, std::string> events;
  for (const auto& e : args.events) {
    auto parsed = parse_event_option(e);
    if (!parsed) {
      err << "error: --event expects <name>@<step-index>, got '" << e << "'\n";
      return kUsage;
    }
    events.emplace(parsed->first, parsed->second);
  }

  VDocument doc = parse_vdoc(read_file(args.file));
  std::optional<std::string> scope;
  if (!args.module.empty()) scope = args.module;
  exec::Session session = exec::open_session(std::move(doc), scope);
  for (const auto& b : args.breaks) {
    if (session.doc().find_task(b) == nullptr) {
      err << "error: --break names unknown task '" << b << "'\n";
      return kUsage;
    }
    session.add_breakpoint(b);
  }

  auto inject = [&] {
    auto [lo, hi] = events.equal_range(session.steps_taken());
    for (auto it = lo; it != hi; ++it) session.raise_event(it->second);
    events.erase(lo, hi);
  };
  auto steppable = [&] {
    return session.status() == exec::Status::ready || session.status() == exec::Status::paused;
  };

  std::optional<std::string> paused_at;
  std::optional<std::string> interrupted_at;
  if (args.step) {
    std::string line;
    while (steppable() && std::getline(in, line)) {
      inject();
      auto result = session.step();
      if (result.status == exec::Status::interrupted) interrupted_at = result.task;
      for (const auto& r : result.records) err << "step " << session.steps_taken() << ": "
                                               << exec::format_record(r) << "\n";
    }
  } else {
    while (steppable()) {
      inject();
      auto result = session.run_step();
      if (result.status == exec::Status::interrupted) interrupted_at = result.task;
      if (result.status == exec::Status::paused) {
        paused_at = result.task;
        break;
      }
    }
  }

  out << session.export_text();
  if (paused_at) out << "paused before " << *paused_at << "\n";
  if (interrupted_at) out << "interrupted before " << *interrupted_at << "\n";
  out << "status=" << exec::to_string(session.status()) << "\n";
  return session.status() == exec::Status::failed ? kFailed : kOk;
}

int do_serve(const ServeArgs& args, std::ostream& err) {
  service::ServiceConfig config;
  config.plans_dir = args.plans_dir;
  if (!args.repo.empty()) config.repo = Repository::load_manifest(args.repo);
  service::Service svc(std::move(config));
  svc.listen(args.host, args.port, [&](int port) {
    err << "listening on " << args.host << ":" << port << "\n";
    err.flush();
  });
  return kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::istream& in, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Petri-net plan validator, compiler and executor", "vflow"};
  app.require_subcommand(1);

  ValidateArgs validate_args;
  auto* validate_cmd = app.add_subcommand("validate", "Check a plan and print diagnostics");
  validate_cmd->add_option("file", validate_args.file, "plan source (.vplan)")->required();
  validate_cmd->add_option("--repo", validate_args.repo, "repository manifest");

  CompileArgs compile_args;
  auto* compile_cmd = app.add_subcommand("compile", "Compile a plan to a vDocument");
  compile_cmd->add_option("file", compile_args.file, "plan source (.vplan)")->required();
  compile_cmd->add_option("--repo", compile_args.repo, "repository manifest")->required();
  compile_cmd->add_option("-o,--output", compile_args.output, "output file (default stdout)");
  compile_cmd->add_option("--schedule", compile_args.schedule, "daily@HH:MM, every@SECONDS or once");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Execute a vDocument against the mock provider");
  run_cmd->add_option("file", run_args.file, "vDocument (.vdoc.json)")->required();
  run_cmd->add_flag("--step", run_args.step, "execute one task per line read from stdin");
  run_cmd->add_option("--module", run_args.module, "run only this plan's tasks and their prerequisites");
  run_cmd->add_option("--break", run_args.breaks, "pause before this task")->take_all();
  run_cmd->add_option("--event", run_args.events, "raise <name> before step <index>")->take_all();

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
  serve_cmd->add_option("--port", serve_args.port, "TCP port (0 picks a free one)");
  serve_cmd->add_option("--host", serve_args.host, "bind address");
  serve_cmd->add_option("--plans-dir", serve_args.plans_dir, "directory of <id>.vplan files");
  serve_cmd->add_option("--repo", serve_args.repo, "repository manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate_cmd) return do_validate(validate_args, out);
    if (*compile_cmd) return do_compile(compile_args, out, err);
    if (*run_cmd) return do_run(run_args, in, out, err);
    if (*serve_cmd) return do_serve(serve_args, err);
  } catch (const IoFailure& e) {
    err << "error: " << e.message << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kUsage;
}

}  // namespace vflow
