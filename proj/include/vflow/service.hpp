#pragma once

// HTTP backend shared by the graphical and textual editors.
//
// Plans are revisioned text documents. Writes use optimistic concurrency: a
// PUT names the revision it was based on and is rejected with 409 when that
// revision is no longer current. Every accepted write produces one
// ChangeNotice, which long-polling clients receive through
// GET /plans/{id}/changes?since=R.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vflow/diagnostic.hpp"
#include "vflow/executor.hpp"
#include "vflow/repository.hpp"
#include "vflow/text.hpp"

namespace httplib {
class Server;
}

namespace vflow::service {

enum class Origin { text, graphic, system };

std::string_view to_string(Origin origin);
std::optional<Origin> parse_origin(std::string_view text);

struct PlanRecord {
  std::string id;
  text::SourceDocument document;
  exec::Timestamp updated_at;
};

struct ChangeNotice {
  std::string plan_id;
  std::uint64_t revision = 0;
  Origin origin = Origin::text;

  bool operator==(const ChangeNotice&) const = default;
};

struct PutResult {
  enum class Kind { accepted, conflict, invalid };

  Kind kind = Kind::accepted;
  std::uint64_t revision = 0;  // new revision, or the current one on conflict
  std::vector<Diagnostic> diagnostics;
};

/// Plan ids are used as file names: letters, digits, '_' and '-'.
bool valid_plan_id(std::string_view id);

class PlanStore {
 public:
  /// Loads every `<id>.vplan` in `dir` at revision 0. An empty path keeps plans in memory only.
  explicit PlanStore(std::filesystem::path dir = {});

  std::optional<PlanRecord> get(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// A plan that does not exist yet is created from base revision 0.
  /// Throws Error(IoError) when the file cannot be written; state is unchanged then.
  PutResult put(const std::string& id, const std::string& text, std::uint64_t base_revision,
                Origin origin);

  /// Notices with revision > since, waiting up to `timeout` for the first one.
  std::vector<ChangeNotice> changes(const std::string& id, std::uint64_t since,
                                    std::chrono::milliseconds timeout) const;

  /// Releases every waiting changes() call.
  void shutdown();

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, PlanRecord> plans_;
  std::map<std::string, std::vector<ChangeNotice>> notices_;
  bool stopping_ = false;
};

struct ServiceConfig {
  std::filesystem::path plans_dir;
  std::optional<Repository> repo;
  std::chrono::milliseconds poll_timeout{30000};
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers every route on `server`.
  void mount(httplib::Server& server);

  /// Binds to `host:port` (0 picks a free port) and serves until stop().
  /// Returns the bound port through `on_bound` before blocking.
  void listen(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();

  PlanStore& plans() { return plans_; }
  const Repository& repository() const;

 private:
  struct SessionSlot {
    std::mutex mutex;
    std::unique_ptr<exec::Session> session;
  };

  std::shared_ptr<SessionSlot> find_session(const std::string& id);
  std::string add_session(exec::Session session);

  ServiceConfig config_;
  Repository empty_repo_;
  PlanStore plans_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::unique_ptr<httplib::Server> server_;
};

/// Blocking entry point used by `vflow serve`.
int serve(ServiceConfig config, const std::string& host, int port);

}  // namespace vflow::service
