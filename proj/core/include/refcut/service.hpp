#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "refcut/documents.hpp"
#include "refcut/segmenter.hpp"

namespace refcut {

/// Unknown session or seed id. HTTP maps it to 404.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kPrimarySeedId = "primary";

struct SessionOptions {
  std::chrono::seconds idle_timeout{30 * 60};
  /// Recompute workers shared by all sessions; 0 picks the hardware thread count.
  unsigned workers = 0;
};

/// Input to one recompute, captured under the session lock.
struct SessionInputs {
  std::shared_ptr<const ScalarGrid> grid;
  ConfigDocument config;
  std::optional<Vec3> primary;
  std::vector<RefinementSeed> refinements;
  std::uint64_t revision = 0;

  /// The request segment() receives for these inputs; requires a primary seed.
  SegmentationRequest request() const;
};

struct PublishedResult {
  /// Revision the result (or error) was computed at; 0 before the first one.
  std::uint64_t revision = 0;
  std::uint64_t current_revision = 0;
  /// True while the newest mutation has not been computed yet.
  bool stale = false;
  std::shared_ptr<const SegmentationResult> result;
  /// Failure of the newest computed revision (for example conflicting refinements).
  std::optional<std::string> error;
  std::uint64_t error_revision = 0;
  std::vector<std::string> error_seed_ids;
};

struct MutationOutcome {
  std::uint64_t revision = 0;
  std::string seed_id;
  /// The client's revision was behind; the mutation is still applied.
  bool stale_client = false;
};

/// Memory-resident interactive sessions. Mutations bump the session revision by
/// one and schedule a recompute; recomputes are latest-wins: at most one runs per
/// session, and mutations arriving meanwhile collapse into one follow-up run.
class SessionManager {
 public:
  explicit SessionManager(SessionOptions options = {});
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// A missing template defaults to a circle/sphere spanning half the smallest extent.
  std::string create(std::shared_ptr<const ScalarGrid> grid, ConfigDocument config);
  bool remove(const std::string& id);

  MutationOutcome set_primary(const std::string& id, const Vec3& position, std::optional<std::uint64_t> client_revision = {});
  MutationOutcome add_refinement(const std::string& id, const Vec3& position, std::optional<std::uint64_t> client_revision = {});
  /// `seed_id` may be kPrimarySeedId.
  MutationOutcome move_seed(const std::string& id, const std::string& seed_id, const Vec3& position,
                            std::optional<std::uint64_t> client_revision = {});
  MutationOutcome delete_seed(const std::string& id, const std::string& seed_id,
                              std::optional<std::uint64_t> client_revision = {});
  MutationOutcome patch_config(const std::string& id, const Json& patch, std::optional<std::uint64_t> client_revision = {});

  PublishedResult result(const std::string& id);
  SessionInputs inputs(const std::string& id);
  Json state(const std::string& id);
  std::shared_ptr<const ScalarGrid> grid(const std::string& id);
  std::uint64_t recompute_count(const std::string& id);

  /// Blocks until no recompute is running or queued for the session.
  bool wait_idle(const std::string& id, std::chrono::milliseconds timeout);

  /// Drops sessions not touched since `now - idle_timeout`; returns how many.
  std::size_t expire_idle(std::chrono::steady_clock::time_point now);
  std::size_t size();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id);
  /// Caller holds the session lock.
  static MutationOutcome commit(Session& s, std::optional<std::uint64_t> client_revision, std::string seed_id);
  void schedule(const std::shared_ptr<Session>& s);
  void worker_loop();
  void janitor_loop();

  SessionOptions options_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable janitor_cv_;
  std::deque<std::shared_ptr<Session>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::thread janitor_;
};

/// HTTP/JSON front end over a SessionManager.
class SessionServer {
 public:
  explicit SessionServer(SessionManager& sessions);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port. Throws IoError if binding fails.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace refcut
