#include "refcut/service.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <random>

#include "refcut/error.hpp"

namespace refcut {

struct SessionManager::Session {
  std::string id;
  std::mutex mutex;
  std::condition_variable idle_cv;

  std::shared_ptr<const ScalarGrid> grid;
  ConfigDocument config;
  std::optional<Vec3> primary;
  std::vector<RefinementSeed> refinements;
  std::uint64_t next_seed = 1;
  std::uint64_t revision = 0;

  bool queued = false;
  bool running = false;
  bool removed = false;
  std::uint64_t recomputes = 0;
  PublishedResult published;
  std::chrono::steady_clock::time_point last_access = std::chrono::steady_clock::now();

  SessionInputs snapshot() const { return {grid, config, primary, refinements, revision}; }
};

SegmentationRequest SessionInputs::request() const {
  if (!primary) throw ValidationError("session has no primary seed");
  if (!config.shape) throw ValidationError("session has no template");
  SegmentationRequest req;
  req.grid = grid;
  req.shape = *config.shape;
  req.primary_seed = *primary;
  req.refinements = refinements;
  req.config = config.config;
  return req;
}

namespace {

std::string new_token() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

// margin = 0.5 voxel for "inside the image"; one full extent per side for the generous box.
bool within(const GridGeometry& g, const Vec3& p, bool generous) {
  for (int a = 0; a < g.ndim; ++a) {
    const double extent = static_cast<double>(g.dims[a]) * g.spacing[a];
    const double margin = generous ? extent : 0.5 * g.spacing[a];
    const double lo = g.origin[a] - margin;
    const double hi = g.origin[a] + static_cast<double>(g.dims[a] - 1) * g.spacing[a] + margin;
    if (!(p[a] >= lo && p[a] <= hi)) return false;
  }
  return true;
}

void check_template(const ConfigDocument& cfg, const GridGeometry& g) {
  if (cfg.shape && cfg.shape->ndim() != g.ndim) {
    throw ValidationError("template '" + std::string(to_string(cfg.shape->kind())) + "' does not match a " +
                          std::to_string(g.ndim) + "D image");
  }
}

}  // namespace

SessionManager::SessionManager(SessionOptions options) : options_(options) {
  unsigned n = options_.workers;
  if (n == 0) n = std::max(1U, std::thread::hardware_concurrency());
  for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
  janitor_ = std::thread([this] { janitor_loop(); });
}

SessionManager::~SessionManager() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  janitor_cv_.notify_all();
  for (auto& t : workers_) t.join();
  janitor_.join();
}

std::string SessionManager::create(std::shared_ptr<const ScalarGrid> grid, ConfigDocument config) {
  if (!grid) throw ValidationError("session needs an image");
  config.config.validate();
  check_template(config, grid->geometry());
  if (!config.shape) config.shape = default_template(grid->geometry());
  auto s = std::make_shared<Session>();
  s->grid = std::move(grid);
  s->config = std::move(config);
  std::lock_guard lock(sessions_mutex_);
  do {
    s->id = new_token();
  } while (sessions_.count(s->id) != 0);
  sessions_.emplace(s->id, s);
  return s->id;
}

bool SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    s = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(s->mutex);
  s->removed = true;
  s->idle_cv.notify_all();
  return true;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

MutationOutcome SessionManager::commit(Session& s, std::optional<std::uint64_t> client_revision, std::string seed_id) {
  MutationOutcome out;
  out.stale_client = client_revision && *client_revision < s.revision;
  out.revision = ++s.revision;
  out.seed_id = std::move(seed_id);
  s.last_access = std::chrono::steady_clock::now();
  return out;
}

void SessionManager::schedule(const std::shared_ptr<Session>& s) {
  // Caller holds s->mutex.
  if (s->running || s->queued || s->removed || !s->primary) return;
  s->queued = true;
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(s);
  }
  queue_cv_.notify_one();
}

MutationOutcome SessionManager::set_primary(const std::string& id, const Vec3& position,
                                            std::optional<std::uint64_t> client_revision) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  if (!within(s->grid->geometry(), position, false)) throw ValidationError("primary seed lies outside the image");
  s->primary = position;
  auto out = commit(*s, client_revision, kPrimarySeedId);
  schedule(s);
  return out;
}

MutationOutcome SessionManager::add_refinement(const std::string& id, const Vec3& position,
                                               std::optional<std::uint64_t> client_revision) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  if (!within(s->grid->geometry(), position, true)) throw ValidationError("refinement seed lies far outside the image");
  RefinementSeed seed;
  seed.id = "r" + std::to_string(s->next_seed++);
  seed.position = position;
  s->refinements.push_back(seed);
  auto out = commit(*s, client_revision, seed.id);
  schedule(s);
  return out;
}

MutationOutcome SessionManager::move_seed(const std::string& id, const std::string& seed_id, const Vec3& position,
                                          std::optional<std::uint64_t> client_revision) {
  if (seed_id == kPrimarySeedId) return set_primary(id, position, client_revision);
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  const auto it = std::find_if(s->refinements.begin(), s->refinements.end(),
                               [&](const RefinementSeed& r) { return r.id == seed_id; });
  if (it == s->refinements.end()) throw NotFoundError("unknown seed '" + seed_id + "'");
  if (!within(s->grid->geometry(), position, true)) throw ValidationError("refinement seed lies far outside the image");
  it->position = position;
  auto out = commit(*s, client_revision, seed_id);
  schedule(s);
  return out;
}

MutationOutcome SessionManager::delete_seed(const std::string& id, const std::string& seed_id,
                                            std::optional<std::uint64_t> client_revision) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  if (seed_id == kPrimarySeedId) {
    if (!s->primary) throw NotFoundError("session has no primary seed");
    s->primary.reset();
  } else {
    const auto it = std::find_if(s->refinements.begin(), s->refinements.end(),
                                 [&](const RefinementSeed& r) { return r.id == seed_id; });
    if (it == s->refinements.end()) throw NotFoundError("unknown seed '" + seed_id + "'");
    s->refinements.erase(it);
  }
  auto out = commit(*s, client_revision, seed_id);
  schedule(s);
  return out;
}

MutationOutcome SessionManager::patch_config(const std::string& id, const Json& patch,
                                             std::optional<std::uint64_t> client_revision) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  auto merged = apply_config(patch, s->config);
  check_template(merged, s->grid->geometry());
  s->config = std::move(merged);
  auto out = commit(*s, client_revision, "");
  schedule(s);
  return out;
}

PublishedResult SessionManager::result(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = std::chrono::steady_clock::now();
  auto out = s->published;
  out.current_revision = s->revision;
  const auto newest = std::max(out.revision, out.error ? out.error_revision : 0);
  out.stale = newest < s->revision;
  return out;
}

SessionInputs SessionManager::inputs(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->snapshot();
}

std::shared_ptr<const ScalarGrid> SessionManager::grid(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = std::chrono::steady_clock::now();
  return s->grid;
}

std::uint64_t SessionManager::recompute_count(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->recomputes;
}

Json SessionManager::state(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = std::chrono::steady_clock::now();
  const auto& g = s->grid->geometry();
  const int nd = g.ndim;
  Json refinements = Json::array();
  for (const auto& r : s->refinements) refinements.push_back({{"id", r.id}, {"position", to_json(r.position, nd)}});
  Json dims = Json::array();
  Json spacing = Json::array();
  Json origin = Json::array();
  for (int a = 0; a < nd; ++a) {
    dims.push_back(g.dims[a]);
    spacing.push_back(g.spacing[a]);
    origin.push_back(g.origin[a]);
  }
  return {{"id", s->id},
          {"revision", s->revision},
          {"ndim", nd},
          {"dims", dims},
          {"spacing", spacing},
          {"origin", origin},
          {"config", to_json(s->config.config, s->config.shape)},
          {"seeds", {{"primary", s->primary ? to_json(*s->primary, nd) : Json(nullptr)}, {"refinements", refinements}}},
          {"result_revision", s->published.revision},
          {"computing", s->running || s->queued},
          {"recomputes", s->recomputes}};
}

bool SessionManager::wait_idle(const std::string& id, std::chrono::milliseconds timeout) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  return s->idle_cv.wait_for(lock, timeout, [&] { return s->removed || (!s->running && !s->queued); });
}

std::size_t SessionManager::expire_idle(std::chrono::steady_clock::time_point now) {
  std::vector<std::string> expired;
  {
    std::lock_guard lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) {
      std::lock_guard session_lock(s->mutex);
      if (now - s->last_access >= options_.idle_timeout && !s->running) expired.push_back(id);
    }
  }
  std::size_t n = 0;
  for (const auto& id : expired) n += remove(id) ? 1 : 0;
  return n;
}

std::size_t SessionManager::size() {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

void SessionManager::worker_loop() {
  while (true) {
    std::shared_ptr<Session> s;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      s = std::move(queue_.front());
      queue_.pop_front();
    }

    SessionInputs in;
    {
      std::lock_guard lock(s->mutex);
      s->queued = false;
      if (s->removed || !s->primary) {
        s->idle_cv.notify_all();
        continue;
      }
      s->running = true;
      in = s->snapshot();
    }

    std::shared_ptr<const SegmentationResult> result;
    std::optional<std::string> error;
    std::vector<std::string> error_ids;
    try {
      result = std::make_shared<const SegmentationResult>(segment(in.request()));
    } catch (const InfeasibleRefinementError& e) {
      error = e.what();
      error_ids = e.seed_ids();
    } catch (const std::exception& e) {
      error = e.what();
    }

    std::lock_guard lock(s->mutex);
    s->running = false;
    ++s->recomputes;
    auto& pub = s->published;
    if (result) {
      pub.revision = in.revision;
      pub.result = std::move(result);
      pub.error.reset();
      pub.error_seed_ids.clear();
      pub.error_revision = 0;
    } else {
      pub.error = std::move(error);
      pub.error_revision = in.revision;
      pub.error_seed_ids = std::move(error_ids);
    }
    if (s->revision > in.revision) schedule(s);
    s->idle_cv.notify_all();
  }
}

void SessionManager::janitor_loop() {
  const auto period = std::clamp<std::chrono::steady_clock::duration>(options_.idle_timeout / 4, std::chrono::seconds(1),
                                                                      std::chrono::seconds(60));
  std::unique_lock lock(queue_mutex_);
  while (!stopping_) {
    janitor_cv_.wait_for(lock, period, [&] { return stopping_; });
    if (stopping_) return;
    lock.unlock();
    expire_idle(std::chrono::steady_clock::now());
    lock.lock();
  }
}

}  // namespace refcut
