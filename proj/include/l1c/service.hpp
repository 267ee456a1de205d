#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "l1c/colorizer.hpp"

namespace httplib {
class Server;
}

namespace l1c {

struct ServiceConfig {
  int max_image_dim = 1024;
  std::chrono::seconds session_ttl{1800};
  int preview_max_side = 128;

  /// Reads MAX_IMAGE_DIM and SESSION_TTL_SECONDS, keeping defaults for unset variables.
  static ServiceConfig from_env();
};

/// Failure with an HTTP status and a JSON body.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, nlohmann::json body)
      : std::runtime_error(body.dump()), status_(status), body_(std::move(body)) {}

  int status() const { return status_; }
  const nlohmann::json& body() const { return body_; }

 private:
  int status_;
  nlohmann::json body_;
};

/// Colorization on a copy downscaled so its longest side is at most
/// `max_side`; the chroma is upsampled back to full size. Images already
/// within the cap are solved directly.
struct PreviewSolve {
  ColorizeResult result;  ///< at the solve resolution
  Plane u, v;             ///< full-resolution chroma
  int solve_width = 0;
  int solve_height = 0;
  int collisions = 0;  ///< scribbles dropped because they shared a downscaled pixel
};

PreviewSolve solve_preview(const Plane& gray, const ScribbleSet& scribbles, const ColorizeParams& params,
                           int max_side);

/// Maps full-resolution scribbles onto a w x h grid by nearest neighbour,
/// keeping the first site that lands on each pixel.
ScribbleSet downscale_scribbles(const ScribbleSet& s, int width, int height, int w, int h, int* collisions);

class SessionStore {
 public:
  explicit SessionStore(ServiceConfig cfg = {});
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Returns the new session id. 400 undecodable, 413 too large.
  std::string create_session(std::span<const std::uint8_t> image_bytes);

  /// Replaces the scribble set and drops any cached or in-flight result.
  /// 404 unknown session, 422 invalid scribbles.
  nlohmann::json put_scribbles(const std::string& id, const nlohmann::json& body);

  /// Synchronous preview, or with `full` an asynchronous full-resolution job
  /// (polled through result()). 404, 409 no scribbles, 500 solver failure.
  /// The HTTP status is written to `http_status`.
  nlohmann::json compute_preview(const std::string& id, const ColorizeParams& params, bool full, int& http_status);

  nlohmann::json result(const std::string& id);

  std::size_t session_count();
  void evict_expired();

 private:
  struct StoredResult {
    std::uint64_t ticket = 0;
    Method method = Method::l1;
    bool full = false;
    Plane u, v;
    double objective_u = 0.0, objective_v = 0.0, wall_time = 0.0;
    int iterations_u = 0, iterations_v = 0;
    int collisions = 0;
    int solve_width = 0, solve_height = 0;
  };

  struct Session {
    Plane gray;
    std::mutex state_mu;
    std::mutex solve_mu;  ///< one solve at a time per session
    std::optional<ScribbleSet> scribbles;
    std::uint64_t next_ticket = 0;
    std::uint64_t latest_ticket = 0;  ///< newest requested solve
    std::uint64_t stale_before = 0;   ///< tickets <= this predate the current scribbles
    std::optional<StoredResult> result;
    std::optional<std::uint64_t> pending_ticket;
    std::string last_error;
    std::chrono::steady_clock::time_point last_access;
  };

  struct Job {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  std::shared_ptr<Session> find(const std::string& id);
  nlohmann::json run_solve(const std::shared_ptr<Session>& s, std::uint64_t ticket, const ScribbleSet& scribbles,
                           const ColorizeParams& params, bool full, int& http_status);
  nlohmann::json describe(const StoredResult& r, const Plane& gray) const;
  std::string new_id();
  void reap_jobs(bool all);

  ServiceConfig cfg_;
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_;
  std::mutex jobs_mu_;
  std::list<Job> jobs_;
};

/// Registers the JSON-over-HTTP endpoints on `server`.
void register_routes(httplib::Server& server, SessionStore& store);

}  // namespace l1c
