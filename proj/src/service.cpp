#include "l1c/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string_view>
#include <unordered_set>

#include <httplib.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "l1c/base64.hpp"
#include "l1c/error.hpp"
#include "l1c/scribble_io.hpp"

namespace l1c {
namespace {

using nlohmann::json;

cv::Mat to_mat(const Plane& p) {
  cv::Mat m(p.height, p.width, CV_64F);
  std::copy(p.samples.begin(), p.samples.end(), m.ptr<double>(0));
  return m;
}

Plane from_mat(const cv::Mat& m) {
  Plane p(m.cols, m.rows);
  cv::Mat c = m.isContinuous() ? m : m.clone();
  std::copy(c.ptr<double>(0), c.ptr<double>(0) + p.size(), p.samples.begin());
  return p;
}

Plane resize_plane(const Plane& p, int w, int h, int interpolation) {
  cv::Mat out;
  cv::resize(to_mat(p), out, cv::Size(w, h), 0.0, 0.0, interpolation);
  return from_mat(out);
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  const long parsed = std::strtol(v, &end, 10);
  if (*end != '\0' || parsed <= 0 || parsed > 1'000'000'000L) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be a positive integer");
  }
  return static_cast<int>(parsed);
}

ServiceError not_found(const std::string& id) {
  return ServiceError(404, json{{"error", "unknown session"}, {"session", id}});
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig cfg;
  cfg.max_image_dim = env_int("MAX_IMAGE_DIM", cfg.max_image_dim);
  cfg.session_ttl = std::chrono::seconds(env_int("SESSION_TTL_SECONDS", static_cast<int>(cfg.session_ttl.count())));
  return cfg;
}

ScribbleSet downscale_scribbles(const ScribbleSet& s, int width, int height, int w, int h, int* collisions) {
  ScribbleSet out;
  out.exact = s.exact;
  std::unordered_set<int> taken;
  int dropped = 0;
  for (const Scribble& site : s.sites) {
    const int x = site.index % width;
    const int y = site.index / width;
    const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / width));
    const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / height));
    const int idx = sy * w + sx;
    if (!taken.insert(idx).second) {
      ++dropped;
      continue;
    }
    out.sites.push_back({idx, site.u, site.v});
  }
  std::sort(out.sites.begin(), out.sites.end(), [](const Scribble& a, const Scribble& b) { return a.index < b.index; });
  if (collisions != nullptr) *collisions = dropped;
  return out;
}

PreviewSolve solve_preview(const Plane& gray, const ScribbleSet& scribbles, const ColorizeParams& params,
                           int max_side) {
  PreviewSolve out;
  const int longest = std::max(gray.width, gray.height);
  if (longest <= max_side) {
    out.result = colorize(gray, scribbles, params);
    out.u = out.result.u;
    out.v = out.result.v;
    out.solve_width = gray.width;
    out.solve_height = gray.height;
    return out;
  }

  const double scale = static_cast<double>(max_side) / longest;
  const int w = std::clamp(static_cast<int>(std::lround(gray.width * scale)), 1, max_side);
  const int h = std::clamp(static_cast<int>(std::lround(gray.height * scale)), 1, max_side);
  const Plane small = resize_plane(gray, w, h, cv::INTER_AREA);
  const ScribbleSet mapped = downscale_scribbles(scribbles, gray.width, gray.height, w, h, &out.collisions);

  out.result = colorize(small, mapped, params);
  out.u = resize_plane(out.result.u, gray.width, gray.height, cv::INTER_LINEAR);
  out.v = resize_plane(out.result.v, gray.width, gray.height, cv::INTER_LINEAR);
  out.solve_width = w;
  out.solve_height = h;
  return out;
}

SessionStore::SessionStore(ServiceConfig cfg) : cfg_(cfg), id_rng_(std::random_device{}()) {}

SessionStore::~SessionStore() { reap_jobs(true); }

std::string SessionStore::new_id() {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
  return buf;
}

std::string SessionStore::create_session(std::span<const std::uint8_t> image_bytes) {
  if (const auto size = peek_image_size(image_bytes);
      size && (size->width > cfg_.max_image_dim || size->height > cfg_.max_image_dim)) {
    throw ServiceError(413, json{{"error", "image too large"},
                                 {"width", size->width},
                                 {"height", size->height},
                                 {"max_dim", cfg_.max_image_dim}});
  }
  RGBImage img;
  try {
    img = decode_image(image_bytes);
  } catch (const Error& e) {
    throw ServiceError(400, json{{"error", "undecodable image"}, {"detail", e.what()}});
  }
  if (img.width > cfg_.max_image_dim || img.height > cfg_.max_image_dim) {
    throw ServiceError(413, json{{"error", "image too large"},
                                 {"width", img.width},
                                 {"height", img.height},
                                 {"max_dim", cfg_.max_image_dim}});
  }
  auto session = std::make_shared<Session>();
  session->gray = rgb_to_yuv(img).y;
  session->last_access = std::chrono::steady_clock::now();

  evict_expired();
  std::lock_guard lock(mu_);
  std::string id = new_id();
  while (sessions_.count(id) != 0) id = new_id();
  sessions_.emplace(id, std::move(session));
  return id;
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) {
  evict_expired();
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found(id);
  std::lock_guard state(it->second->state_mu);
  it->second->last_access = std::chrono::steady_clock::now();
  return it->second;
}

void SessionStore::evict_expired() {
  const auto now = std::chrono::steady_clock::now();
  std::lock_guard lock(mu_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool expired;
    {
      std::lock_guard state(it->second->state_mu);
      expired = now - it->second->last_access > cfg_.session_ttl;
    }
    it = expired ? sessions_.erase(it) : std::next(it);
  }
}

std::size_t SessionStore::session_count() {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

json SessionStore::put_scribbles(const std::string& id, const json& body) {
  auto s = find(id);
  ScribbleSet scribbles;
  try {
    scribbles = scribbles_from_json(body, s->gray.width, s->gray.height);
  } catch (const Error& e) {
    throw ServiceError(422, json{{"error", std::string(to_string(e.code()))}, {"detail", e.what()}});
  }
  std::lock_guard state(s->state_mu);
  const std::size_t count = scribbles.sites.size();
  s->scribbles = std::move(scribbles);
  s->stale_before = s->next_ticket;
  s->result.reset();
  s->pending_ticket.reset();
  s->last_error.clear();
  return json{{"status", "accepted"}, {"sites", count}};
}

json SessionStore::describe(const StoredResult& r, const Plane& gray) const {
  const std::vector<std::uint8_t> png = encode_png(compose(gray, r.u, r.v));
  return json{{"status", "done"},
              {"method", std::string(to_string(r.method))},
              {"full", r.full},
              {"png_base64", base64_encode(png)},
              {"metrics",
               {{"objective_u", r.objective_u},
                {"objective_v", r.objective_v},
                {"iterations_u", r.iterations_u},
                {"iterations_v", r.iterations_v},
                {"seconds", r.wall_time},
                {"width", gray.width},
                {"height", gray.height},
                {"solve_width", r.solve_width},
                {"solve_height", r.solve_height},
                {"collisions", r.collisions}}}};
}

json SessionStore::run_solve(const std::shared_ptr<Session>& s, std::uint64_t ticket, const ScribbleSet& scribbles,
                             const ColorizeParams& params, bool full, int& http_status) {
  std::lock_guard solve(s->solve_mu);
  {
    std::lock_guard state(s->state_mu);
    if (ticket != s->latest_ticket || ticket <= s->stale_before) {
      http_status = 200;
      return json{{"status", "superseded"}, {"ticket", ticket}};
    }
  }

  StoredResult r;
  try {
    const int max_side = full ? std::max(s->gray.width, s->gray.height) : cfg_.preview_max_side;
    PreviewSolve p = solve_preview(s->gray, scribbles, params, max_side);
    r.u = std::move(p.u);
    r.v = std::move(p.v);
    r.objective_u = p.result.objective_u;
    r.objective_v = p.result.objective_v;
    r.wall_time = p.result.wall_time;
    r.iterations_u = p.result.iterations_u;
    r.iterations_v = p.result.iterations_v;
    r.collisions = p.collisions;
    r.solve_width = p.solve_width;
    r.solve_height = p.solve_height;
  } catch (const Error& e) {
    std::lock_guard state(s->state_mu);
    if (ticket > s->stale_before) s->last_error = e.what();
    http_status = 500;
    return json{{"status", "failed"}, {"solver_status", std::string(to_string(e.code()))}, {"detail", e.what()}};
  }
  r.ticket = ticket;
  r.method = params.method;
  r.full = full;

  std::lock_guard state(s->state_mu);
  if (ticket <= s->stale_before || (s->result && s->result->ticket > ticket)) {
    http_status = 200;
    return json{{"status", "superseded"}, {"ticket", ticket}};
  }
  json body = describe(r, s->gray);
  body["ticket"] = ticket;
  s->result = std::move(r);
  s->last_error.clear();
  http_status = 200;
  return body;
}

json SessionStore::compute_preview(const std::string& id, const ColorizeParams& params, bool full, int& http_status) {
  auto s = find(id);
  ScribbleSet scribbles;
  std::uint64_t ticket;
  {
    std::lock_guard state(s->state_mu);
    if (!s->scribbles) throw ServiceError(409, json{{"error", "no scribbles"}});
    scribbles = *s->scribbles;
    ticket = ++s->next_ticket;
    s->latest_ticket = ticket;
    if (full) s->pending_ticket = ticket;
  }

  if (!full) return run_solve(s, ticket, scribbles, params, false, http_status);

  reap_jobs(false);
  auto done = std::make_shared<std::atomic<bool>>(false);
  std::thread worker([this, s, ticket, scribbles = std::move(scribbles), params, done] {
    int status = 0;
    run_solve(s, ticket, scribbles, params, true, status);
    {
      std::lock_guard state(s->state_mu);
      if (s->pending_ticket == ticket) s->pending_ticket.reset();
    }
    done->store(true);
  });
  {
    std::lock_guard lock(jobs_mu_);
    jobs_.push_back({std::move(worker), std::move(done)});
  }
  http_status = 202;
  return json{{"status", "pending"}, {"ticket", ticket}};
}

json SessionStore::result(const std::string& id) {
  auto s = find(id);
  std::lock_guard state(s->state_mu);
  if (s->pending_ticket && (!s->result || s->result->ticket < *s->pending_ticket)) {
    json body{{"status", "pending"}, {"ticket", *s->pending_ticket}};
    if (s->result) body["previous"] = describe(*s->result, s->gray);
    return body;
  }
  if (s->result) {
    json body = describe(*s->result, s->gray);
    body["ticket"] = s->result->ticket;
    return body;
  }
  if (!s->last_error.empty()) return json{{"status", "failed"}, {"detail", s->last_error}};
  return json{{"status", "none"}};
}

void SessionStore::reap_jobs(bool all) {
  std::list<Job> finished;
  {
    std::lock_guard lock(jobs_mu_);
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      if (all || it->done->load()) {
        auto next = std::next(it);
        finished.splice(finished.end(), jobs_, it);
        it = next;
      } else {
        ++it;
      }
    }
  }
  for (Job& job : finished) job.thread.join();
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    reply(res, e.status(), e.body());
  } catch (const json::exception& e) {
    reply(res, 400, json{{"error", "malformed JSON"}, {"detail", e.what()}});
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::InvalidArgument ? 400 : 500;
    reply(res, status, json{{"error", std::string(to_string(e.code()))}, {"detail", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, json{{"error", "internal"}, {"detail", e.what()}});
  }
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v.empty()) return true;
  if (v == "false" || v == "0") return false;
  throw ServiceError(400, json{{"error", "bad boolean"}, {"value", v}});
}

ColorizeParams params_from_query(const httplib::Request& req) {
  ColorizeParams params;
  try {
    if (req.has_param("method")) params.method = parse_method(req.get_param_value("method"));
    if (req.has_param("lambda")) params.lambda = std::stod(req.get_param_value("lambda"));
  } catch (const std::exception& e) {
    throw ServiceError(400, json{{"error", "bad query parameter"}, {"detail", e.what()}});
  }
  if (!(params.lambda > 0.0) || !std::isfinite(params.lambda)) {
    throw ServiceError(400, json{{"error", "lambda must be positive"}});
  }
  return params;
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, json{{"ok", true}}); });

  server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::vector<std::uint8_t> bytes;
      if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
        const json body = json::parse(req.body);
        try {
          bytes = base64_decode(body.at("image_base64").get<std::string>());
        } catch (const Error& e) {
          throw ServiceError(400, json{{"error", "undecodable image"}, {"detail", e.what()}});
        }
      } else {
        bytes.assign(req.body.begin(), req.body.end());
      }
      const std::string id = store.create_session(bytes);
      reply(res, 201, json{{"session_id", id}});
    });
  });

  server.Put(R"(/sessions/([0-9a-f]+)/scribbles)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        store.result(id);  // unknown sessions still report 404
        throw ServiceError(422, json{{"error", "InvalidScribbles"}, {"detail", e.what()}});
      }
      reply(res, 202, store.put_scribbles(id, body));
    });
  });

  server.Post(R"(/sessions/([0-9a-f]+)/preview)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const ColorizeParams params = params_from_query(req);
      const bool full = req.has_param("full") && parse_bool(req.get_param_value("full"));
      int status = 200;
      const json body = store.compute_preview(id, params, full, status);
      reply(res, status, body);
    });
  });

  server.Get(R"(/sessions/([0-9a-f]+)/result)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, store.result(req.matches[1])); });
  });

  server.set_payload_max_length(64u << 20);
}

}  // namespace l1c
