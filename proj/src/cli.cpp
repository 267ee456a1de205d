#include "l1c/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "l1c/colorizer.hpp"
#include "l1c/colorspace.hpp"
#include "l1c/scribble_io.hpp"
#include "l1c/service.hpp"
#include "l1c/sparsity_stats.hpp"

namespace l1c {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SharedOptions {
  std::string method = "l1";
  double lambda = 100.0;
  int window_radius = 1;
  std::string weights = "correlation";
  std::optional<bool> exact;
  std::uint64_t seed = 0;
  double tol = kDefaultLpTol;
  int max_iter = kDefaultLpMaxIter;
  std::string out_dir = ".";

  ColorizeParams params() const {
    ColorizeParams p;
    p.method = parse_method(method);
    p.lambda = lambda;
    p.filter.window_radius = window_radius;
    p.filter.weight_kind = weights == "gaussian" ? WeightKind::gaussian : WeightKind::correlation;
    p.tol = tol;
    p.max_iter = max_iter;
    return p;
  }

  json echo(bool exact_mode) const {
    return json{{"method", method},   {"lambda", lambda}, {"window_radius", window_radius},
                {"weights", weights}, {"exact", exact_mode}, {"seed", seed},
                {"tol", tol},         {"max_iter", max_iter}};
  }
};

void add_filter_options(CLI::App* cmd, SharedOptions& o) {
  cmd->add_option("--window-radius", o.window_radius, "Neighbourhood radius in pixels")
      ->check(CLI::Range(1, 16))
      ->capture_default_str();
  cmd->add_option("--weights", o.weights, "Affinity weights")
      ->check(CLI::IsMember({"gaussian", "correlation"}))
      ->capture_default_str();
  cmd->add_option("--out-dir", o.out_dir, "Directory for outputs")->capture_default_str();
}

void add_solver_options(CLI::App* cmd, SharedOptions& o) {
  add_filter_options(cmd, o);
  cmd->add_option("--method", o.method, "Solver")->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
  cmd->add_option("--lambda", o.lambda, "Scribble penalty weight")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--tol", o.tol, "LP tolerance")->check(CLI::Range(1e-14, 1e-2))->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "LP iteration limit")->check(CLI::Range(1, 10000))->capture_default_str();
  auto* exact = cmd->add_flag_callback("--exact", [&o] { o.exact = true; }, "Scribbles as hard constraints");
  auto* penalty = cmd->add_flag_callback("--penalty", [&o] { o.exact = false; }, "Scribbles as a lambda penalty");
  exact->excludes(penalty);
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::IOFailure, "cannot open for writing: " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IOFailure, "write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IOFailure, "cannot create directory " + dir.string() + ": " + ec.message());
}

/// Writes the image and checks that it reads back with the same size.
void save_checked(const RGBImage& img, const fs::path& path) {
  save_image(img, path);
  const RGBImage back = load_image(path);
  validate(back);
  if (back.width != img.width || back.height != img.height) {
    std::error_code ec;
    fs::remove(path, ec);
    throw Error(ErrorCode::IOFailure, "reloaded image has the wrong size: " + path.string());
  }
}

RGBImage gray_image(const Plane& y) {
  const Plane zero(y.width, y.height, 0.0);
  return compose(y, zero, zero);
}

RGBImage side_by_side(const std::vector<const RGBImage*>& panels) {
  int width = 0;
  const int height = panels.front()->height;
  for (const auto* p : panels) width += p->width;
  RGBImage out(width, height);
  int x0 = 0;
  for (const auto* p : panels) {
    for (int y = 0; y < p->height; ++y) {
      for (int x = 0; x < p->width; ++x) {
        const std::size_t src = p->r.index(x, y);
        const std::size_t dst = out.r.index(x0 + x, y);
        out.r[dst] = p->r[src];
        out.g[dst] = p->g[src];
        out.b[dst] = p->b[src];
      }
    }
    x0 += p->width;
  }
  return out;
}

json metrics_json(const ColorizeResult& r) {
  return json{{"j1_u", r.objective_u},
              {"j1_v", r.objective_v},
              {"j1", r.objective_u + r.objective_v},
              {"iterations_u", r.iterations_u},
              {"iterations_v", r.iterations_v},
              {"unanchored_components", r.unanchored_components}};
}

int cmd_colorize(const SharedOptions& o, const std::string& gray_path, const std::string& scribble_path,
                 std::string output, std::ostream& out) {
  const auto t0 = Clock::now();
  const RGBImage input = load_image(gray_path);
  const Plane y = rgb_to_yuv(input).y;
  ScribbleSet scribbles = load_scribbles(scribble_path, y.width, y.height);
  if (o.exact) scribbles.exact = *o.exact;
  const double t_load = seconds_since(t0);

  const ColorizeParams params = o.params();
  const ColorizeResult result = colorize(y, scribbles, params);

  fs::path out_path = output.empty() ? fs::path(o.out_dir) / (fs::path(gray_path).stem().string() + "_" + o.method + ".png")
                                     : fs::path(output);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());

  const auto t1 = Clock::now();
  save_checked(compose(y, result.u, result.v), out_path);
  const double t_write = seconds_since(t1);

  fs::path manifest_path = out_path;
  manifest_path.replace_extension(".json");
  json manifest{{"command", "colorize"},
                {"inputs", {{"gray", gray_path}, {"scribbles", scribble_path}}},
                {"output", out_path.string()},
                {"params", o.echo(scribbles.exact)},
                {"width", y.width},
                {"height", y.height},
                {"scribbles", scribbles.sites.size()},
                {"metrics", metrics_json(result)},
                {"timings", {{"load", t_load}, {"solve", result.wall_time}, {"write", t_write}}}};
  try {
    write_json(manifest, manifest_path);
  } catch (...) {
    std::error_code ec;
    fs::remove(out_path, ec);
    throw;
  }

  out << out_path.string() << " method=" << o.method << " j1=" << format_csv_number(result.objective_u + result.objective_v)
      << " seconds=" << format_csv_number(result.wall_time) << '\n';
  return kExitOk;
}

struct CompareOptions {
  std::optional<int> count;
  std::optional<double> fraction;
  std::string pattern = "uniform-random";
  std::string csv;
};

int cmd_compare(SharedOptions o, const std::string& color_path, const CompareOptions& c, std::ostream& out) {
  const auto t0 = Clock::now();
  const RGBImage original = load_image(color_path);
  const YUVImage yuv = rgb_to_yuv(original);
  const double t_load = seconds_since(t0);
  const int n = yuv.width * yuv.height;

  int count = 0;
  if (c.count) {
    count = *c.count;
  } else if (c.fraction) {
    count = static_cast<int>(std::lround(*c.fraction * n));
  } else {
    throw Error(ErrorCode::InvalidArgument, "compare needs --count or --fraction");
  }
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "scribble count must be at least 1");

  ScribbleSet scribbles = sample_scribbles(yuv, count, o.seed, parse_pattern(c.pattern));
  if (o.exact) scribbles.exact = *o.exact;

  ColorizeParams params = o.params();
  params.method = Method::l1;
  const ColorizeResult l1 = colorize(yuv.y, scribbles, params);
  params.method = Method::l2;
  const ColorizeResult l2 = colorize(yuv.y, scribbles, params);
  const Metrics m1 = evaluate(l1, yuv);
  const Metrics m2 = evaluate(l2, yuv);

  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  const RGBImage gray = gray_image(yuv.y);
  RGBImage marked = gray;
  for (const Scribble& s : scribbles.sites) {
    marked.r[s.index] = original.r[s.index];
    marked.g[s.index] = original.g[s.index];
    marked.b[s.index] = original.b[s.index];
  }
  const RGBImage img_l1 = compose(yuv.y, l1.u, l1.v);
  const RGBImage img_l2 = compose(yuv.y, l2.u, l2.v);
  save_checked(gray, dir / "gray.png");
  save_checked(marked, dir / "marked.png");
  save_checked(img_l1, dir / "l1.png");
  save_checked(img_l2, dir / "l2.png");
  save_checked(side_by_side({&original, &marked, &img_l1, &img_l2}), dir / "side_by_side.png");

  const double j1_l1 = l1.objective_u + l1.objective_v;
  const double j1_l2 = l2.objective_u + l2.objective_v;
  std::string row = std::to_string(count) + "," + std::to_string(o.seed);
  for (double v : {m1.mae_u, m2.mae_u, m1.mae_v, m2.mae_v, m1.psnr, m2.psnr, j1_l1, j1_l2, l1.wall_time, l2.wall_time}) {
    row += "," + format_csv_number(v);
  }

  const fs::path csv_path = c.csv.empty() ? dir / "metrics.csv" : fs::path(c.csv);
  const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
  {
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw Error(ErrorCode::IOFailure, "cannot open " + csv_path.string());
    if (fresh) csv << kCompareCsvHeader << '\n';
    csv << row << '\n';
    if (!csv) throw Error(ErrorCode::IOFailure, "write failed: " + csv_path.string());
  }

  o.method = "l1+l2";
  json manifest{{"command", "compare"},
                {"inputs", {{"color", color_path}}},
                {"params", o.echo(scribbles.exact)},
                {"count", count},
                {"pattern", c.pattern},
                {"width", yuv.width},
                {"height", yuv.height},
                {"metrics",
                 {{"l1", metrics_json(l1)},
                  {"l2", metrics_json(l2)},
                  {"mae_u_l1", m1.mae_u},
                  {"mae_u_l2", m2.mae_u},
                  {"mae_v_l1", m1.mae_v},
                  {"mae_v_l2", m2.mae_v},
                  {"psnr_l1", format_csv_number(m1.psnr)},
                  {"psnr_l2", format_csv_number(m2.psnr)}}},
                {"csv", csv_path.string()},
                {"timings", {{"load", t_load}, {"l1", l1.wall_time}, {"l2", l2.wall_time}}}};
  write_json(manifest, dir / "manifest.json");

  out << kCompareCsvHeader << '\n' << row << '\n';
  return kExitOk;
}

struct FitOptions {
  std::vector<std::string> images;
  int bins = 101;
  bool separate = false;
};

std::string describe_fit(const GGDFit& f) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "alpha=%.6f scale=%.6g loglik=%.6f n=%zu alpha_le_1=%s", f.alpha, f.scale,
                f.log_likelihood, f.n_samples, f.alpha <= 1.0 ? "yes" : "no");
  return buf;
}

int cmd_fit(const SharedOptions& o, const FitOptions& f, std::ostream& out, std::ostream& err) {
  FilterConfig cfg;
  cfg.window_radius = o.window_radius;
  cfg.weight_kind = o.weights == "gaussian" ? WeightKind::gaussian : WeightKind::correlation;
  const fs::path dir(o.out_dir);
  ensure_dir(dir);

  int status = kExitOk;
  std::vector<double> pooled;
  for (const std::string& path : f.images) {
    const YUVImage yuv = rgb_to_yuv(load_image(path));
    try {
      const ChannelResponses resp = collect_channel_responses(yuv, cfg);
      std::vector<double> both = resp.u;
      both.insert(both.end(), resp.v.begin(), resp.v.end());
      const GGDFit fit = fit_ggd(both);
      out << path << " uv " << describe_fit(fit) << '\n';
      if (f.separate) {
        out << path << " u " << describe_fit(fit_ggd(resp.u)) << '\n';
        out << path << " v " << describe_fit(fit_ggd(resp.v)) << '\n';
      }
      export_log_histogram(make_histogram(both, f.bins), dir / (fs::path(path).stem().string() + "_hist.csv"), fit);
      pooled.insert(pooled.end(), both.begin(), both.end());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IOFailure) throw;
      err << path << ": " << to_string(e.code()) << ": " << e.what() << '\n';
      status = std::max(status, exit_code_for(e.code()));
    }
  }
  if (f.images.size() > 1 && !pooled.empty()) out << "pooled uv " << describe_fit(fit_ggd(pooled)) << '\n';
  return status;
}

struct MarksOptions {
  std::string image;
  std::string output;
  int count = 0;
  std::string pattern = "uniform-random";
};

int cmd_marks(const SharedOptions& o, const MarksOptions& m, std::ostream& out) {
  const YUVImage yuv = rgb_to_yuv(load_image(m.image));
  ScribbleSet s = sample_scribbles(yuv, m.count, o.seed, parse_pattern(m.pattern));
  if (o.exact) s.exact = *o.exact;
  fs::path path = m.output.empty() ? fs::path(o.out_dir) / (fs::path(m.image).stem().string() + "_marks.json")
                                   : fs::path(m.output);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  save_scribbles(s, yuv.width, path);
  out << path.string() << " sites=" << s.sites.size() << '\n';
  return kExitOk;
}

int cmd_serve(const std::string& host, std::optional<int> port_flag, std::ostream& out) {
  const ServiceConfig cfg = ServiceConfig::from_env();
  int port = 8080;
  if (const char* env = std::getenv("PORT"); env != nullptr && *env != '\0') port = std::atoi(env);
  if (port_flag) port = *port_flag;
  if (port <= 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");

  // Termination signals are taken synchronously by a watcher thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionStore store(cfg);
  httplib::Server server;
  register_routes(server, store);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });

  out << "listening on " << host << ":" << port << std::endl;
  const bool ok = server.listen(host, port);
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  if (!ok) throw Error(ErrorCode::IOFailure, "cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::CorruptImage:
    case ErrorCode::IOFailure:
      return kExitIO;
    case ErrorCode::EmptyScribbles:
    case ErrorCode::InvalidScribbles:
    case ErrorCode::CountTooLarge:
    case ErrorCode::InvalidArgument:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::DimensionMismatch:
      return kExitUsage;
    case ErrorCode::DegenerateNeighborhood:
    case ErrorCode::DegenerateImage:
    case ErrorCode::DegenerateSamples:
    case ErrorCode::NonFinite:
    case ErrorCode::NumericalBreakdown:
    case ErrorCode::SolverFailed:
      return kExitSolver;
  }
  return kExitSolver;
}

std::string format_csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scribble-based colorization with L1 and L2 luminance-weighted filters", "l1colorize"};
  app.require_subcommand(1);
  SharedOptions o;

  std::string gray_path, scribble_path, output;
  auto* colorize_cmd = app.add_subcommand("colorize", "Colorize a gray image from a scribble file");
  colorize_cmd->add_option("gray", gray_path, "Gray input image")->required();
  colorize_cmd->add_option("scribbles", scribble_path, "Scribble JSON")->required();
  colorize_cmd->add_option("-o,--output", output, "Output PNG (manifest is written next to it)");
  add_solver_options(colorize_cmd, o);

  std::string color_path;
  CompareOptions compare_opts;
  auto* compare_cmd = app.add_subcommand("compare", "Sample scribbles from a color image and compare L1 with L2");
  compare_cmd->add_option("image", color_path, "Color reference image")->required();
  auto* count_opt = compare_cmd->add_option("--count", compare_opts.count, "Number of scribbled pixels");
  auto* fraction_opt = compare_cmd->add_option("--fraction", compare_opts.fraction, "Fraction of scribbled pixels")
                           ->check(CLI::Range(0.0, 1.0));
  count_opt->excludes(fraction_opt);
  compare_cmd->add_option("--pattern", compare_opts.pattern, "uniform-random or grid")->capture_default_str();
  compare_cmd->add_option("--csv", compare_opts.csv, "Metrics CSV (default <out-dir>/metrics.csv)");
  add_solver_options(compare_cmd, o);

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a generalized Gaussian to chroma filter responses");
  fit_cmd->add_option("images", fit_opts.images, "Color images")->required();
  fit_cmd->add_option("--bins", fit_opts.bins, "Histogram bins")->check(CLI::Range(1, 100000))->capture_default_str();
  fit_cmd->add_flag("--separate", fit_opts.separate, "Also fit U and V separately");
  add_filter_options(fit_cmd, o);

  MarksOptions marks_opts;
  auto* marks_cmd = app.add_subcommand("marks", "Sample scribbles from a color image into a JSON file");
  marks_cmd->add_option("image", marks_opts.image, "Color reference image")->required();
  marks_cmd->add_option("--count", marks_opts.count, "Number of sites")->required();
  marks_cmd->add_option("--pattern", marks_opts.pattern, "uniform-random or grid")->capture_default_str();
  marks_cmd->add_option("-o,--output", marks_opts.output, "Output JSON");
  marks_cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  marks_cmd->add_option("--out-dir", o.out_dir, "Directory for outputs")->capture_default_str();
  auto* mexact = marks_cmd->add_flag_callback("--exact", [&o] { o.exact = true; }, "Mark the set as exact");
  auto* mpenalty = marks_cmd->add_flag_callback("--penalty", [&o] { o.exact = false; }, "Mark the set as penalty");
  mexact->excludes(mpenalty);

  std::string host = "0.0.0.0";
  std::optional<int> port;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP colorization service");
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port (default $PORT or 8080)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*colorize_cmd) return cmd_colorize(o, gray_path, scribble_path, output, out);
    if (*compare_cmd) return cmd_compare(o, color_path, compare_opts, out);
    if (*fit_cmd) return cmd_fit(o, fit_opts, out, err);
    if (*marks_cmd) return cmd_marks(o, marks_opts, out);
    if (*serve_cmd) return cmd_serve(host, port, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIO;
  }
  return kExitUsage;
}

}  // namespace l1c
