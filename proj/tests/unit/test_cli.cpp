#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/SparseLU>
#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "l1c/affinity.hpp"
#include "l1c/cli.hpp"
#include "l1c/colorizer.hpp"
#include "l1c/colorspace.hpp"
#include "l1c/scribble_io.hpp"
#include "l1c/sparsity_stats.hpp"

namespace fs = std::filesystem;
using namespace l1c;
using nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Runs the installed binary and returns its exit status.
int run_binary(const std::string& args, const fs::path& stdout_path) {
  const std::string cmd = std::string(L1C_CLI_BINARY) + " " + args + " > " + stdout_path.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("l1c_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
  return parts;
}

fs::path data(const std::string& name) { return fs::path(L1C_TEST_DATA_DIR) / name; }

/// Draws from p(x) proportional to exp(-|x / s|^alpha): |x| / s is G^(1/alpha)
/// for G ~ Gamma(1/alpha, 1).
std::vector<double> ggd_samples(std::size_t n, double alpha, double s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> out(n);
  for (double& x : out) x = (sign(rng) ? 1.0 : -1.0) * s * std::pow(gamma(rng), 1.0 / alpha);
  return out;
}

/// Sparse copy of `f` with row 0 replaced by the unit row, optionally transposed.
Eigen::SparseMatrix<double> pinned(const SparseMatrix& f, bool transpose) {
  const int n = f.rows();
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    const auto cols = f.row_cols(i);
    const auto vals = f.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const int r = transpose ? cols[k] : i;
      const int c = transpose ? i : cols[k];
      if (r != 0) trips.emplace_back(r, c, vals[k]);
    }
  }
  trips.emplace_back(0, 0, 1.0);
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

/// Chroma plane whose filter response is exactly `e` shifted by a constant.
/// The shift puts the right-hand side in the range of the singular filter,
/// so the pinned pixel carries no outlier.
Plane plane_with_responses(const SparseMatrix& f, const std::vector<double>& e, int w, int h) {
  const int n = w * h;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  unit[0] = 1.0;
  lu.compute(pinned(f, true));
  const Eigen::VectorXd left_null = lu.solve(unit);

  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(e.data(), n);
  rhs.array() -= left_null.dot(rhs) / left_null.sum();
  rhs[0] = 0.0;
  lu.compute(pinned(f, false));
  const Eigen::VectorXd u = lu.solve(rhs);
  Plane p(w, h);
  const double mean = u.mean();
  for (int i = 0; i < n; ++i) p[i] = u[i] - mean;
  return p;
}

void write_png16(const Plane& y, const Plane& u, const Plane& v, const fs::path& path) {
  const RGBImage rgb = compose(y, u, v);
  cv::Mat m(y.height, y.width, CV_16UC3);
  for (int r = 0; r < y.height; ++r) {
    for (int c = 0; c < y.width; ++c) {
      const std::size_t i = rgb.r.index(c, r);
      auto q = [](double s) { return static_cast<std::uint16_t>(std::lround(std::clamp(s, 0.0, 1.0) * 65535.0)); };
      m.at<cv::Vec3w>(r, c) = cv::Vec3w(q(rgb.b[i]), q(rgb.g[i]), q(rgb.r[i]));
    }
  }
  ASSERT_TRUE(cv::imwrite(path.string(), m));
}

void write_constant_gray(const fs::path& path, int w, int h, double level) {
  const Plane y(w, h, level), zero(w, h, 0.0);
  save_image(compose(y, zero, zero), path);
}

double field(const std::string& line, const std::string& key) {
  const auto pos = line.find(key + "=");
  EXPECT_NE(pos, std::string::npos) << line;
  return std::stod(line.substr(pos + key.size() + 1));
}

}  // namespace

TEST(Cli, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::FileNotFound), kExitIO);
  EXPECT_EQ(exit_code_for(ErrorCode::CorruptImage), kExitIO);
  EXPECT_EQ(exit_code_for(ErrorCode::InvalidScribbles), kExitUsage);
  EXPECT_EQ(exit_code_for(ErrorCode::CountTooLarge), kExitUsage);
  EXPECT_EQ(exit_code_for(ErrorCode::DegenerateSamples), kExitSolver);
  EXPECT_EQ(exit_code_for(ErrorCode::SolverFailed), kExitSolver);
}

TEST(Cli, CsvNumbers) {
  EXPECT_EQ(format_csv_number(0.1), "0.1");
  EXPECT_EQ(format_csv_number(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(format_csv_number(INFINITY), "inf");
  EXPECT_EQ(format_csv_number(-INFINITY), "-inf");
  EXPECT_EQ(format_csv_number(NAN), "nan");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"colorize"}).code, kExitUsage);
  EXPECT_EQ(cli({"colorize", "a.png", "b.json", "--method", "l3"}).code, kExitUsage);
  EXPECT_EQ(cli({"colorize", "a.png", "b.json", "--exact", "--penalty"}).code, kExitUsage);
  EXPECT_EQ(cli({"colorize", "a.png", "b.json", "--window-radius", "0"}).code, kExitUsage);
  EXPECT_EQ(cli({"compare", data("chelsea_64.png").string()}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, ColorizeConstantImageIsUniform) {
  const fs::path dir = fresh_dir("uniform");
  write_constant_gray(dir / "gray.png", 20, 14, 0.5);
  ScribbleSet s;
  s.sites = {{3 * 20 + 7, 0.1, -0.08}};
  save_scribbles(s, 20, dir / "marks.json");

  for (const std::string method : {"l1", "l2"}) {
    const CliRun r = cli({"colorize", (dir / "gray.png").string(), (dir / "marks.json").string(), "--method", method,
                       "--out-dir", (dir / "out").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const fs::path png = dir / "out" / ("gray_" + method + ".png");
    EXPECT_EQ(r.out.rfind(png.string() + " method=" + method, 0), 0u) << r.out;
    const YUVImage img = rgb_to_yuv(load_image(png));
    for (std::size_t i = 0; i < img.u.size(); ++i) {
      ASSERT_NEAR(img.u[i], 0.1, 0.01);
      ASSERT_NEAR(img.v[i], -0.08, 0.01);
    }
    const json m = read_json(dir / "out" / ("gray_" + method + ".json"));
    EXPECT_EQ(m["command"], "colorize");
    EXPECT_EQ(m["params"]["method"], method);
    EXPECT_NEAR(m["metrics"]["j1"].get<double>(), 0.0, 1e-6);
    EXPECT_EQ(m["metrics"]["unanchored_components"], 0);
    EXPECT_TRUE(m["timings"].contains("solve"));
  }
}

TEST(Cli, L1ObjectiveDominatesL2InManifests) {
  const fs::path dir = fresh_dir("dominance");
  const RGBImage color = load_image(data("chelsea_64.png"));
  const YUVImage yuv = rgb_to_yuv(color);
  save_image(compose(yuv.y, Plane(64, 64, 0.0), Plane(64, 64, 0.0)), dir / "gray.png");
  save_scribbles(sample_scribbles(yuv, 40, 5, ScribblePattern::uniform_random), 64, dir / "marks.json");
  double j1[2];
  for (int k = 0; k < 2; ++k) {
    const std::string method = k == 0 ? "l1" : "l2";
    const fs::path out = dir / (method + ".png");
    const CliRun r =
        cli({"colorize", (dir / "gray.png").string(), (dir / "marks.json").string(), "--method", method, "-o", out.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    j1[k] = read_json(dir / (method + ".json"))["metrics"]["j1"].get<double>();
    EXPECT_NEAR(field(r.out, "j1"), j1[k], 1e-9 * (1.0 + j1[k]));
  }
  EXPECT_LE(j1[0], j1[1] + 1e-6);
}

TEST(Cli, MissingScribblesExitWithIoCodeAndNoOutput) {
  const fs::path dir = fresh_dir("missing");
  write_constant_gray(dir / "gray.png", 8, 8, 0.4);
  const int code = run_binary("colorize " + (dir / "gray.png").string() + " " + (dir / "absent.json").string() +
                                  " --out-dir " + (dir / "out").string(),
                              dir / "log.txt");
  EXPECT_EQ(code, kExitIO);
  EXPECT_FALSE(fs::exists(dir / "out" / "gray_l1.png"));
  EXPECT_FALSE(fs::exists(dir / "out" / "gray_l1.json"));
}

TEST(Cli, BadScribblesExitWithUsageCode) {
  const fs::path dir = fresh_dir("bad_marks");
  write_constant_gray(dir / "gray.png", 8, 8, 0.4);
  std::ofstream(dir / "marks.json") << R"({"sites": [{"x": 9, "y": 0, "u": 0, "v": 0}]})";
  const CliRun r = cli({"colorize", (dir / "gray.png").string(), (dir / "marks.json").string(), "--out-dir", dir.string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("InvalidScribbles"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "gray_l1.png"));
}

TEST(Cli, CompareRerunGivesIdenticalRow) {
  const fs::path dir = fresh_dir("determinism");
  std::vector<std::string> rows;
  for (int k = 0; k < 2; ++k) {
    const CliRun r = cli({"compare", data("chelsea_64.png").string(), "--count", "41", "--seed", "9", "--out-dir",
                       (dir / std::to_string(k)).string(), "--csv", (dir / "metrics.csv").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  const auto lines = read_lines(dir / "metrics.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], kCompareCsvHeader);
  const auto a = split(lines[1], ','), b = split(lines[2], ',');
  ASSERT_EQ(a.size(), 12u);
  ASSERT_EQ(b.size(), 12u);
  // The last two columns are wall-clock times.
  for (int c = 0; c < 10; ++c) EXPECT_EQ(a[c], b[c]) << "column " << c;
  EXPECT_LE(std::stod(a[8]), std::stod(a[9]) + 1e-6);

  for (const char* name : {"gray.png", "marked.png", "l1.png", "l2.png", "side_by_side.png", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "0" / name)) << name;
  }
  const RGBImage panel = load_image(dir / "0" / "side_by_side.png");
  EXPECT_EQ(panel.width, 4 * 64);
  EXPECT_EQ(panel.height, 64);
}

TEST(Cli, CompareWithEveryPixelScribbledReproducesOriginal) {
  const fs::path dir = fresh_dir("full");
  const CliRun r = cli({"compare", data("chelsea_64.png").string(), "--fraction", "1", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = read_lines(dir / "metrics.csv");
  ASSERT_EQ(lines.size(), 2u);
  const auto row = split(lines[1], ',');
  EXPECT_EQ(row[0], "4096");
  for (int c = 2; c <= 5; ++c) EXPECT_LT(std::stod(row[c]), 1e-9) << "column " << c;
  const RGBImage original = load_image(data("chelsea_64.png"));
  const RGBImage l1 = load_image(dir / "l1.png");
  for (std::size_t i = 0; i < original.r.size(); ++i) {
    ASSERT_NEAR(l1.r[i], original.r[i], 1.0 / 255.0 + 1e-12);
    ASSERT_NEAR(l1.g[i], original.g[i], 1.0 / 255.0 + 1e-12);
    ASSERT_NEAR(l1.b[i], original.b[i], 1.0 / 255.0 + 1e-12);
  }
}

TEST(Cli, CountBeyondImageIsUsageError) {
  const fs::path dir = fresh_dir("too_many");
  const CliRun r = cli({"compare", data("chelsea_64.png").string(), "--count", "5000", "--out-dir", dir.string()});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, FitRecoversSyntheticShape) {
  const fs::path dir = fresh_dir("fit");
  const int w = 128, h = 128;
  const Plane y(w, h, 0.5);
  const SparseMatrix f = build_filter_matrix(y, FilterConfig{});
  const double alpha = 0.8, s = 0.0003;
  const auto eu = ggd_samples(static_cast<std::size_t>(w * h), alpha, s, 21);
  const auto ev = ggd_samples(static_cast<std::size_t>(w * h), alpha, s, 22);
  const Plane u = plane_with_responses(f, eu, w, h);
  const Plane v = plane_with_responses(f, ev, w, h);
  double peak = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) peak = std::max({peak, std::abs(u[i]), std::abs(v[i])});
  ASSERT_LT(peak, 0.2) << "chroma would clip in RGB";
  write_png16(y, u, v, dir / "synthetic.png");

  const CliRun r = cli({"fit", (dir / "synthetic.png").string(), "--separate", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = split(r.out, '\n');
  ASSERT_EQ(lines.size(), 3u) << r.out;
  EXPECT_NE(lines[0].find(" uv "), std::string::npos);
  EXPECT_NEAR(field(lines[0], "alpha"), alpha, 0.05) << lines[0];
  EXPECT_NEAR(field(lines[0], "scale"), s, 0.1 * s) << lines[0];
  EXPECT_NE(lines[0].find("alpha_le_1=yes"), std::string::npos);
  // The image round trip should add almost nothing to a fit of the draws.
  std::vector<double> both = eu;
  both.insert(both.end(), ev.begin(), ev.end());
  EXPECT_NEAR(field(lines[0], "alpha"), fit_ggd(both).alpha, 0.005);
  EXPECT_NEAR(field(lines[1], "alpha"), alpha, 0.08) << lines[1];
  EXPECT_NEAR(field(lines[2], "alpha"), alpha, 0.08) << lines[2];

  const auto hist = read_lines(dir / "synthetic_hist.csv");
  EXPECT_EQ(hist.size(), 102u);
}

TEST(Cli, FitOnConstantChromaIsSolverError) {
  const fs::path dir = fresh_dir("fit_const");
  write_constant_gray(dir / "flat.png", 16, 16, 0.3);
  const CliRun r = cli({"fit", (dir / "flat.png").string(), "--out-dir", dir.string()});
  EXPECT_EQ(r.code, kExitSolver);
  EXPECT_NE(r.err.find("DegenerateSamples"), std::string::npos) << r.err;
}

TEST(Cli, FitPoolsSeveralImages) {
  const fs::path dir = fresh_dir("fit_pool");
  const CliRun r = cli({"fit", data("chelsea_64.png").string(), data("chelsea_64.png").string(), "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = split(r.out, '\n');
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[2].rfind("pooled uv ", 0), 0u);
  EXPECT_NEAR(field(lines[2], "alpha"), field(lines[0], "alpha"), 1e-9);
}

TEST(Cli, MarksWritesLoadableScribbles) {
  const fs::path dir = fresh_dir("marks");
  const fs::path out = dir / "m.json";
  const CliRun r = cli({"marks", data("chelsea_64.png").string(), "--count", "30", "--pattern", "grid", "--penalty", "-o",
                     out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, out.string() + " sites=30\n");
  const ScribbleSet s = load_scribbles(out, 64, 64);
  EXPECT_EQ(s.sites.size(), 30u);
  EXPECT_FALSE(s.exact);
  const YUVImage yuv = rgb_to_yuv(load_image(data("chelsea_64.png")));
  for (const Scribble& site : s.sites) {
    EXPECT_NEAR(site.u, yuv.u[site.index], 1e-12);
    EXPECT_NEAR(site.v, yuv.v[site.index], 1e-12);
  }
}
