#include "l1c/colorizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>
#include <random>
#include <unordered_set>

#include "l1c/error.hpp"

namespace l1c {
namespace {

using Clock = std::chrono::steady_clock;

struct ChannelOutcome {
  std::vector<double> values;  ///< unclamped chroma per pixel
  int iterations = 0;
};

std::vector<int> free_pixels(int n, const std::vector<int>& fixed) {
  std::vector<char> is_fixed(static_cast<std::size_t>(n), 0);
  for (int i : fixed) is_fixed[i] = 1;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n) - fixed.size());
  for (int i = 0; i < n; ++i) {
    if (!is_fixed[i]) out.push_back(i);
  }
  return out;
}

ChannelOutcome solve_l1_channel(const SparseMatrix& f, const ChannelSites& sites, const ColorizeParams& params,
                                bool exact) {
  const L1Assembly as = assemble_l1_problem(f, sites, params.lambda, exact);
  const LPSolution sol = solve_lp(as.problem, params.tol, params.max_iter);
  if (sol.status != LPStatus::optimal) {
    throw Error(ErrorCode::SolverFailed, "L1 solve ended with status " + std::string(to_string(sol.status)));
  }
  if (!kkt_residuals(as.problem, sol).within(params.tol)) {
    throw Error(ErrorCode::SolverFailed, "L1 solve reported optimal but KKT residuals exceed tolerance");
  }
  ChannelOutcome out;
  out.values.assign(static_cast<std::size_t>(as.n_pixels), 0.0);
  for (std::size_t k = 0; k < sites.size(); ++k) out.values[sites.indices[k]] = sites.values[k];
  for (std::size_t k = 0; k < as.variable_pixels.size(); ++k) {
    out.values[as.variable_pixels[k]] = sol.x[k] - kChromaShift;
  }
  out.iterations = sol.iterations;
  return out;
}

/// Jacobi-preconditioned conjugate gradient for a symmetric positive
/// (semi)definite operator. Returns the iteration count, or -1 when the
/// relative residual did not reach `tol`.
int pcg(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
        const std::vector<double>& diag, const std::vector<double>& rhs, std::vector<double>& x, double tol,
        int max_iter) {
  const std::size_t n = rhs.size();
  std::vector<double> r(n), zv(n), p(n), q(n);
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
  auto norm = [](const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); };
  const double rhs_norm = norm(rhs);
  const double target = tol * (rhs_norm > 0.0 ? rhs_norm : 1.0);
  if (norm(r) <= target) return 0;

  for (std::size_t i = 0; i < n; ++i) zv[i] = diag[i] > 0.0 ? r[i] / diag[i] : r[i];
  p = zv;
  double rz = std::inner_product(r.begin(), r.end(), zv.begin(), 0.0);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
    if (!(pq > 0.0)) return norm(r) <= target ? it : -1;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    if (norm(r) <= target) return it;
    for (std::size_t i = 0; i < n; ++i) zv[i] = diag[i] > 0.0 ? r[i] / diag[i] : r[i];
    const double rz_next = std::inner_product(r.begin(), r.end(), zv.begin(), 0.0);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = zv[i] + beta * p[i];
  }
  return -1;
}

ChannelOutcome solve_l2_channel(const SparseMatrix& f, const SparseMatrix& ft, const ChannelSites& sites,
                                const ColorizeParams& params, bool exact) {
  const int n = f.cols();
  const int max_iter = params.cg_max_iter > 0 ? params.cg_max_iter : std::max(1000, 20 * n);
  const double mean_site =
      std::accumulate(sites.values.begin(), sites.values.end(), 0.0) / static_cast<double>(sites.size());

  // Column norms of F give the diagonal of F^T F.
  std::vector<double> col_sq(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < f.rows(); ++i) {
    const auto cols = f.row_cols(i);
    const auto vals = f.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) col_sq[cols[k]] += vals[k] * vals[k];
  }

  ChannelOutcome out;
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> full(static_cast<std::size_t>(n));

  if (exact) {
    // min |F_free u_free + F_S u_S|^2 over the free pixels.
    const auto free = free_pixels(n, sites.indices);
    std::vector<double> fixed(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < sites.size(); ++k) fixed[sites.indices[k]] = sites.values[k];
    const auto fixed_rhs = ft.multiply(f.multiply(fixed));

    std::vector<double> rhs(free.size()), diag(free.size()), x(free.size(), mean_site);
    for (std::size_t k = 0; k < free.size(); ++k) {
      rhs[k] = -fixed_rhs[free[k]];
      diag[k] = col_sq[free[k]];
    }
    auto apply = [&](const std::vector<double>& v, std::vector<double>& outv) {
      std::fill(full.begin(), full.end(), 0.0);
      for (std::size_t k = 0; k < free.size(); ++k) full[free[k]] = v[k];
      const auto g = ft.multiply(f.multiply(full));
      for (std::size_t k = 0; k < free.size(); ++k) outv[k] = g[free[k]];
    };
    out.iterations = free.empty() ? 0 : pcg(apply, diag, rhs, x, params.cg_tol, max_iter);
    if (out.iterations < 0) throw Error(ErrorCode::SolverFailed, "conjugate gradient did not converge");
    out.values = fixed;
    for (std::size_t k = 0; k < free.size(); ++k) out.values[free[k]] = x[k];
  } else {
    // Gaussian scribble error: min |F u|^2 + lambda^2 |u_S - U_o|^2.
    const double l2 = params.lambda * params.lambda;
    std::vector<double> rhs(static_cast<std::size_t>(n), 0.0), diag = col_sq, x(static_cast<std::size_t>(n), mean_site);
    for (std::size_t k = 0; k < sites.size(); ++k) {
      rhs[sites.indices[k]] = l2 * sites.values[k];
      diag[sites.indices[k]] += l2;
    }
    auto apply = [&](const std::vector<double>& v, std::vector<double>& outv) {
      outv = ft.multiply(f.multiply(v));
      for (int i : sites.indices) outv[i] += l2 * v[i];
    };
    out.iterations = pcg(apply, diag, rhs, x, params.cg_tol, max_iter);
    if (out.iterations < 0) throw Error(ErrorCode::SolverFailed, "conjugate gradient did not converge");
    out.values = std::move(x);
  }
  return out;
}

Plane to_clamped_plane(const std::vector<double>& values, int width, int height) {
  Plane p(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) p[i] = std::clamp(values[i], -kChromaLimit, kChromaLimit);
  return p;
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

double psnr_from_mse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

void ScribbleSet::validate(int width, int height) const {
  if (sites.empty()) throw Error(ErrorCode::EmptyScribbles, "scribble set is empty");
  const long n = static_cast<long>(width) * height;
  std::unordered_set<int> seen;
  for (const auto& s : sites) {
    if (s.index < 0 || s.index >= n) throw Error(ErrorCode::InvalidScribbles, "scribble outside the image");
    if (!seen.insert(s.index).second) throw Error(ErrorCode::InvalidScribbles, "duplicate scribble site");
    if (!(std::abs(s.u) <= kChromaLimit) || !(std::abs(s.v) <= kChromaLimit)) {
      throw Error(ErrorCode::InvalidScribbles, "scribble chroma outside [-0.5, 0.5]");
    }
  }
}

ChannelSites channel_sites(const ScribbleSet& s, Channel ch) {
  ChannelSites out;
  out.indices.reserve(s.sites.size());
  out.values.reserve(s.sites.size());
  for (const auto& site : s.sites) {
    out.indices.push_back(site.index);
    out.values.push_back(ch == Channel::u ? site.u : site.v);
  }
  return out;
}

std::string_view to_string(Method m) { return m == Method::l1 ? "l1" : "l2"; }

Method parse_method(std::string_view s) {
  if (s == "l1") return Method::l1;
  if (s == "l2") return Method::l2;
  throw Error(ErrorCode::InvalidArgument, "unknown method: " + std::string(s));
}

ScribblePattern parse_pattern(std::string_view s) {
  if (s == "uniform-random" || s == "random") return ScribblePattern::uniform_random;
  if (s == "grid") return ScribblePattern::grid;
  throw Error(ErrorCode::InvalidArgument, "unknown scribble pattern: " + std::string(s));
}

L1Assembly assemble_l1_problem(const SparseMatrix& f, const ChannelSites& sites, double lambda, bool exact) {
  const int n = f.rows();
  if (f.cols() != n) throw Error(ErrorCode::DimensionMismatch, "assemble_l1_problem: filter matrix must be square");
  if (sites.indices.size() != sites.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "assemble_l1_problem: site index/value lengths differ");
  }
  if (sites.size() == 0) throw Error(ErrorCode::EmptyScribbles, "assemble_l1_problem: no scribbles");
  for (int i : sites.indices) {
    if (i < 0 || i >= n) throw Error(ErrorCode::DimensionMismatch, "assemble_l1_problem: scribble out of range");
  }
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "assemble_l1_problem: lambda must be > 0");

  L1Assembly as;
  as.n_pixels = n;
  as.exact = exact;
  LPProblem& lp = as.problem;
  std::vector<int> cols;
  std::vector<double> vals;

  if (exact) {
    const auto free = free_pixels(n, sites.indices);
    const int nf = static_cast<int>(free.size());
    std::vector<int> free_pos(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < nf; ++k) free_pos[free[k]] = k;
    std::vector<double> fixed(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < sites.size(); ++k) fixed[sites.indices[k]] = sites.values[k] + kChromaShift;

    // F_free U'_free + nu - mu = -F_S U'_S
    lp.a_eq = SparseMatrix(0, nf + 2 * n);
    lp.b_eq.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      cols.clear();
      vals.clear();
      const auto rc = f.row_cols(i);
      const auto rv = f.row_values(i);
      double folded = 0.0;
      for (std::size_t k = 0; k < rc.size(); ++k) {
        if (free_pos[rc[k]] >= 0) {
          cols.push_back(free_pos[rc[k]]);
          vals.push_back(rv[k]);
        } else {
          folded += rv[k] * fixed[rc[k]];
        }
      }
      cols.push_back(nf + i);
      vals.push_back(1.0);
      cols.push_back(nf + n + i);
      vals.push_back(-1.0);
      lp.a_eq.append_row(cols, vals);
      lp.b_eq[i] = -folded;
    }
    lp.c.assign(static_cast<std::size_t>(nf), 0.0);
    lp.c.resize(static_cast<std::size_t>(nf + 2 * n), 1.0);
    as.variable_pixels = free;
  } else {
    const int k = static_cast<int>(sites.size());
    const int m = n + k;
    // Columns: U' [0, n), nu [n, n + m), mu [n + m, n + 2m).
    lp.a_eq = SparseMatrix(0, n + 2 * m);
    lp.b_eq.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < n; ++i) {
      const auto rc = f.row_cols(i);
      const auto rv = f.row_values(i);
      cols.assign(rc.begin(), rc.end());
      vals.assign(rv.begin(), rv.end());
      cols.push_back(n + i);
      vals.push_back(1.0);
      cols.push_back(n + m + i);
      vals.push_back(-1.0);
      lp.a_eq.append_row(cols, vals);
      // F (0.5 * 1) vanishes because every filter row sums to zero.
    }
    for (int s = 0; s < k; ++s) {
      const int row = n + s;
      const int pix = sites.indices[s];
      const int c3[] = {pix, n + row, n + m + row};
      const double v3[] = {lambda, 1.0, -1.0};
      lp.a_eq.append_row(c3, v3);
      lp.b_eq[row] = lambda * (sites.values[s] + kChromaShift);
    }
    lp.c.assign(static_cast<std::size_t>(n), 0.0);
    lp.c.resize(static_cast<std::size_t>(n + 2 * m), 1.0);
    as.variable_pixels.resize(static_cast<std::size_t>(n));
    std::iota(as.variable_pixels.begin(), as.variable_pixels.end(), 0);
  }
  return as;
}

double j1_objective(const SparseMatrix& f, const Plane& u, const ChannelSites& sites, double lambda) {
  if (f.cols() != static_cast<int>(u.size()) || f.rows() != static_cast<int>(u.size())) {
    throw Error(ErrorCode::DimensionMismatch, "j1_objective: filter and plane sizes differ");
  }
  double total = 0.0;
  for (int i = 0; i < f.rows(); ++i) {
    const auto cols = f.row_cols(i);
    const auto vals = f.row_values(i);
    double g = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) g += vals[k] * u[static_cast<std::size_t>(cols[k])];
    total += std::abs(g);
  }
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const int i = sites.indices[k];
    if (i < 0 || i >= static_cast<int>(u.size())) throw Error(ErrorCode::DimensionMismatch, "j1_objective: site out of range");
    total += lambda * std::abs(u[static_cast<std::size_t>(i)] - sites.values[k]);
  }
  return total;
}

int count_unanchored_components(const SparseMatrix& f, std::span<const int> anchors) {
  const int n = f.rows();
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    const auto cols = f.row_cols(i);
    const auto vals = f.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] == i || vals[k] == 0.0) continue;
      const int a = find_root(parent, i), b = find_root(parent, cols[k]);
      if (a != b) parent[a] = b;
    }
  }
  std::vector<char> anchored(static_cast<std::size_t>(n), 0);
  for (int a : anchors) anchored[find_root(parent, a)] = 1;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (find_root(parent, i) == i && !anchored[i]) ++count;
  }
  return count;
}

ColorizeResult colorize(const Plane& y, const ScribbleSet& scribbles, const ColorizeParams& params) {
  const auto start = Clock::now();
  scribbles.validate(y.width, y.height);
  params.filter.validate();
  if (!(params.lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
  for (double s : y.samples) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "colorize: non-finite luminance");
  }

  const SparseMatrix f = build_filter_matrix(y, params.filter);
  const ChannelSites su = channel_sites(scribbles, Channel::u);
  const ChannelSites sv = channel_sites(scribbles, Channel::v);

  std::function<ChannelOutcome(const ChannelSites&)> solve;
  SparseMatrix ft;
  if (params.method == Method::l1) {
    solve = [&](const ChannelSites& s) { return solve_l1_channel(f, s, params, scribbles.exact); };
  } else {
    ft = f.transpose();
    solve = [&](const ChannelSites& s) { return solve_l2_channel(f, ft, s, params, scribbles.exact); };
  }

  ChannelOutcome ou, ov;
  if (params.parallel_channels) {
    auto fv = std::async(std::launch::async, solve, std::cref(sv));
    ou = solve(su);
    ov = fv.get();
  } else {
    ou = solve(su);
    ov = solve(sv);
  }

  ColorizeResult res;
  res.method = params.method;
  res.u = to_clamped_plane(ou.values, y.width, y.height);
  res.v = to_clamped_plane(ov.values, y.width, y.height);
  res.iterations_u = ou.iterations;
  res.iterations_v = ov.iterations;
  res.objective_u = j1_objective(f, res.u, su, params.lambda);
  res.objective_v = j1_objective(f, res.v, sv, params.lambda);
  res.unanchored_components = count_unanchored_components(f, su.indices);
  res.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

Metrics evaluate(const ColorizeResult& result, const YUVImage& reference) {
  if (!result.u.same_shape(reference.u) || !result.v.same_shape(reference.v)) {
    throw Error(ErrorCode::DimensionMismatch, "evaluate: result and reference sizes differ");
  }
  const double n = static_cast<double>(reference.u.size());
  double au = 0, av = 0, su = 0, sv = 0;
  for (std::size_t i = 0; i < reference.u.size(); ++i) {
    const double du = result.u[i] - reference.u[i];
    const double dv = result.v[i] - reference.v[i];
    au += std::abs(du);
    av += std::abs(dv);
    su += du * du;
    sv += dv * dv;
  }
  Metrics m;
  m.mae_u = au / n;
  m.mae_v = av / n;
  m.rmse_u = std::sqrt(su / n);
  m.rmse_v = std::sqrt(sv / n);
  m.psnr_u = psnr_from_mse(su / n);
  m.psnr_v = psnr_from_mse(sv / n);
  m.psnr = psnr_from_mse((su + sv) / (2.0 * n));
  return m;
}

ScribbleSet sample_scribbles(const YUVImage& original, int count, std::uint64_t seed, ScribblePattern pattern) {
  const int w = original.width, h = original.height;
  const int n = w * h;
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "sample_scribbles: count must be >= 1");
  if (count > n) throw Error(ErrorCode::CountTooLarge, "sample_scribbles: count exceeds the number of pixels");

  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  if (pattern == ScribblePattern::uniform_random) {
    std::mt19937_64 rng(seed);
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < count; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    chosen.assign(idx.begin(), idx.begin() + count);
  } else {
    // Cell centers of a gx-by-gy grid covering the image, thinned evenly to `count`.
    int gx = std::clamp(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count) * w / h))), 1, w);
    int gy = std::clamp(static_cast<int>(std::ceil(static_cast<double>(count) / gx)), 1, h);
    while (gx * gy < count && gx < w) ++gx;
    while (gx * gy < count && gy < h) ++gy;
    const long cells = static_cast<long>(gx) * gy;
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < count; ++k) {
      const long cell = static_cast<long>(k) * cells / count;
      const int cx = static_cast<int>(cell % gx), cy = static_cast<int>(cell / gx);
      const int x = std::min(w - 1, static_cast<int>((cx + 0.5) * w / gx));
      const int y = std::min(h - 1, static_cast<int>((cy + 0.5) * h / gy));
      const int p = y * w + x;
      if (!taken[p]) {
        taken[p] = 1;
        chosen.push_back(p);
      }
    }
    for (int p = 0; p < n && static_cast<int>(chosen.size()) < count; ++p) {
      if (!taken[p]) {
        taken[p] = 1;
        chosen.push_back(p);
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());

  ScribbleSet s;
  s.exact = true;
  s.sites.reserve(chosen.size());
  for (int p : chosen) s.sites.push_back({p, original.u[static_cast<std::size_t>(p)], original.v[static_cast<std::size_t>(p)]});
  return s;
}

}  // namespace l1c
