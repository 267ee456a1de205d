#include "l1c/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include <Eigen/Sparse>
#include <Eigen/CholmodSupport>

#include "l1c/error.hpp"

namespace l1c {
namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kBaseRegularization = 1e-10;
constexpr double kMaxRegularization = 1e-2;
constexpr double kStepFraction = 0.99;
constexpr double kDivergence = 1e10;
constexpr double kFarkasMagnitude = 1e3;
constexpr int kRefinementSteps = 3;
constexpr int kMaxStepCuts = 20;

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// Largest step t <= cap keeping v + t*dv >= 0.
double max_step(const Vec& v, const Vec& dv, double cap) {
  double t = cap;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) t = std::min(t, -v[i] / dv[i]);
  }
  return t;
}

/// True when the direction of a large, nearly dual-feasible y proves
/// A x = b, x >= 0 infeasible: A^T y <= 0 and b^T y > 0 in the limit. The
/// bound on A^T y allows for the cost vector shrinking as |y| grows.
bool farkas_certificate(const SpMat& a, const Vec& b, const Vec& y, double c_scale, double tol) {
  const double ny = inf_norm(y);
  if (ny < kFarkasMagnitude * c_scale) return false;
  const Vec yn = y / ny;
  const Vec aty = a.transpose() * yn;
  return aty.maxCoeff() <= c_scale / ny + tol && b.dot(yn) > std::sqrt(tol) * (1.0 + inf_norm(b));
}

/// Rows and columns that survive removal of empty rows and columns.
struct Reduction {
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<int> fixed_cols;  ///< empty columns, fixed at zero
  bool infeasible = false;
  bool unbounded = false;
};

Reduction reduce(const LPProblem& p, double tol) {
  Reduction red;
  std::vector<int> col_count(static_cast<std::size_t>(p.cols()), 0);
  const double b_scale = 1.0 + inf_norm(p.b_eq);
  for (int i = 0; i < p.rows(); ++i) {
    bool empty = true;
    const auto vals = p.a_eq.row_values(i);
    const auto cols = p.a_eq.row_cols(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (vals[k] != 0.0) {
        empty = false;
        ++col_count[cols[k]];
      }
    }
    if (empty) {
      if (std::abs(p.b_eq[i]) > tol * b_scale) red.infeasible = true;
    } else {
      red.rows.push_back(i);
    }
  }
  for (int j = 0; j < p.cols(); ++j) {
    if (col_count[j] > 0) {
      red.cols.push_back(j);
    } else {
      red.fixed_cols.push_back(j);
      if (p.c[j] < 0.0) red.unbounded = true;
    }
  }
  return red;
}

class NormalEquations {
 public:
  explicit NormalEquations(const SpMat& a) : a_(a), at_(a.transpose()) {
    // Nested dissection keeps fill low on image-grid stencils. The simplicial
    // factorization needs no BLAS.
    solver_.cholmod().nmethods = 1;
    solver_.cholmod().method[0].ordering = CHOLMOD_METIS;
    solver_.cholmod().postorder = 1;
    // Failed factorizations are retried with a larger shift, so CHOLMOD's
    // warnings about them are noise.
    solver_.cholmod().print = 1;
  }

  /// Factors A diag(d) A^T, escalating the diagonal shift until the
  /// factorization is positive definite.
  void factor(const Vec& d) {
    d_ = d;
    SpMat ad = a_;
    for (int j = 0; j < ad.outerSize(); ++j) {
      for (SpMat::InnerIterator it(ad, j); it; ++it) it.valueRef() *= d[j];
    }
    SpMat m = ad * at_;
    if (!analyzed_) {
      // METIS draws from a process-wide random state, so concurrent orderings
      // would depend on thread timing.
      static std::mutex ordering_mu;
      std::lock_guard lock(ordering_mu);
      solver_.analyzePattern(m);
      analyzed_ = true;
    }
    std::vector<double> diag(static_cast<std::size_t>(m.rows()));
    double diag_max = 1.0;
    for (int i = 0; i < m.rows(); ++i) {
      diag[i] = m.coeff(i, i);
      diag_max = std::max(diag_max, diag[i]);
    }

    auto attempt = [&](double shift) {
      for (int i = 0; i < m.rows(); ++i) m.coeffRef(i, i) = diag[i] + shift;
      solver_.factorize(m);
      return solver_.info() == Eigen::Success;
    };
    if (attempt(kBaseRegularization)) return;
    // Escalation is relative to the largest diagonal entry so that it stays
    // effective when the scaling d spans many orders of magnitude.
    for (double reg = kBaseRegularization; reg <= kMaxRegularization; reg *= 100.0) {
      if (attempt(reg * diag_max)) return;
    }
    throw Error(ErrorCode::NumericalBreakdown, "normal-equations factorization failed after regularization");
  }

  Vec solve(const Vec& rhs) const { return solver_.solve(rhs); }

  /// Solve followed by iterative refinement against the unshifted operator,
  /// which recovers the accuracy lost to regularization near the optimum.
  Vec solve_refined(const Vec& rhs) const {
    Vec x = solver_.solve(rhs);
    Vec r = rhs - apply(x);
    double r_norm = inf_norm(r);
    for (int k = 0; k < kRefinementSteps && r_norm > 0.0; ++k) {
      const Vec next = x + solver_.solve(r);
      const Vec next_r = rhs - apply(next);
      const double next_norm = inf_norm(next_r);
      if (!(next_norm < r_norm)) break;
      x = next;
      r = next_r;
      r_norm = next_norm;
    }
    return x;
  }

 private:
  Vec apply(const Vec& v) const { return a_ * d_.cwiseProduct(at_ * v); }

  SpMat a_;
  SpMat at_;
  Vec d_;
  Eigen::CholmodSimplicialLLT<SpMat, Eigen::Lower> solver_;
  bool analyzed_ = false;
};

struct Iterate {
  Vec x, y, z;
};

/// Mehrotra's least-squares starting point, shifted into the positive orthant.
Iterate starting_point(const SpMat& a, const Vec& b, const Vec& c, NormalEquations& ne) {
  const Eigen::Index n = a.cols();
  ne.factor(Vec::Ones(n));
  Iterate it;
  it.x = a.transpose() * ne.solve(b);
  it.y = ne.solve(a * c);
  it.z = c - a.transpose() * it.y;

  const double dx = std::max(-1.5 * it.x.minCoeff(), 0.0);
  const double dz = std::max(-1.5 * it.z.minCoeff(), 0.0);
  it.x.array() += dx;
  it.z.array() += dz;
  const double xz = it.x.dot(it.z);
  if (xz > 0.0) {
    const double sx = 0.5 * xz / it.z.sum();
    const double sz = 0.5 * xz / it.x.sum();
    it.x.array() += sx;
    it.z.array() += sz;
  }
  // Degenerate data (b = 0 or c in range(A^T)) leaves zeros behind.
  const double floor_x = std::max(1e-2 * inf_norm(it.x), 1.0);
  const double floor_z = std::max(1e-2 * inf_norm(it.z), 1.0);
  if (!(it.x.minCoeff() > 0.0) || !it.x.allFinite()) it.x = it.x.cwiseMax(floor_x);
  if (!(it.z.minCoeff() > 0.0) || !it.z.allFinite()) it.z = it.z.cwiseMax(floor_z);
  return it;
}

/// One weighted projection of x onto A x = b. The weights x/z confine the
/// correction to the support, so the iterate stays nonnegative; it is kept
/// only if it lowers the primal residual.
void polish_primal(const SpMat& a, const Vec& b, const Vec& rb, NormalEquations& ne, Iterate& it) {
  const Vec d = it.x.cwiseQuotient(it.z.cwiseMax(std::numeric_limits<double>::min()));
  try {
    ne.factor(d);
  } catch (const Error&) {
    return;
  }
  const Vec dy = ne.solve_refined(-rb);
  const Vec x = it.x + d.cwiseProduct(a.transpose() * dy);
  if (x.allFinite() && x.minCoeff() >= 0.0 && inf_norm(Vec(a * x - b)) < inf_norm(rb)) it.x = x;
}

LPSolution expand(const LPProblem& p, const Reduction& red, const Iterate& it, LPStatus status, int iterations) {
  LPSolution s;
  s.x.assign(static_cast<std::size_t>(p.cols()), 0.0);
  s.z.assign(static_cast<std::size_t>(p.cols()), 0.0);
  s.y.assign(static_cast<std::size_t>(p.rows()), 0.0);
  for (std::size_t k = 0; k < red.cols.size(); ++k) {
    s.x[red.cols[k]] = it.x[static_cast<Eigen::Index>(k)];
    s.z[red.cols[k]] = it.z[static_cast<Eigen::Index>(k)];
  }
  for (std::size_t k = 0; k < red.rows.size(); ++k) s.y[red.rows[k]] = it.y[static_cast<Eigen::Index>(k)];
  for (int j : red.fixed_cols) s.z[j] = p.c[j];
  s.objective = std::inner_product(p.c.begin(), p.c.end(), s.x.begin(), 0.0);
  s.status = status;
  s.iterations = iterations;
  return s;
}

}  // namespace

std::string_view to_string(LPStatus status) {
  switch (status) {
    case LPStatus::optimal: return "optimal";
    case LPStatus::infeasible: return "infeasible";
    case LPStatus::unbounded: return "unbounded";
    case LPStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

void LPProblem::validate() const {
  a_eq.validate();
  if (b_eq.size() != static_cast<std::size_t>(rows()) || c.size() != static_cast<std::size_t>(cols())) {
    throw Error(ErrorCode::DimensionMismatch, "LPProblem: b or c length does not match A");
  }
  if (rows() > cols()) throw Error(ErrorCode::DimensionMismatch, "LPProblem: more rows than columns");
  for (double v : b_eq) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "LPProblem: non-finite b");
  }
  for (double v : c) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "LPProblem: non-finite c");
  }
}

KktResiduals kkt_residuals(const LPProblem& p, const LPSolution& s) {
  if (s.x.size() != static_cast<std::size_t>(p.cols()) || s.z.size() != static_cast<std::size_t>(p.cols()) ||
      s.y.size() != static_cast<std::size_t>(p.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "kkt_residuals: solution does not match problem");
  }
  KktResiduals r;
  const auto ax = p.a_eq.multiply(s.x);
  for (int i = 0; i < p.rows(); ++i) r.primal = std::max(r.primal, std::abs(ax[i] - p.b_eq[i]));
  r.primal /= 1.0 + inf_norm(p.b_eq);

  const auto aty = p.a_eq.multiply_transpose(s.y);
  for (int j = 0; j < p.cols(); ++j) r.dual = std::max(r.dual, std::abs(aty[j] + s.z[j] - p.c[j]));
  r.dual /= 1.0 + inf_norm(p.c);

  double xz = 0.0;
  for (int j = 0; j < p.cols(); ++j) {
    xz += s.x[j] * s.z[j];
    r.bound = std::max({r.bound, -s.x[j], -s.z[j]});
  }
  r.gap = p.cols() > 0 ? xz / p.cols() : 0.0;
  return r;
}

LPSolution solve_lp(const LPProblem& p, double tol, int max_iter) {
  p.validate();
  if (!(tol > 0.0 && tol <= 1e-2)) throw Error(ErrorCode::InvalidArgument, "solve_lp: tol must lie in (0, 1e-2]");
  if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "solve_lp: max_iter must be >= 1");

  const Reduction red = reduce(p, tol);
  const auto m = static_cast<Eigen::Index>(red.rows.size());
  const auto n = static_cast<Eigen::Index>(red.cols.size());

  if (red.infeasible || red.unbounded || n == 0) {
    Iterate empty{Vec::Zero(n), Vec::Zero(m), Vec::Zero(n)};
    for (Eigen::Index k = 0; k < n; ++k) empty.z[k] = p.c[red.cols[static_cast<std::size_t>(k)]];
    const LPStatus st = red.infeasible ? LPStatus::infeasible
                        : red.unbounded ? LPStatus::unbounded
                                        : LPStatus::optimal;
    return expand(p, red, empty, st, 0);
  }

  std::vector<int> col_pos(static_cast<std::size_t>(p.cols()), -1);
  for (std::size_t k = 0; k < red.cols.size(); ++k) col_pos[red.cols[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.a_eq.nnz());
  for (std::size_t r = 0; r < red.rows.size(); ++r) {
    const int i = red.rows[r];
    const auto cols = p.a_eq.row_cols(i);
    const auto vals = p.a_eq.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (vals[k] != 0.0) trips.emplace_back(static_cast<int>(r), col_pos[cols[k]], vals[k]);
    }
  }
  SpMat a(m, n);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  const SpMat at = a.transpose();

  Vec b(m), c(n);
  for (Eigen::Index k = 0; k < m; ++k) b[k] = p.b_eq[red.rows[static_cast<std::size_t>(k)]];
  for (Eigen::Index k = 0; k < n; ++k) c[k] = p.c[red.cols[static_cast<std::size_t>(k)]];
  const double b_scale = 1.0 + inf_norm(b);
  const double c_scale = 1.0 + inf_norm(c);
  const double big = kDivergence * std::max({1.0, inf_norm(b), inf_norm(c)});

  NormalEquations ne(a);
  Iterate it = starting_point(a, b, c, ne);

  for (int iter = 0; iter <= max_iter; ++iter) {
    const Vec rb = a * it.x - b;
    const Vec rc = at * it.y + it.z - c;
    const double mu = it.x.dot(it.z) / static_cast<double>(n);

    if (inf_norm(rc) <= tol * c_scale && mu <= tol) {
      // Dual feasibility and complementarity are met; a projection often
      // closes a lagging primal residual.
      polish_primal(a, b, rb, ne, it);
      LPSolution s = expand(p, red, it, LPStatus::optimal, iter);
      if (kkt_residuals(p, s).within(tol)) return s;
    }
    if (const double nx = inf_norm(it.x); nx > big) {
      // Unbounded only if x / |x| is a nearly feasible ray of descent.
      if (inf_norm(Vec(a * it.x - b)) <= tol * nx && c.dot(it.x) < -tol * nx) {
        return expand(p, red, it, LPStatus::unbounded, iter);
      }
      throw Error(ErrorCode::NumericalBreakdown, "interior-point iterates diverged without an unboundedness ray");
    }
    if (inf_norm(it.y) > big || inf_norm(it.z) > big) return expand(p, red, it, LPStatus::infeasible, iter);
    if (farkas_certificate(a, b, it.y, c_scale, tol)) return expand(p, red, it, LPStatus::infeasible, iter);
    if (iter == max_iter) break;

    const Vec d = it.x.cwiseQuotient(it.z);
    ne.factor(d);

    // Solves the reduced Newton system for a complementarity target rxz.
    auto newton = [&](const Vec& rxz, Vec& dx, Vec& dy, Vec& dz) {
      const Vec t = rxz.cwiseQuotient(it.z) + d.cwiseProduct(rc);
      dy = ne.solve_refined(-rb - a * t);
      dz = -rc - at * dy;
      dx = t + d.cwiseProduct(at * dy);
    };

    Vec dx_aff, dy_aff, dz_aff;
    const Vec xz = it.x.cwiseProduct(it.z);
    newton(-xz, dx_aff, dy_aff, dz_aff);
    const double ap_aff = max_step(it.x, dx_aff, 1.0);
    const double ad_aff = max_step(it.z, dz_aff, 1.0);
    const double mu_aff =
        (it.x + ap_aff * dx_aff).dot(it.z + ad_aff * dz_aff) / static_cast<double>(n);
    const double sigma = std::pow(mu_aff / mu, 3.0);

    Vec dx, dy, dz;
    const Vec rxz = (-xz - dx_aff.cwiseProduct(dz_aff)).array() + sigma * mu;
    newton(rxz, dx, dy, dz);

    double ap = std::min(1.0, kStepFraction * max_step(it.x, dx, std::numeric_limits<double>::infinity()));
    const double ad = std::min(1.0, kStepFraction * max_step(it.z, dz, std::numeric_limits<double>::infinity()));
    // Near the optimum the normal equations are ill-conditioned and a full
    // step can undo primal feasibility; shorten it until feasibility holds.
    const double rb_cap = std::max(inf_norm(rb), 0.1 * tol * b_scale);
    for (int k = 0; k < kMaxStepCuts && inf_norm(Vec(a * (it.x + ap * dx) - b)) > rb_cap; ++k) ap *= 0.5;
    it.x += ap * dx;
    it.y += ad * dy;
    it.z += ad * dz;
    if (!it.x.allFinite() || !it.y.allFinite() || !it.z.allFinite()) {
      throw Error(ErrorCode::NumericalBreakdown, "interior-point iterate became non-finite");
    }
  }
  return expand(p, red, it, LPStatus::iteration_limit, max_iter);
}

}  // namespace l1c
