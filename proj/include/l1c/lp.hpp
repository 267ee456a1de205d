#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "l1c/sparse_matrix.hpp"

namespace l1c {

/// min c^T x  s.t.  A_eq x = b_eq,  x >= 0.
struct LPProblem {
  SparseMatrix a_eq;
  std::vector<double> b_eq;
  std::vector<double> c;

  int rows() const { return a_eq.rows(); }
  int cols() const { return a_eq.cols(); }

  /// Throws DimensionMismatch / NonFinite when the invariants fail.
  void validate() const;
};

enum class LPStatus { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(LPStatus status);

struct LPSolution {
  std::vector<double> x;  ///< primal, >= 0
  std::vector<double> y;  ///< equality multipliers
  std::vector<double> z;  ///< reduced costs, >= 0
  double objective = 0.0;
  LPStatus status = LPStatus::iteration_limit;
  int iterations = 0;
};

inline constexpr double kDefaultLpTol = 1e-8;
inline constexpr int kDefaultLpMaxIter = 100;

/// Mehrotra predictor-corrector interior-point method. The Newton systems
/// are reduced to A D A^T dy = r and factored with a sparse Cholesky.
///
/// Returns the first iterate whose residuals (see kkt_residuals) are all
/// within `tol`, or a non-optimal status. Throws NumericalBreakdown when
/// the normal matrix cannot be factored even after regularization.
LPSolution solve_lp(const LPProblem& p, double tol = kDefaultLpTol, int max_iter = kDefaultLpMaxIter);

struct KktResiduals {
  double primal = 0.0;  ///< |Ax - b|_inf / (1 + |b|_inf)
  double dual = 0.0;    ///< |A^T y + z - c|_inf / (1 + |c|_inf)
  double gap = 0.0;     ///< x^T z / n
  double bound = 0.0;   ///< largest violation of x >= 0, z >= 0

  bool within(double tol) const { return primal <= tol && dual <= tol && gap <= tol && bound == 0.0; }
};

/// Optimality diagnostics recomputed from the problem data only.
KktResiduals kkt_residuals(const LPProblem& p, const LPSolution& s);

/// Fixed-format MPS with one equality row per constraint. Variables carry
/// the default [0, inf) bounds.
void write_mps(const LPProblem& p, std::ostream& os, const std::string& name = "L1C");
LPProblem read_mps(std::istream& is);

}  // namespace l1c
