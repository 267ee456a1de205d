#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l1c/affinity.hpp"
#include "l1c/colorspace.hpp"
#include "l1c/lp.hpp"
#include "l1c/plane.hpp"
#include "l1c/sparse_matrix.hpp"

namespace l1c {

struct Scribble {
  int index;  ///< y * width + x
  double u;
  double v;
};

/// User chroma marks. `exact` selects hard constraints; otherwise the marks
/// enter the objective through a lambda-weighted penalty.
struct ScribbleSet {
  std::vector<Scribble> sites;
  bool exact = true;

  /// Throws EmptyScribbles or InvalidScribbles.
  void validate(int width, int height) const;
};

/// One chroma channel of a ScribbleSet.
struct ChannelSites {
  std::vector<int> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
};

enum class Channel { u, v };
ChannelSites channel_sites(const ScribbleSet& s, Channel ch);

enum class Method { l1, l2 };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct ColorizeParams {
  double lambda = 100.0;
  Method method = Method::l1;
  FilterConfig filter;
  double tol = kDefaultLpTol;
  int max_iter = kDefaultLpMaxIter;
  double cg_tol = 1e-8;
  int cg_max_iter = 0;  ///< 0 picks a size-dependent limit
  bool parallel_channels = true;
};

struct ColorizeResult {
  Plane u, v;
  double objective_u = 0.0;  ///< J1 of the u plane, for both methods
  double objective_v = 0.0;
  Method method = Method::l1;
  double wall_time = 0.0;  ///< seconds
  int iterations_u = 0;
  int iterations_v = 0;
  /// Connected components of the affinity graph with no scribble.
  int unanchored_components = 0;
};

/// LP of the slack-pair reformulation of min |AU - b|_1, together with the
/// mapping from its leading variables back to pixels.
struct L1Assembly {
  LPProblem problem;
  std::vector<int> variable_pixels;  ///< pixel of each shifted-chroma variable
  int n_pixels = 0;
  bool exact = true;
};

/// Chroma is shifted by +0.5 so that every LP variable is nonnegative.
inline constexpr double kChromaShift = 0.5;

/// Penalty mode: A = [F; lambda E_S], b = [0; lambda (U_o + 0.5)], variables
/// (U', nu, mu). Exact mode eliminates the scribbled variables and drops the
/// penalty block.
L1Assembly assemble_l1_problem(const SparseMatrix& f, const ChannelSites& sites, double lambda, bool exact);

/// sum_i |g_i . U| + lambda sum_{i in S} |U(i) - U_o(i)|
double j1_objective(const SparseMatrix& f, const Plane& u, const ChannelSites& sites, double lambda);

ColorizeResult colorize(const Plane& y, const ScribbleSet& scribbles, const ColorizeParams& params);

/// Components of the graph joining pixels with nonzero filter coefficients
/// that contain none of `anchors`.
int count_unanchored_components(const SparseMatrix& f, std::span<const int> anchors);

struct Metrics {
  double mae_u = 0.0, mae_v = 0.0;
  double rmse_u = 0.0, rmse_v = 0.0;
  /// Peak-to-peak chroma range is 1; identical planes give +infinity.
  double psnr_u = 0.0, psnr_v = 0.0;
  double psnr = 0.0;  ///< over both channels
};

Metrics evaluate(const ColorizeResult& result, const YUVImage& reference);

enum class ScribblePattern { uniform_random, grid };
ScribblePattern parse_pattern(std::string_view s);

/// Deterministic choice of `count` sites whose chroma is copied from `original`.
ScribbleSet sample_scribbles(const YUVImage& original, int count, std::uint64_t seed, ScribblePattern pattern);

}  // namespace l1c
