#pragma once

#include <vector>

#include "l1c/plane.hpp"
#include "l1c/sparse_matrix.hpp"

namespace l1c {

enum class WeightKind {
  /// exp(-(Y(r)-Y(s))^2 / (2 sigma_r^2))
  gaussian,
  /// max(eps, 1 + (Y(r)-mu_r)(Y(s)-mu_r) / sigma_r^2)
  correlation,
};

struct FilterConfig {
  int window_radius = 1;
  WeightKind weight_kind = WeightKind::correlation;
  double sigma_floor = 1e-4;

  void validate() const;
};

inline constexpr double kCorrelationFloor = 1e-6;

struct NeighborWeight {
  int index;
  double weight;
};

/// In-bounds pixels of the (2r+1)^2 window around `pixel`, excluding the
/// pixel itself, in raster order. Borders truncate the window.
std::vector<int> neighborhood(int pixel, int width, int height, int radius);

/// Normalized luminance affinities of `pixel` to its neighborhood; the
/// weights sum to one.
std::vector<NeighborWeight> affinity_weights(const Plane& y, int pixel, const FilterConfig& cfg);

/// response(r) = U(r) - sum_s w_rs U(s)
Plane apply_filter(const Plane& y, const Plane& u, const FilterConfig& cfg);

/// Square matrix whose row i is the filter at pixel i: 1 on the diagonal,
/// -w_is on each neighbor column.
SparseMatrix build_filter_matrix(const Plane& y, const FilterConfig& cfg);

}  // namespace l1c
