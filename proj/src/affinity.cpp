#include "l1c/affinity.hpp"

#include <algorithm>
#include <cmath>

#include "l1c/error.hpp"

namespace l1c {

void FilterConfig::validate() const {
  if (window_radius < 1) throw Error(ErrorCode::InvalidArgument, "window_radius must be >= 1");
  if (!(sigma_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_floor must be > 0");
}

std::vector<int> neighborhood(int pixel, int width, int height, int radius) {
  if (width <= 0 || height <= 0 || pixel < 0 || pixel >= width * height) {
    throw Error(ErrorCode::IndexOutOfRange, "neighborhood: pixel index out of range");
  }
  const int px = pixel % width;
  const int py = pixel / width;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1) - 1));
  for (int y = std::max(0, py - radius); y <= std::min(height - 1, py + radius); ++y) {
    for (int x = std::max(0, px - radius); x <= std::min(width - 1, px + radius); ++x) {
      if (x == px && y == py) continue;
      out.push_back(y * width + x);
    }
  }
  return out;
}

std::vector<NeighborWeight> affinity_weights(const Plane& y, int pixel, const FilterConfig& cfg) {
  cfg.validate();
  const auto nbrs = neighborhood(pixel, y.width, y.height, cfg.window_radius);
  if (nbrs.empty()) {
    throw Error(ErrorCode::DegenerateNeighborhood, "affinity_weights: pixel has no neighbors");
  }

  // Window statistics over N(r) and r itself.
  const double center = y[static_cast<std::size_t>(pixel)];
  double mean = center;
  for (int s : nbrs) mean += y[static_cast<std::size_t>(s)];
  const double count = static_cast<double>(nbrs.size() + 1);
  mean /= count;
  double var = (center - mean) * (center - mean);
  for (int s : nbrs) {
    const double d = y[static_cast<std::size_t>(s)] - mean;
    var += d * d;
  }
  var = std::max(var / count, cfg.sigma_floor);

  std::vector<NeighborWeight> out;
  out.reserve(nbrs.size());
  double total = 0.0;
  for (int s : nbrs) {
    const double ys = y[static_cast<std::size_t>(s)];
    double raw = 0.0;
    switch (cfg.weight_kind) {
      case WeightKind::gaussian: {
        const double d = center - ys;
        raw = std::exp(-d * d / (2.0 * var));
        break;
      }
      case WeightKind::correlation:
        raw = std::max(kCorrelationFloor, 1.0 + (center - mean) * (ys - mean) / var);
        break;
    }
    out.push_back({s, raw});
    total += raw;
  }
  for (auto& nw : out) nw.weight /= total;
  return out;
}

Plane apply_filter(const Plane& y, const Plane& u, const FilterConfig& cfg) {
  if (!y.same_shape(u)) throw Error(ErrorCode::DimensionMismatch, "apply_filter: Y and U differ in size");
  if (y.size() < 2) throw Error(ErrorCode::DegenerateImage, "apply_filter: image needs at least 2 pixels");
  Plane out(u.width, u.height);
  for (int r = 0; r < static_cast<int>(u.size()); ++r) {
    double acc = u[static_cast<std::size_t>(r)];
    for (const auto& nw : affinity_weights(y, r, cfg)) acc -= nw.weight * u[static_cast<std::size_t>(nw.index)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

SparseMatrix build_filter_matrix(const Plane& y, const FilterConfig& cfg) {
  if (y.size() < 2) throw Error(ErrorCode::DegenerateImage, "build_filter_matrix: image needs at least 2 pixels");
  const int n = static_cast<int>(y.size());
  SparseMatrix m(0, n);
  std::vector<int> cols;
  std::vector<double> vals;
  for (int r = 0; r < n; ++r) {
    cols.assign(1, r);
    vals.assign(1, 1.0);
    for (const auto& nw : affinity_weights(y, r, cfg)) {
      cols.push_back(nw.index);
      vals.push_back(-nw.weight);
    }
    m.append_row(cols, vals);
  }
  return m;
}

}  // namespace l1c
