#pragma once

#include <cstddef>
#include <vector>

namespace l1c {

/// Single-channel raster of doubles, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return samples.size(); }
  int index(int x, int y) const { return y * width + x; }

  double& at(int x, int y) { return samples[static_cast<std::size_t>(index(x, y))]; }
  double at(int x, int y) const { return samples[static_cast<std::size_t>(index(x, y))]; }

  double& operator[](std::size_t i) { return samples[i]; }
  double operator[](std::size_t i) const { return samples[i]; }

  bool same_shape(const Plane& other) const {
    return width == other.width && height == other.height;
  }
};

}  // namespace l1c
