#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace quad {

/// Ground profile queried by foothold planning and contact resolution.
/// kind: flat | slope | heightfield.
struct Terrain {
  enum class Kind { Flat, Slope, Heightfield };

  Kind kind = Kind::Flat;

  // slope: inclination about the given horizontal axis (0 = pitch about y,
  // rising along +x; 1 = roll about x, rising along +y)
  double slope_deg = 0.0;
  int slope_axis = 0;

  // heightfield: row-major grid centered at the origin
  double cell_size = 0.1;      // m
  int rows = 0, cols = 0;
  std::vector<double> heights; // m, rows*cols
  double height_range = 0.0;   // m, max |height|, for reporting

  static Terrain flat() { return Terrain{}; }

  static Terrain slope(double angle_deg, int axis = 0) {
    if (std::abs(angle_deg) >= 45.0)
      throw std::invalid_argument("Terrain: |slope| must be < 45 deg");
    Terrain t;
    t.kind = Kind::Slope;
    t.slope_deg = angle_deg;
    t.slope_axis = axis;
    return t;
  }

  static Terrain heightfield(double cell, int rows, int cols, std::vector<double> h) {
    if (static_cast<int>(h.size()) != rows * cols)
      throw std::invalid_argument("Terrain: heightfield size mismatch");
    Terrain t;
    t.kind = Kind::Heightfield;
    t.cell_size = cell;
    t.rows = rows;
    t.cols = cols;
    t.heights = std::move(h);
    double lo = 0.0, hi = 0.0;
    for (double v : t.heights) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    t.height_range = hi - lo;
    return t;
  }

  /// Load a heightfield from a plain-text grid file (row-major, meters).
  static Terrain heightfield_from_file(const std::string& path, double cell);

  double height(double x, double y) const {
    switch (kind) {
      case Kind::Flat:
        return 0.0;
      case Kind::Slope: {
        const double t = std::tan(slope_deg * M_PI / 180.0);
        return slope_axis == 0 ? t * x : t * y;
      }
      case Kind::Heightfield: {
        // bilinear interpolation, grid centered at origin, flat outside
        const double gx = x / cell_size + 0.5 * (cols - 1);
        const double gy = y / cell_size + 0.5 * (rows - 1);
        if (gx < 0.0 || gy < 0.0 || gx > cols - 1 || gy > rows - 1) return 0.0;
        const int i0 = std::min(static_cast<int>(gy), rows - 2 >= 0 ? rows - 2 : 0);
        const int j0 = std::min(static_cast<int>(gx), cols - 2 >= 0 ? cols - 2 : 0);
        const double fy = gy - i0, fx = gx - j0;
        auto at = [&](int i, int j) { return heights[i * cols + j]; };
        if (rows == 1 && cols == 1) return at(0, 0);
        if (rows == 1) return at(0, j0) * (1 - fx) + at(0, j0 + 1) * fx;
        if (cols == 1) return at(i0, 0) * (1 - fy) + at(i0 + 1, 0) * fy;
        return at(i0, j0) * (1 - fx) * (1 - fy) + at(i0, j0 + 1) * fx * (1 - fy) +
               at(i0 + 1, j0) * (1 - fx) * fy + at(i0 + 1, j0 + 1) * fx * fy;
      }
    }
    return 0.0;
  }
};

}  // namespace quad
