#pragma once

// The search box B for the geometry parameters and its regular grid.  Cells
// are indexed with a varying slowest and d fastest.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "slipinv/elastic.hpp"
#include "slipinv/errors.hpp"

namespace slipinv {

struct ParameterBox {
  double a_min = 0, a_max = 0;
  double b_min = 0, b_max = 0;
  double d_min = 0, d_max = 0;
  int n_a = 1, n_b = 1, n_d = 1;

  int size() const { return n_a * n_b * n_d; }
  int index(int ia, int ib, int id) const { return (ia * n_b + ib) * n_d + id; }

  double value_a(int ia) const { return grid_value(a_min, a_max, n_a, ia); }
  double value_b(int ib) const { return grid_value(b_min, b_max, n_b, ib); }
  double value_d(int id) const { return grid_value(d_min, d_max, n_d, id); }

  GeometryParam cell(int ia, int ib, int id) const {
    return {value_a(ia), value_b(ib), value_d(id)};
  }

  double spacing_a() const { return grid_step(a_min, a_max, n_a); }
  double spacing_b() const { return grid_step(b_min, b_max, n_b); }
  double spacing_d() const { return grid_step(d_min, d_max, n_d); }

  // Index of the grid point nearest to m, per axis.
  Eigen::Vector3i nearest_cell(const GeometryParam& m) const {
    return {nearest(a_min, a_max, n_a, m.a), nearest(b_min, b_max, n_b, m.b),
            nearest(d_min, d_max, n_d, m.d)};
  }

  void validate() const {
    if (n_a < 1 || n_b < 1 || n_d < 1) {
      throw ConfigError("parameter box needs at least one cell per axis");
    }
    if (!(a_max >= a_min) || !(b_max >= b_min) || !(d_max >= d_min)) {
      throw ConfigError("parameter box has an empty range");
    }
    if ((n_a > 1 && a_max == a_min) || (n_b > 1 && b_max == b_min) ||
        (n_d > 1 && d_max == d_min)) {
      throw ConfigError(
          "parameter box axis has several cells but zero extent");
    }
  }

 private:
  static double grid_value(double lo, double hi, int n, int i) {
    if (n == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * i / (n - 1);
  }
  static double grid_step(double lo, double hi, int n) {
    return n == 1 ? 0.0 : (hi - lo) / (n - 1);
  }
  static int nearest(double lo, double hi, int n, double v) {
    if (n == 1) return 0;
    const double step = (hi - lo) / (n - 1);
    const int i = static_cast<int>(std::lround((v - lo) / step));
    return std::clamp(i, 0, n - 1);
  }
};

}  // namespace slipinv
