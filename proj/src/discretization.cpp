// Grid, difference operators, rake, and quadrature weights.
#include "slipinv/discretization.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>

namespace slipinv {

FaultGrid build_grid(const Vec2& center, const Vec2& half_lengths, int n_side,
                     const Rake& rake) {
  if (!(half_lengths(0) > 0.0) || !(half_lengths(1) > 0.0)) {
    throw ConfigError("fault grid half_lengths must be positive");
  }
  if (n_side < 1) {
    throw ConfigError("fault grid needs n_side >= 1");
  }
  FaultGrid grid;
  grid.center = center;
  grid.half_lengths = half_lengths;
  grid.n_side = n_side;
  grid.spacing = 2.0 * half_lengths / (n_side + 1);
  grid.rake = rake;
  return grid;
}

DifferenceOperators build_difference_ops(const FaultGrid& grid) {
  const int n = grid.n_side, q = grid.q();
  DifferenceOperators ops;
  std::vector<Eigen::Triplet<double>> dtrip, etrip;
  dtrip.reserve(2 * q);
  etrip.reserve(2 * q);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const int k = grid.node_index(ix, iy);
      dtrip.emplace_back(k, k, 1.0);
      etrip.emplace_back(k, k, 1.0);
      // D = I - S with S the shift toward smaller x1 (zero past the
      // boundary); E likewise in x2.  S is nilpotent with norm 1.
      if (ix > 0) dtrip.emplace_back(k, grid.node_index(ix - 1, iy), -1.0);
      if (iy > 0) etrip.emplace_back(k, grid.node_index(ix, iy - 1), -1.0);
    }
  }
  ops.D.resize(q, q);
  ops.E.resize(q, q);
  ops.D.setFromTriplets(dtrip.begin(), dtrip.end());
  ops.E.setFromTriplets(etrip.begin(), etrip.end());

  Eigen::MatrixXd K = Eigen::MatrixXd(ops.D.transpose() * ops.D) +
                      Eigen::MatrixXd(ops.E.transpose() * ops.E);
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("failed to factor D'D + E'E (should be SPD)");
  }
  ops.K_inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  return ops;
}

Vec3 rake_direction(const FaultGrid& grid, const GeometryParam& m,
                    int /*node*/) {
  const double slope2 = m.a * m.a + m.b * m.b;
  if (slope2 == 0.0) {
    throw ConfigError("rake undefined on horizontal plane (a = b = 0)");
  }
  const Vec3 ascent =
      Vec3(-m.a, -m.b, -slope2) / std::sqrt(slope2 * (1.0 + slope2));
  if (grid.rake.mode == RakeMode::SteepestAscent ||
      grid.rake.angle_rad == 0.0) {
    return ascent;
  }
  // Rodrigues rotation about the unit normal keeps the result tangential.
  const Vec3 n = m.normal();
  const double c = std::cos(grid.rake.angle_rad);
  const double s = std::sin(grid.rake.angle_rad);
  return (c * ascent + s * n.cross(ascent)).normalized();
}

QuadratureWeights quadrature_weights(const FaultGrid& grid,
                                     const GeometryParam& m, int n_stations) {
  if (n_stations < 1) {
    throw ConfigError("quadrature weights need at least one station");
  }
  QuadratureWeights w;
  w.station_weights = Eigen::VectorXd::Ones(n_stations);
  w.patch_weight = grid.spacing(0) * grid.spacing(1) *
                   std::sqrt(1.0 + m.a * m.a + m.b * m.b);
  return w;
}

Vec2 weighted_center(const Eigen::MatrixX2d& positions,
                     const Eigen::VectorXd& weights) {
  if (positions.rows() == 0 || positions.rows() != weights.size()) {
    throw ConfigError("weighted_center needs matching non-empty positions "
                      "and weights");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) {
    throw ConfigError("weighted_center needs positive total weight");
  }
  return (positions.transpose() * weights) / total;
}

}  // namespace slipinv
