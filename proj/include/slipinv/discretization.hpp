// Slip rectangle discretization: regular interior node grid, first-difference
// operators with implicit zero boundary, quadrature weights, and the rake
// (slip-direction) convention.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "slipinv/elastic.hpp"
#include "slipinv/errors.hpp"

namespace slipinv {

using SlipVector = Eigen::VectorXd;  // length q, mm, along the rake

enum class RakeMode { SteepestAscent, FixedAngle };

// Slip direction convention on the fault plane; FixedAngle rotates the
// steepest-ascent direction by angle_rad about the fault normal.
struct Rake {
  RakeMode mode = RakeMode::SteepestAscent;
  double angle_rad = 0.0;

  static Rake steepest() { return {RakeMode::SteepestAscent, 0.0}; }
  static Rake fixed(double angle_rad) {
    return {RakeMode::FixedAngle, angle_rad};
  }
};

// Rectangle R with an n_side x n_side grid of interior nodes; slip is
// implicitly zero on the boundary, so only interior nodes carry unknowns.
struct FaultGrid {
  Vec2 center = Vec2::Zero();
  Vec2 half_lengths = Vec2::Zero();
  int n_side = 0;
  Vec2 spacing = Vec2::Zero();  // derived: 2*half_lengths / (n_side + 1)
  Rake rake;

  int q() const { return n_side * n_side; }
  // Row-major ordering, x1 fastest: k = iy * n_side + ix.
  int node_index(int ix, int iy) const { return iy * n_side + ix; }
  Vec2 node_coord(int k) const {
    const int ix = k % n_side, iy = k / n_side;
    return {center(0) - half_lengths(0) + (ix + 1) * spacing(0),
            center(1) - half_lengths(1) + (iy + 1) * spacing(1)};
  }
};

// First-difference operators D (along x1) and E (along x2) with entries +-1
// and implicit zero Dirichlet boundary, plus the cached inverse of
// K = D'D + E'E.  The grid-spacing factor is deliberately absorbed into the
// regularization constant, keeping ||D|| <= 2 and ||D^-1|| <= sqrt(q).
struct DifferenceOperators {
  Eigen::SparseMatrix<double> D;
  Eigen::SparseMatrix<double> E;
  Eigen::MatrixXd K_inv;

  double penalty(const SlipVector& g) const {
    return (D * g).squaredNorm() + (E * g).squaredNorm();
  }
  Eigen::VectorXd apply_K(const SlipVector& g) const {
    return D.transpose() * (D * g) + E.transpose() * (E * g);
  }
};

// Per-station quadrature weights C'(j,N) and the per-node patch weight
// (cell area times the plane Jacobian sqrt(1+a^2+b^2)).
struct QuadratureWeights {
  Eigen::VectorXd station_weights;  // all 1 by design; kept explicit
  double patch_weight = 0.0;        // km^2
};

FaultGrid build_grid(const Vec2& center, const Vec2& half_lengths, int n_side,
                     const Rake& rake);

DifferenceOperators build_difference_ops(const FaultGrid& grid);

// Unit slip direction on the plane of m.  The steepest-ascent convention is
// the tangent (-a, -b, -(a^2+b^2))/norm; FixedAngle rotates it about the
// fault normal.  The node argument is accepted for interface uniformity; the
// direction is constant on a planar fault.
Vec3 rake_direction(const FaultGrid& grid, const GeometryParam& m,
                    int node = 0);

QuadratureWeights quadrature_weights(const FaultGrid& grid,
                                     const GeometryParam& m, int n_stations);

// Helper for centering R: mean of station positions weighted by |u|.
Vec2 weighted_center(const Eigen::MatrixX2d& positions,
                     const Eigen::VectorXd& weights);

}  // namespace slipinv
