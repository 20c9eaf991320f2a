#pragma once

// Tikhonov subproblem machinery: fast solves of the normal equations
//   (A' Dw^2 A + C K) g = A' Dw^2 u,     K = D'D + E'E,
// the discrepancy-principle search for the per-geometry constant C, and the
// global constant taken as the maximum over the parameter box.

#include <utility>

#include <Eigen/Dense>

#include "slipinv/box.hpp"
#include "slipinv/discretization.hpp"
#include "slipinv/forward.hpp"

namespace slipinv {

struct TikhonovSolution {
  SlipVector g;
  double C = 0.0;
  double weighted_misfit = 0.0;  // ||Dw (A g - u)||
  double penalty = 0.0;          // ||D g||^2 + ||E g||^2
};

// Per-geometry solver.  One O(q^2 3N) setup diagonalizes the data-space
// matrix M = B K^-1 B', B = Dw A; afterwards misfit, penalty, and objective
// at any C cost O(3N) and a full slip solve costs O(q 3N).  This is what
// makes the C search and the posterior sweep affordable.
class CellSolver {
 public:
  CellSolver(const ForwardSystem& system, const DifferenceOperators& ops,
             const Eigen::VectorXd& u);

  const ForwardSystem& system() const { return *sys_; }

  double misfit(double C) const;     // ||Dw (A g_C - u)||, increasing in C
  double penalty(double C) const;    // decreasing in C
  double objective(double C) const;  // misfit^2 + C * penalty
  SlipVector solve_slip(double C) const;

  // Range endpoints of the misfit: ||Dw(u - v)|| with v the weighted
  // projection of u onto the range of A, and ||Dw u||.
  double lower_endpoint() const { return lower_; }
  double upper_endpoint() const { return upper_; }

  // Diagonal of (A' Dw^2 A + C K)^-1, the fixed-geometry slip covariance.
  Eigen::VectorXd cov_diagonal(double C) const;

 private:
  void require_positive(double C) const;

  const ForwardSystem* sys_;
  const DifferenceOperators* ops_;
  Eigen::MatrixXd Tt_;   // K^-1 B', q x 3N
  Eigen::MatrixXd Q_;    // eigenvectors of M
  Eigen::VectorXd lam_;  // eigenvalues of M, clamped at zero
  Eigen::VectorXd z_;    // Q' Dw u
  double lower_ = 0.0;
  double upper_ = 0.0;
};

// One-shot wrappers over CellSolver.
TikhonovSolution solve(const ForwardSystem& system,
                       const DifferenceOperators& ops,
                       const Eigen::VectorXd& u, double C);
std::pair<double, double> misfit_endpoints(const ForwardSystem& system,
                                           const Eigen::VectorXd& u);

// Largest C whose misfit still meets err_target, by bisection in log C over
// [1e-12, 1e6]; returns 0 when even the unregularized misfit exceeds the
// target.  err_target is absolute, in the weighted norm.
double select_C_cell(const CellSolver& cell, double err_target,
                     double rtol = 1e-3, int max_iter = 60);
double select_C_cell(const ForwardSystem& system,
                     const DifferenceOperators& ops, const Eigen::VectorXd& u,
                     double err_target);

struct CSelection {
  Eigen::VectorXd per_cell_C;  // NaN marks cells skipped by the depth guard
  double global_C = 0.0;
  double err_target = 0.0;  // absolute, weighted norm
  int n_skipped = 0;
};

// Run the discrepancy search on every cell of the box and take the maximum.
// err_rel is relative to ||Dw u||.  Cells whose plane violates the depth
// guard (or has no defined rake) are skipped with a summary warning; other
// per-cell failures abort with the cell index attached.
CSelection select_C_global(const ParameterBox& box, const FaultGrid& grid,
                           const StationSet& stations,
                           const ElasticMedium& medium,
                           const DifferenceOperators& ops, double err_rel,
                           double depth_guard_km = kDefaultDepthGuardKm);

}  // namespace slipinv
