#include "slipinv/solver.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace slipinv {

namespace {

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

}  // namespace

CellSolver::CellSolver(const ForwardSystem& system,
                       const DifferenceOperators& ops,
                       const Eigen::VectorXd& u)
    : sys_(&system), ops_(&ops) {
  if (u.size() != system.n_data()) {
    throw ConfigError("data vector length does not match 3N");
  }
  if (ops.K_inv.rows() != system.q()) {
    throw ConfigError("difference operators do not match the grid size");
  }
  const Eigen::VectorXd w = system.weight(u);
  const Eigen::MatrixXd B = system.dw.asDiagonal() * system.A;
  Tt_ = ops.K_inv * B.transpose();
  const Eigen::MatrixXd M = B * Tt_;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of the data-space matrix failed");
  }
  Q_ = eig.eigenvectors();
  lam_ = eig.eigenvalues().cwiseMax(0.0);
  z_ = Q_.transpose() * w;

  upper_ = w.norm();
  lower_ = (w - sys_->U * (sys_->U.transpose() * w)).norm();
}

void CellSolver::require_positive(double C) const {
  if (!(C > 0.0)) {
    throw ConfigError("regularization constant must be positive");
  }
}

double CellSolver::misfit(double C) const {
  require_positive(C);
  // Dw(A g_C - u) = -C (C I + M)^-1 w in the eigenbasis of M.
  return C * (z_.array() / (lam_.array() + C)).matrix().norm();
}

double CellSolver::penalty(double C) const {
  require_positive(C);
  return (lam_.array() * (z_.array() / (lam_.array() + C)).square()).sum();
}

double CellSolver::objective(double C) const {
  require_positive(C);
  return C * (z_.array().square() / (lam_.array() + C)).sum();
}

SlipVector CellSolver::solve_slip(double C) const {
  require_positive(C);
  const Eigen::VectorXd y = Q_ * (z_.array() / (lam_.array() + C)).matrix();
  return Tt_ * y;
}

Eigen::VectorXd CellSolver::cov_diagonal(double C) const {
  require_positive(C);
  // (B'B + C K)^-1 = (K_inv - Tt (C I + M)^-1 Tt') / C, so each diagonal
  // entry needs only the squared column norm of (C I + M)^-1/2 Tt'.
  const Eigen::MatrixXd Wq =
      (lam_.array() + C).rsqrt().matrix().asDiagonal() *
      (Q_.transpose() * Tt_.transpose());
  return (ops_->K_inv.diagonal() - Wq.colwise().squaredNorm().transpose()) /
         C;
}

TikhonovSolution solve(const ForwardSystem& system,
                       const DifferenceOperators& ops,
                       const Eigen::VectorXd& u, double C) {
  const CellSolver cell(system, ops, u);
  TikhonovSolution sol;
  sol.g = cell.solve_slip(C);
  sol.C = C;
  sol.weighted_misfit = cell.misfit(C);
  sol.penalty = cell.penalty(C);
  return sol;
}

std::pair<double, double> misfit_endpoints(const ForwardSystem& system,
                                           const Eigen::VectorXd& u) {
  const Eigen::VectorXd w = system.weight(u);
  const double lower = (w - system.U * (system.U.transpose() * w)).norm();
  return {lower, w.norm()};
}

double select_C_cell(const CellSolver& cell, double err_target, double rtol,
                     int max_iter) {
  const double upper = cell.upper_endpoint();
  if (!(err_target > 0.0) || !(err_target < upper)) {
    std::ostringstream msg;
    msg << "err target " << err_target << " is outside (0, " << upper
        << "), the attainable misfit range";
    throw ConfigError(msg.str());
  }
  if (err_target <= cell.lower_endpoint()) return 0.0;

  double lo = -12.0, hi = 6.0;
  if (cell.misfit(std::pow(10.0, hi)) < err_target) {
    warn("discrepancy search exhausted its bracket; returning C = 1e6");
    return std::pow(10.0, hi);
  }
  if (cell.misfit(std::pow(10.0, lo)) > err_target) {
    warn("discrepancy root lies below C = 1e-12; returning the bracket "
         "bottom");
    return std::pow(10.0, lo);
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = cell.misfit(std::pow(10.0, mid));
    if (std::abs(f - err_target) <= rtol * err_target) break;
    if (f < err_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::pow(10.0, mid);
}

double select_C_cell(const ForwardSystem& system,
                     const DifferenceOperators& ops, const Eigen::VectorXd& u,
                     double err_target) {
  return select_C_cell(CellSolver(system, ops, u), err_target);
}

CSelection select_C_global(const ParameterBox& box, const FaultGrid& grid,
                           const StationSet& stations,
                           const ElasticMedium& medium,
                           const DifferenceOperators& ops, double err_rel,
                           double depth_guard_km) {
  box.validate();
  stations.validate();
  if (stations.measured_u.size() != 3 * stations.n()) {
    throw ConfigError("station set carries no measured displacements");
  }
  if (!(err_rel > 0.0) || !(err_rel < 1.0)) {
    throw ConfigError("relative err target must lie in (0, 1)");
  }

  CSelection sel;
  Eigen::VectorXd dw(3 * stations.n());
  for (int j = 0; j < stations.n(); ++j) {
    dw(3 * j + 0) = 1.0 / stations.sigma_hor(j);
    dw(3 * j + 1) = 1.0 / stations.sigma_hor(j);
    dw(3 * j + 2) = 1.0 / stations.sigma_ver(j);
  }
  sel.err_target = err_rel * dw.cwiseProduct(stations.measured_u).norm();

  const int n_cells = box.size();
  sel.per_cell_C.setConstant(n_cells,
                             std::numeric_limits<double>::quiet_NaN());
  int first_skipped = -1;
  bool failed = false;
  std::string fail_msg;

  // Exceptions must not cross the parallel region; hard failures are
  // recorded and rethrown afterwards, guard violations just skip the cell.
#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < n_cells; ++idx) {
    if (failed) continue;
    const int ia = idx / (box.n_b * box.n_d);
    const int ib = (idx / box.n_d) % box.n_b;
    const int id = idx % box.n_d;
    try {
      const ForwardSystem sys = assemble(box.cell(ia, ib, id), grid, stations,
                                         medium, depth_guard_km);
      const CellSolver cell(sys, ops, stations.measured_u);
      sel.per_cell_C(idx) = select_C_cell(cell, sel.err_target);
    } catch (const ConfigError&) {
#pragma omp critical
      {
        if (first_skipped < 0) first_skipped = idx;
      }
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!failed) {
          failed = true;
          fail_msg = "C selection failed at box cell " + std::to_string(idx) +
                     ": " + e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError(fail_msg);

  sel.global_C = 0.0;
  int n_valid = 0;
  for (int i = 0; i < n_cells; ++i) {
    if (std::isnan(sel.per_cell_C(i))) {
      ++sel.n_skipped;
    } else {
      ++n_valid;
      sel.global_C = std::max(sel.global_C, sel.per_cell_C(i));
    }
  }
  if (n_valid == 0) {
    throw ConfigError("every cell of the parameter box violates the depth "
                      "guard; nothing to select C from");
  }
  if (sel.n_skipped > 0) {
    std::ostringstream msg;
    msg << "skipped " << sel.n_skipped << " of " << n_cells
        << " box cells (first: index " << first_skipped
        << ") whose plane violates the depth guard or has no rake";
    warn(msg.str());
  }
  return sel;
}

}  // namespace slipinv
