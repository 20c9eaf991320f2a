#include "slipinv/posterior.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <sstream>

namespace slipinv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925286766559;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) {
    throw ConfigError(std::string(what) + " must be positive");
  }
}

// F(m) and the tau-free determinant base from a prepared cell solver.
std::pair<double, double> cell_terms(const CellSolver& cell, double C) {
  const ForwardSystem& sys = cell.system();
  const double F = cell.objective(C);
  double det = 0.0;
  for (int j = 0; j < sys.mu.size(); ++j) {
    det += std::log((sys.mu(j) * sys.mu(j) + C) / kTwoPi);
  }
  det += (sys.q() - static_cast<int>(sys.mu.size())) * std::log(C / kTwoPi);
  return {F, det};
}

double log_density_from_terms(double F, double det_base, int q, double tau) {
  return -0.5 * tau * F - 0.5 * (q * std::log(tau) + det_base);
}

Eigen::VectorXd axis_weights(double lo, double hi, int n) {
  Eigen::VectorXd w(n);
  if (n == 1) {
    w(0) = (hi > lo) ? (hi - lo) : 1.0;
    return w;
  }
  const double h = (hi - lo) / (n - 1);
  w.setConstant(h);
  w(0) = w(n - 1) = 0.5 * h;
  return w;
}

struct TrapezoidWeights {
  Eigen::VectorXd wa, wb, wd;

  explicit TrapezoidWeights(const ParameterBox& box)
      : wa(axis_weights(box.a_min, box.a_max, box.n_a)),
        wb(axis_weights(box.b_min, box.b_max, box.n_b)),
        wd(axis_weights(box.d_min, box.d_max, box.n_d)) {}

  double cell(const ParameterBox& box, int idx) const {
    const int ia = idx / (box.n_b * box.n_d);
    const int ib = (idx / box.n_d) % box.n_b;
    const int id = idx % box.n_d;
    return wa(ia) * wb(ib) * wd(id);
  }
};

// log(sum_i exp(lw_i)) over the entries selected by `take`.
template <typename Pred>
double log_sum_exp(const ParameterBox& box, const Eigen::VectorXd& log_rho,
                   const TrapezoidWeights& tw, Pred take) {
  double peak = kNegInf;
  for (int i = 0; i < log_rho.size(); ++i) {
    if (take(i) && log_rho(i) > peak) peak = log_rho(i);
  }
  if (peak == kNegInf) return kNegInf;
  double acc = 0.0;
  for (int i = 0; i < log_rho.size(); ++i) {
    if (take(i) && log_rho(i) > kNegInf) {
      acc += tw.cell(box, i) * std::exp(log_rho(i) - peak);
    }
  }
  return peak + std::log(acc);
}

void normalize(PosteriorGrid& pg) {
  const TrapezoidWeights tw(pg.box);
  const double peak = pg.log_density.maxCoeff();
  if (peak == kNegInf) {
    throw ConfigError("no valid cell in the parameter box: every plane "
                      "violates the depth guard");
  }
  const int n = static_cast<int>(pg.log_density.size());
  pg.density.resize(n);
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    pg.density(i) =
        pg.log_density(i) > kNegInf ? std::exp(pg.log_density(i) - peak) : 0.0;
    integral += tw.cell(pg.box, i) * pg.density(i);
  }
  pg.density /= integral;
  pg.log_normalizer = peak + std::log(integral);
}

}  // namespace

double log_density_cell(const ForwardSystem& system,
                        const DifferenceOperators& ops,
                        const Eigen::VectorXd& u, double C, double tau) {
  require_positive(C, "regularization constant");
  require_positive(tau, "tau");
  const CellSolver cell(system, ops, u);
  const auto [F, det] = cell_terms(cell, C);
  return log_density_from_terms(F, det, system.q(), tau);
}

PosteriorGrid sweep(const ParameterBox& box, const FaultGrid& grid,
                    const StationSet& stations, const ElasticMedium& medium,
                    const DifferenceOperators& ops, double C, double tau,
                    double depth_guard_km) {
  box.validate();
  stations.validate();
  require_positive(C, "regularization constant");
  require_positive(tau, "tau");
  if (stations.measured_u.size() != 3 * stations.n()) {
    throw ConfigError("station set carries no measured displacements");
  }

  PosteriorGrid pg;
  pg.box = box;
  pg.global_C = C;
  pg.tau = tau;
  pg.q = grid.q();
  const int n_cells = box.size();
  pg.log_density.setConstant(n_cells, kNegInf);
  pg.objective.setConstant(n_cells,
                           std::numeric_limits<double>::quiet_NaN());
  pg.det_base.setConstant(n_cells,
                          std::numeric_limits<double>::quiet_NaN());

  int first_invalid = -1;
  bool failed = false;
  std::string fail_msg;

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
      const auto [F, det] = cell_terms(cell, C);
      pg.objective(idx) = F;
      pg.det_base(idx) = det;
      pg.log_density(idx) = log_density_from_terms(F, det, pg.q, tau);
    } catch (const ConfigError&) {
#pragma omp critical
      {
        ++pg.n_invalid;
        if (first_invalid < 0) first_invalid = idx;
      }
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!failed) {
          failed = true;
          fail_msg = "posterior sweep failed at box cell " +
                     std::to_string(idx) + ": " + e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError(fail_msg);

  if (pg.n_invalid > 0) {
    std::ostringstream msg;
    msg << "assigned zero density to " << pg.n_invalid << " of " << n_cells
        << " box cells (first: index " << first_invalid
        << ") whose plane violates the depth guard or has no rake";
    warn(msg.str());
  }
  normalize(pg);
  return pg;
}

PosteriorGrid reweight(const PosteriorGrid& pg, double tau) {
  require_positive(tau, "tau");
  PosteriorGrid out = pg;
  out.tau = tau;
  for (int i = 0; i < out.log_density.size(); ++i) {
    out.log_density(i) =
        std::isnan(pg.objective(i))
            ? kNegInf
            : log_density_from_terms(pg.objective(i), pg.det_base(i), pg.q,
                                     tau);
  }
  normalize(out);
  return out;
}

Marginals marginals(const PosteriorGrid& pg) {
  const TrapezoidWeights tw(pg.box);
  const ParameterBox& box = pg.box;
  Marginals m;
  m.a.values.resize(box.n_a);
  m.a.density.setZero(box.n_a);
  m.b.values.resize(box.n_b);
  m.b.density.setZero(box.n_b);
  m.d.values.resize(box.n_d);
  m.d.density.setZero(box.n_d);
  for (int ia = 0; ia < box.n_a; ++ia) m.a.values(ia) = box.value_a(ia);
  for (int ib = 0; ib < box.n_b; ++ib) m.b.values(ib) = box.value_b(ib);
  for (int id = 0; id < box.n_d; ++id) m.d.values(id) = box.value_d(id);
  for (int ia = 0; ia < box.n_a; ++ia) {
    for (int ib = 0; ib < box.n_b; ++ib) {
      for (int id = 0; id < box.n_d; ++id) {
        const double rho = pg.density(box.index(ia, ib, id));
        m.a.density(ia) += tw.wb(ib) * tw.wd(id) * rho;
        m.b.density(ib) += tw.wa(ia) * tw.wd(id) * rho;
        m.d.density(id) += tw.wa(ia) * tw.wb(ib) * rho;
      }
    }
  }
  return m;
}

std::pair<double, double> marginal_mean_std(const Marginal1D& marginal) {
  const int n = static_cast<int>(marginal.values.size());
  const double lo = marginal.values(0), hi = marginal.values(n - 1);
  const Eigen::VectorXd w = axis_weights(lo, hi, n);
  const double mass = w.dot(marginal.density);
  const double mean = w.dot(marginal.values.cwiseProduct(marginal.density)) /
                      mass;
  const double second =
      w.dot(marginal.values.array().square().matrix().cwiseProduct(
          marginal.density)) /
      mass;
  return {mean, std::sqrt(std::max(0.0, second - mean * mean))};
}

MapEstimate map_estimate(const PosteriorGrid& pg) {
  const ParameterBox& box = pg.box;
  int best = 0;
  pg.log_density.maxCoeff(&best);
  MapEstimate est;
  est.cell = {best / (box.n_b * box.n_d), (best / box.n_d) % box.n_b,
              best % box.n_d};
  est.m = box.cell(est.cell(0), est.cell(1), est.cell(2));
  est.log_density = pg.log_density(best);
  est.refined = est.m;

  // One-axis parabola through the log density; only refine interior peaks
  // with finite neighbors, and never move beyond half a cell.
  const auto refine = [&](int axis, int n, double spacing,
                          double& coord) {
    if (n < 3 || spacing == 0.0) return;
    const int i = est.cell(axis);
    if (i == 0 || i == n - 1) return;
    Eigen::Vector3i lo = est.cell, hi = est.cell;
    lo(axis) -= 1;
    hi(axis) += 1;
    const double fm = pg.log_density(box.index(lo(0), lo(1), lo(2)));
    const double f0 = est.log_density;
    const double fp = pg.log_density(box.index(hi(0), hi(1), hi(2)));
    if (fm == kNegInf || fp == kNegInf) return;
    const double denom = fm - 2.0 * f0 + fp;
    if (denom >= 0.0) return;
    const double shift =
        std::clamp(0.5 * (fm - fp) / denom, -0.5, 0.5);
    coord += shift * spacing;
  };
  refine(0, box.n_a, box.spacing_a(), est.refined.a);
  refine(1, box.n_b, box.spacing_b(), est.refined.b);
  refine(2, box.n_d, box.spacing_d(), est.refined.d);
  return est;
}

ConcentrationReport concentration_experiment(const PosteriorGrid& base,
                                             const GeometryParam& true_m,
                                             int ball_radius_cells,
                                             const std::vector<double>& taus) {
  if (taus.empty()) throw ConfigError("tau list is empty");
  for (size_t i = 0; i < taus.size(); ++i) {
    require_positive(taus[i], "tau");
    if (i > 0 && taus[i] <= taus[i - 1]) {
      throw ConfigError("tau list must be strictly increasing");
    }
  }
  if (ball_radius_cells < 0) {
    throw ConfigError("ball radius must be nonnegative");
  }

  const ParameterBox& box = base.box;
  const TrapezoidWeights tw(box);
  const Eigen::Vector3i center = box.nearest_cell(true_m);
  const auto outside = [&](int idx) {
    const int ia = idx / (box.n_b * box.n_d);
    const int ib = (idx / box.n_d) % box.n_b;
    const int id = idx % box.n_d;
    const int cheb = std::max({std::abs(ia - center(0)),
                               std::abs(ib - center(1)),
                               std::abs(id - center(2))});
    return cheb > ball_radius_cells;
  };

  ConcentrationReport report;
  report.taus = taus;
  for (const double tau : taus) {
    Eigen::VectorXd lr(base.log_density.size());
    for (int i = 0; i < lr.size(); ++i) {
      lr(i) = std::isnan(base.objective(i))
                  ? kNegInf
                  : log_density_from_terms(base.objective(i),
                                           base.det_base(i), base.q, tau);
    }
    const double log_all =
        log_sum_exp(box, lr, tw, [](int) { return true; });
    const double log_out = log_sum_exp(box, lr, tw, outside);
    const double log_mass = log_out - log_all;
    report.log_outside_mass.push_back(log_mass);
    report.outside_mass.push_back(std::exp(log_mass));
  }
  return report;
}

SlipPosterior slip_posterior(const ForwardSystem& system,
                             const DifferenceOperators& ops,
                             const Eigen::VectorXd& u, double C) {
  require_positive(C, "regularization constant");
  const CellSolver cell(system, ops, u);
  SlipPosterior post;
  post.mean = cell.solve_slip(C);
  const Eigen::VectorXd var = cell.cov_diagonal(C);
  if (!(var.minCoeff() > 0.0)) {
    throw NumericalError("slip covariance diagonal lost positivity; C is too "
                         "small for the data scale");
  }
  post.node_std = var.cwiseSqrt();
  return post;
}

}  // namespace slipinv
