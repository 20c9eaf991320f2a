#pragma once

// Marginal posterior of the fault geometry: the slip field is integrated out
// in closed form, leaving per-cell log densities over the parameter box,
// from which marginals, the MAP cell, concentration diagnostics, and the
// fixed-geometry Gaussian slip posterior follow.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "slipinv/box.hpp"
#include "slipinv/solver.hpp"

namespace slipinv {

struct PosteriorGrid {
  ParameterBox box;
  double global_C = 0.0;
  double tau = 1.0;
  int q = 0;            // slip nodes, needed for the tau determinant term
  int n_invalid = 0;    // cells zeroed by the depth guard or missing rake

  Eigen::VectorXd log_density;  // unnormalized; -inf on invalid cells
  Eigen::VectorXd density;      // normalized: trapezoid integral over B = 1
  double log_normalizer = 0.0;  // log of the trapezoid integral of exp(log_density)

  // Per-cell caches that do not depend on tau, kept so other tau values can
  // be evaluated without re-assembling anything: the Tikhonov objective
  // F(m) and the determinant base sum_j log((mu_j^2 + C)/2pi).
  Eigen::VectorXd objective;
  Eigen::VectorXd det_base;

  double normalizer() const { return std::exp(log_normalizer); }
};

struct Marginal1D {
  Eigen::VectorXd values;
  Eigen::VectorXd density;
};

struct Marginals {
  Marginal1D a, b, d;
};

struct MapEstimate {
  Eigen::Vector3i cell;  // (ia, ib, id)
  GeometryParam m;       // grid-point value
  GeometryParam refined; // quadratic refinement of the peak, diagnostic only
  double log_density = 0.0;
};

struct SlipPosterior {
  SlipVector mean;
  Eigen::VectorXd node_std;  // mm
};

struct ConcentrationReport {
  std::vector<double> taus;
  std::vector<double> log_outside_mass;
  std::vector<double> outside_mass;  // exp of the above; may underflow to 0
};

// Log of the unnormalized marginal density at one geometry.  All terms stay
// in the log domain; the determinant uses the q-padded singular values of
// the weighted operator.
double log_density_cell(const ForwardSystem& system,
                        const DifferenceOperators& ops,
                        const Eigen::VectorXd& u, double C, double tau);

// Evaluate the density over every cell of the box.  Cells whose plane
// violates the depth guard or has no rake get zero density (log = -inf) and
// a summary warning; the grid is normalized by the 3-D trapezoid rule after
// subtracting the max log density.
PosteriorGrid sweep(const ParameterBox& box, const FaultGrid& grid,
                    const StationSet& stations, const ElasticMedium& medium,
                    const DifferenceOperators& ops, double C,
                    double tau = 1.0,
                    double depth_guard_km = kDefaultDepthGuardKm);

// Re-evaluate a swept grid at a different tau using the cached objective and
// determinant terms; no reassembly.
PosteriorGrid reweight(const PosteriorGrid& pg, double tau);

Marginals marginals(const PosteriorGrid& pg);

// Mean and standard deviation of a 1-D marginal (trapezoid moments).
std::pair<double, double> marginal_mean_std(const Marginal1D& marginal);

MapEstimate map_estimate(const PosteriorGrid& pg);

// Posterior mass outside the Chebyshev ball of the given cell radius around
// the true geometry, for each tau in an increasing list, computed in the log
// domain from one sweep's caches.
ConcentrationReport concentration_experiment(const PosteriorGrid& base,
                                             const GeometryParam& true_m,
                                             int ball_radius_cells,
                                             const std::vector<double>& taus);

// Gaussian slip posterior at a fixed geometry: mean is the Tikhonov
// minimizer, node variances are the diagonal of (A'Dw^2 A + C K)^-1.
SlipPosterior slip_posterior(const ForwardSystem& system,
                             const DifferenceOperators& ops,
                             const Eigen::VectorXd& u, double C);

}  // namespace slipinv
