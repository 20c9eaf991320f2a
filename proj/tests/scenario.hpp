#pragma once

// Shared synthetic scenario for the test suite: a Guerrero-like network of
// eleven stations (coordinates approximate, laid out as a coastal line plus
// an inland profile), the reference dipping plane, and a Gaussian slip bump
// scaled to produce a peak surface displacement near 100 mm.

#include <cmath>
#include <random>

#include "slipinv/forward.hpp"

namespace scenario {

inline slipinv::StationSet guerrero_stations() {
  slipinv::StationSet s;
  s.names = {"ACAP", "ACYA", "CAYA", "COYU", "CPDP", "DEMA",
             "DOAR", "IGUA", "MEZC", "UNIP", "YAIG"};
  s.positions.resize(11, 2);
  s.positions << 0, 0,
                 2, 3,
               -60, 15,
               -35, 10,
               -15, 5,
                25, 8,
                60, 20,
                35, 130,
                20, 100,
                -5, 55,
                55, 170;
  s.sigma_hor = Eigen::VectorXd::Constant(11, 1.0);
  s.sigma_ver = Eigen::VectorXd::Constant(11, 3.0);
  return s;
}

inline slipinv::GeometryParam truth_m() { return {-0.3, -0.15, -14.0}; }

inline slipinv::FaultGrid truth_grid(int n_side) {
  return slipinv::build_grid(slipinv::Vec2(0, 30), slipinv::Vec2(35, 35),
                             n_side, slipinv::Rake::steepest());
}

// Peak slip in mm; a few meters, tuned so max station |u| is close to 100 mm
// on the reference plane.
inline constexpr double kBumpPeakMm = 2500.0;
inline constexpr double kBumpWidthKm = 7.0;

inline slipinv::SlipVector bump_slip(const slipinv::FaultGrid& grid,
                                     double peak_mm = kBumpPeakMm) {
  slipinv::SlipVector g(grid.q());
  for (int k = 0; k < grid.q(); ++k) {
    const slipinv::Vec2 y = grid.node_coord(k);
    const double r2 = (y(0) - 0.0) * (y(0) - 0.0) +
                      (y(1) - 30.0) * (y(1) - 30.0);
    g(k) = peak_mm * std::exp(-r2 / (2.0 * kBumpWidthKm * kBumpWidthKm));
  }
  return g;
}

// Gaussian measurement noise with the per-station sigmas, reproducible.
inline Eigen::VectorXd add_noise(const Eigen::VectorXd& clean,
                                 const slipinv::StationSet& stations,
                                 unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd noisy = clean;
  for (int j = 0; j < stations.n(); ++j) {
    noisy(3 * j + 0) += stations.sigma_hor(j) * unit(rng);
    noisy(3 * j + 1) += stations.sigma_hor(j) * unit(rng);
    noisy(3 * j + 2) += stations.sigma_ver(j) * unit(rng);
  }
  return noisy;
}

}  // namespace scenario
