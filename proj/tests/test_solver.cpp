// Tests for the Tikhonov solver: Woodbury path against dense oracles, the
// misfit range endpoints, monotonicity in C, and the discrepancy-principle
// search for the regularization constant.
#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "scenario.hpp"
#include "slipinv/solver.hpp"

using namespace slipinv;

namespace {

struct Setup {
  FaultGrid grid;
  DifferenceOperators ops;
  ForwardSystem sys;
  Eigen::VectorXd u;
};

Setup make_setup(int n_side, unsigned seed) {
  const ElasticMedium medium;
  Setup s{scenario::truth_grid(n_side), {}, {}, {}};
  s.ops = build_difference_ops(s.grid);
  s.sys = assemble(scenario::truth_m(), s.grid, scenario::guerrero_stations(),
                   medium);
  const Eigen::VectorXd clean = s.sys.A * scenario::bump_slip(s.grid);
  s.u = scenario::add_noise(clean, scenario::guerrero_stations(), seed);
  return s;
}

Eigen::MatrixXd dense_K(const DifferenceOperators& ops) {
  return Eigen::MatrixXd(ops.D.transpose() * ops.D) +
         Eigen::MatrixXd(ops.E.transpose() * ops.E);
}

SlipVector dense_solve(const Setup& s, double C) {
  const Eigen::MatrixXd B = s.sys.dw.asDiagonal() * s.sys.A;
  const Eigen::MatrixXd H =
      B.transpose() * B + C * dense_K(s.ops);
  return H.ldlt().solve(B.transpose() * s.sys.weight(s.u));
}

}  // namespace

// ===========================================================================
// Woodbury solve against the dense normal equations
// ===========================================================================

TEST_CASE("Woodbury solution matches a dense factorization") {
  const Setup s = make_setup(6, 11);
  for (double C : {1e-4, 1e-2, 1.0}) {
    const TikhonovSolution sol = solve(s.sys, s.ops, s.u, C);
    const SlipVector oracle = dense_solve(s, C);
    CHECK((sol.g - oracle).norm() / oracle.norm() < 1e-8);

    const Eigen::MatrixXd B = s.sys.dw.asDiagonal() * s.sys.A;
    const Eigen::VectorXd rhs = B.transpose() * s.sys.weight(s.u);
    const Eigen::VectorXd resid =
        B.transpose() * (B * sol.g) + C * (dense_K(s.ops) * sol.g) - rhs;
    CHECK(resid.norm() / rhs.norm() < 1e-8);

    // Reported misfit and penalty agree with direct evaluation.
    CHECK(sol.weighted_misfit ==
          doctest::Approx((B * sol.g - s.sys.weight(s.u)).norm())
              .epsilon(1e-9));
    CHECK(sol.penalty ==
          doctest::Approx((s.ops.D * sol.g).squaredNorm() +
                          (s.ops.E * sol.g).squaredNorm())
              .epsilon(1e-9));
  }
}

TEST_CASE("zero data gives exactly zero slip") {
  Setup s = make_setup(4, 3);
  s.u.setZero();
  const TikhonovSolution sol = solve(s.sys, s.ops, s.u, 1e-3);
  CHECK(sol.g.norm() == 0.0);
  CHECK(sol.weighted_misfit == 0.0);
}

TEST_CASE("huge C kills the slip and pushes the misfit to the data norm") {
  const Setup s = make_setup(6, 5);
  const CellSolver cell(s.sys, s.ops, s.u);
  const TikhonovSolution sol = solve(s.sys, s.ops, s.u, 1e9);
  CHECK(sol.g.norm() < 1e-6 * s.u.norm());
  CHECK(std::abs(sol.weighted_misfit - cell.upper_endpoint()) <
        1e-3 * cell.upper_endpoint());
}

TEST_CASE("non-positive C is rejected") {
  const Setup s = make_setup(3, 1);
  const CellSolver cell(s.sys, s.ops, s.u);
  CHECK_THROWS_AS(solve(s.sys, s.ops, s.u, 0.0), ConfigError);
  CHECK_THROWS_AS(cell.misfit(-1.0), ConfigError);
  CHECK_THROWS_AS(cell.solve_slip(0.0), ConfigError);
}

TEST_CASE("mismatched inputs are rejected") {
  const Setup s = make_setup(3, 1);
  CHECK_THROWS_AS(CellSolver(s.sys, s.ops, Eigen::VectorXd::Zero(7)),
                  ConfigError);
  const DifferenceOperators other =
      build_difference_ops(scenario::truth_grid(4));
  CHECK_THROWS_AS(CellSolver(s.sys, other, s.u), ConfigError);
}

// ===========================================================================
// Misfit endpoints
// ===========================================================================

TEST_CASE("data in the range of A gives a vanishing lower endpoint") {
  Setup s = make_setup(5, 7);
  SlipVector g0 = SlipVector::Random(s.sys.q());
  s.u = s.sys.A * g0;
  const auto [lower, upper] = misfit_endpoints(s.sys, s.u);
  CHECK(lower < 1e-9 * upper);
}

TEST_CASE("data orthogonal to the range hits both endpoints at once") {
  // q = 25 < 3N = 33 leaves an 8-dimensional left null space.
  Setup s = make_setup(5, 7);
  std::mt19937_64 rng(19);
  Eigen::VectorXd r(s.sys.n_data());
  for (int i = 0; i < r.size(); ++i) r(i) = std::normal_distribution<>()(rng);
  const Eigen::VectorXd v =
      r - s.sys.U * (s.sys.U.transpose() * r);  // left-null component
  s.u = v.cwiseQuotient(s.sys.dw);              // so that Dw u = v
  const auto [lower, upper] = misfit_endpoints(s.sys, s.u);
  CHECK(std::abs(lower - upper) < 1e-12 * upper);
}

TEST_CASE("endpoints satisfy the Pythagorean identity") {
  const Setup s = make_setup(5, 23);
  const auto [lower, upper] = misfit_endpoints(s.sys, s.u);
  const Eigen::VectorXd w = s.sys.weight(s.u);
  const double proj = (s.sys.U * (s.sys.U.transpose() * w)).squaredNorm();
  CHECK(lower * lower + proj ==
        doctest::Approx(upper * upper).epsilon(1e-10));
  CHECK(lower <= upper);
}

// ===========================================================================
// Monotonicity and bounds in C
// ===========================================================================

TEST_CASE("misfit rises and penalty falls along a C ladder") {
  const Setup s = make_setup(6, 29);
  const CellSolver cell(s.sys, s.ops, s.u);
  double prev_misfit = -1.0, prev_penalty = 1e300;
  for (int i = 0; i < 20; ++i) {
    const double C = std::pow(10.0, -8.0 + 12.0 * i / 19.0);
    const double mf = cell.misfit(C);
    const double pen = cell.penalty(C);
    CHECK(mf >= prev_misfit);
    CHECK(pen <= prev_penalty);
    CHECK(mf > cell.lower_endpoint());
    CHECK(mf < cell.upper_endpoint());
    prev_misfit = mf;
    prev_penalty = pen;
  }
}

TEST_CASE("slip energy obeys the coarse q/(8C) bound") {
  const Setup s = make_setup(6, 31);
  const CellSolver cell(s.sys, s.ops, s.u);
  const double upper2 = cell.upper_endpoint() * cell.upper_endpoint();
  for (double C : {1e-6, 1e-3, 1.0, 1e3}) {
    const double bound = s.grid.q() / (8.0 * C) * upper2;
    CHECK(cell.solve_slip(C).squaredNorm() <= bound);
  }
}

// ===========================================================================
// Discrepancy search
// ===========================================================================

TEST_CASE("selected C reproduces the err target") {
  const Setup s = make_setup(6, 37);
  const CellSolver cell(s.sys, s.ops, s.u);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.05, 0.9);
  for (int t = 0; t < 10; ++t) {
    const double lower = cell.lower_endpoint();
    const double upper = cell.upper_endpoint();
    const double err = lower + (upper - lower) * unit(rng);
    const double C = select_C_cell(cell, err);
    if (C > 0.0 && C < 1e6) {
      CHECK(std::abs(cell.misfit(C) - err) <= 1e-3 * err);
    }
  }
}

TEST_CASE("targets below the floor return exactly zero") {
  // Noisy data on the 5x5 grid has a genuine out-of-range component.
  const Setup s = make_setup(5, 43);
  const CellSolver cell(s.sys, s.ops, s.u);
  CHECK(cell.lower_endpoint() > 0.0);
  CHECK(select_C_cell(cell, 0.5 * cell.lower_endpoint()) == 0.0);
}

TEST_CASE("targets just under the ceiling give a huge C") {
  const Setup s = make_setup(6, 47);
  const CellSolver cell(s.sys, s.ops, s.u);
  const double C = select_C_cell(cell, (1.0 - 1e-5) * cell.upper_endpoint());
  CHECK(C >= 1e3);
}

TEST_CASE("out-of-range targets are rejected") {
  const Setup s = make_setup(4, 53);
  const CellSolver cell(s.sys, s.ops, s.u);
  CHECK_THROWS_AS(select_C_cell(cell, 0.0), ConfigError);
  CHECK_THROWS_AS(select_C_cell(cell, cell.upper_endpoint()), ConfigError);
}

TEST_CASE("C grows with the allowed err") {
  const Setup s = make_setup(6, 59);
  const CellSolver cell(s.sys, s.ops, s.u);
  double prev = -1.0;
  for (double rel : {0.02, 0.05, 0.1, 0.15, 0.2}) {
    const double C = select_C_cell(cell, rel * cell.upper_endpoint());
    CHECK(C >= prev);
    prev = C;
  }
}

// ===========================================================================
// Global selection over a box
// ===========================================================================

TEST_CASE("single-cell box reduces to the cell search") {
  const ElasticMedium medium;
  Setup s = make_setup(6, 61);
  StationSet st = scenario::guerrero_stations();
  st.measured_u = s.u;
  ParameterBox box;
  const GeometryParam m = scenario::truth_m();
  box.a_min = box.a_max = m.a;
  box.b_min = box.b_max = m.b;
  box.d_min = box.d_max = m.d;
  const CSelection sel =
      select_C_global(box, s.grid, st, medium, s.ops, 0.05);
  CHECK(sel.n_skipped == 0);
  CHECK(sel.per_cell_C.size() == 1);
  CHECK(sel.global_C == sel.per_cell_C(0));
  const CellSolver cell(s.sys, s.ops, s.u);
  CHECK(sel.global_C ==
        doctest::Approx(select_C_cell(cell, sel.err_target)).epsilon(1e-12));
}

TEST_CASE("guard-violating cells are skipped, not fatal") {
  const ElasticMedium medium;
  Setup s = make_setup(6, 67);
  StationSet st = scenario::guerrero_stations();
  st.measured_u = s.u;
  ParameterBox box;
  box.a_min = -0.3; box.a_max = -0.3;
  box.b_min = -0.15; box.b_max = -0.15;
  box.d_min = -14.0; box.d_max = -2.0;  // shallow end pokes into the guard
  box.n_d = 7;
  const CSelection sel =
      select_C_global(box, s.grid, st, medium, s.ops, 0.05);
  CHECK(sel.n_skipped > 0);
  CHECK(sel.n_skipped < box.size());
  CHECK(std::isnan(sel.per_cell_C(box.size() - 1)));
  CHECK(sel.global_C > 0.0);
  CHECK(sel.global_C == sel.per_cell_C.head(box.size() - sel.n_skipped)
                            .maxCoeff());
}

TEST_CASE("a box with no valid cell is a configuration error") {
  const ElasticMedium medium;
  Setup s = make_setup(4, 71);
  StationSet st = scenario::guerrero_stations();
  st.measured_u = s.u;
  ParameterBox box;
  box.d_min = box.d_max = -0.5;  // always inside the guard zone
  CHECK_THROWS_AS(select_C_global(box, s.grid, st, medium, s.ops, 0.05),
                  ConfigError);
}
