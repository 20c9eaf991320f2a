#pragma once

// Forward operator: the dense 3N x q matrix mapping nodal slip on the fault
// plane to weighted surface displacements at the GPS stations, plus the
// spectral data every downstream consumer needs.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slipinv/discretization.hpp"
#include "slipinv/elastic.hpp"
#include "slipinv/errors.hpp"

namespace slipinv {

// Surface observation network.  Displacements and sigmas are in mm,
// positions in km.  The stacked data vector orders components station by
// station: (u1, u2, u3) for station 0, then station 1, and so on.
struct StationSet {
  std::vector<std::string> names;
  Eigen::MatrixX2d positions;
  Eigen::VectorXd measured_u;  // 3N stacked, may be empty before synthesis
  Eigen::VectorXd sigma_hor;
  Eigen::VectorXd sigma_ver;

  int n() const { return static_cast<int>(positions.rows()); }
  void validate() const;
};

// Assembled linear system for one geometry m: the operator A, the diagonal
// noise weighting, and the thin SVD of the weighted operator, computed
// eagerly because the C search, the determinant, and the Woodbury solve all
// feed on it.
struct ForwardSystem {
  GeometryParam m;
  Eigen::MatrixXd A;    // 3N x q, mm per mm of slip
  Eigen::VectorXd dw;   // 3N diagonal of the weight matrix, 1/mm
  Eigen::MatrixXd U;    // 3N x p, p = min(3N, q)
  Eigen::VectorXd mu;   // singular values of diag(dw) * A, nonincreasing
  Eigen::MatrixXd V;    // q x p

  int n_data() const { return static_cast<int>(A.rows()); }
  int q() const { return static_cast<int>(A.cols()); }
  // diag(dw) * y without forming the matrix.
  Eigen::VectorXd weight(const Eigen::VectorXd& y) const;
};

// Minimum depth (km) the fault plane must keep below the free surface over
// the whole slip rectangle.  Shallower geometries are rejected rather than
// silently producing near-singular columns.
inline constexpr double kDefaultDepthGuardKm = 2.0;

// Build the forward system for geometry m.  Column k of A is the patch
// weight times the surface response of a unit dislocation at node k, lifted
// onto the plane and slipping along the rake.  Throws ConfigError when any
// node violates the depth guard.
ForwardSystem assemble(const GeometryParam& m, const FaultGrid& grid,
                       const StationSet& stations, const ElasticMedium& medium,
                       double depth_guard_km = kDefaultDepthGuardKm);

// Predicted displacements A*g, reshaped to one 3-vector per station (mm).
Eigen::MatrixX3d predict(const ForwardSystem& system, const SlipVector& g);

}  // namespace slipinv
