#include "slipinv/forward.hpp"

#include <sstream>

namespace slipinv {

void StationSet::validate() const {
  const int N = n();
  if (N < 1) throw ConfigError("station set is empty");
  if (static_cast<int>(names.size()) != N ||
      sigma_hor.size() != N || sigma_ver.size() != N) {
    throw ConfigError("station set fields have inconsistent lengths");
  }
  if (measured_u.size() != 0 && measured_u.size() != 3 * N) {
    throw ConfigError("measured displacement vector is not 3N long");
  }
  for (int j = 0; j < N; ++j) {
    if (!(sigma_hor(j) > 0.0) || !(sigma_ver(j) > 0.0)) {
      throw ConfigError("station " + names[j] +
                        " has a non-positive noise sigma");
    }
  }
}

Eigen::VectorXd ForwardSystem::weight(const Eigen::VectorXd& y) const {
  if (y.size() != dw.size()) {
    throw ConfigError("weight: vector length does not match 3N");
  }
  return dw.cwiseProduct(y);
}

ForwardSystem assemble(const GeometryParam& m, const FaultGrid& grid,
                       const StationSet& stations, const ElasticMedium& medium,
                       double depth_guard_km) {
  medium.validate();
  stations.validate();
  const int N = stations.n();
  const int q = grid.q();

  // Reject geometries whose plane pokes into the guard zone anywhere on the
  // slip rectangle.  The extrema of an affine depth sit at the corners, but
  // checking the nodes keeps the message specific.
  for (int k = 0; k < q; ++k) {
    const Vec2 y = grid.node_coord(k);
    const double z = m.depth_at(y(0), y(1));
    if (z > -depth_guard_km) {
      std::ostringstream msg;
      msg << "fault intersects guard zone: node (" << y(0) << ", " << y(1)
          << ") km sits at depth " << z << " km, above the " << -depth_guard_km
          << " km limit";
      throw ConfigError(msg.str());
    }
  }

  ForwardSystem sys;
  sys.m = m;
  sys.A.resize(3 * N, q);

  const QuadratureWeights quad = quadrature_weights(grid, m, N);
  const Vec3 rake = rake_direction(grid, m);
  const Vec3 normal = m.normal();

  DislocationSource src;
  src.slip_direction = rake;
  src.fault_normal = normal;
  for (int k = 0; k < q; ++k) {
    const Vec2 y = grid.node_coord(k);
    src.position = Vec3(y(0), y(1), m.depth_at(y(0), y(1)));
    for (int j = 0; j < N; ++j) {
      const Vec3 u = green_surface(medium, src, stations.positions.row(j));
      sys.A.block<3, 1>(3 * j, k) = quad.patch_weight * u;
    }
  }

  sys.dw.resize(3 * N);
  for (int j = 0; j < N; ++j) {
    sys.dw(3 * j + 0) = 1.0 / stations.sigma_hor(j);
    sys.dw(3 * j + 1) = 1.0 / stations.sigma_hor(j);
    sys.dw(3 * j + 2) = 1.0 / stations.sigma_ver(j);
  }

  const Eigen::MatrixXd wa = sys.dw.asDiagonal() * sys.A;
  const auto reconstruction_error = [&]() {
    return (sys.U * sys.mu.asDiagonal() * sys.V.transpose() - wa).norm() /
           std::max(wa.norm(), 1e-300);
  };

  Eigen::BDCSVD<Eigen::MatrixXd> svd(wa,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  sys.U = svd.matrixU();
  sys.V = svd.matrixV();
  sys.mu = svd.singularValues();

  if (!(reconstruction_error() < 1e-10)) {
    // The divide-and-conquer kernel intermittently mis-deflates wide
    // matrices (q much larger than 3N); the one-sided fallback is slower but
    // does not share the failure mode.
    Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(
        wa, Eigen::ComputeThinU | Eigen::ComputeThinV);
    sys.U = jsvd.matrixU();
    sys.V = jsvd.matrixV();
    sys.mu = jsvd.singularValues();
  }
  const double rel = reconstruction_error();
  if (!(rel < 1e-10)) {
    throw NumericalError("SVD of the weighted operator failed to reconstruct "
                         "it (relative error " + std::to_string(rel) + ")");
  }
  return sys;
}

Eigen::MatrixX3d predict(const ForwardSystem& system, const SlipVector& g) {
  if (g.size() != system.q()) {
    throw ConfigError("predict: slip vector length does not match the grid");
  }
  const Eigen::VectorXd stacked = system.A * g;
  const int N = system.n_data() / 3;
  Eigen::MatrixX3d out(N, 3);
  for (int j = 0; j < N; ++j) out.row(j) = stacked.segment<3>(3 * j);
  return out;
}

}  // namespace slipinv
