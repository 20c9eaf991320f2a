// Half-space elastostatic Green's tensor for point dislocations.
//
// The solid occupies x3 <= 0 with a traction-free surface at x3 = 0.  The
// closed-form field is the full-space Kelvin solution plus image and
// harmonic-potential corrections; the implementation is generated
// symbolically (tools/dev/generate_green_kernels.py) and verified here
// numerically through verify_field.
#pragma once

#include <Eigen/Dense>

#include "slipinv/errors.hpp"

namespace slipinv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Homogeneous isotropic medium in dimensionless model units.
struct ElasticMedium {
  double lambda = 1.0;
  double mu = 1.0;

  double poisson() const { return lambda / (2.0 * (lambda + mu)); }
  void validate() const;
};

// Fault-plane parameters m = (a, b, d): x3 = a*x1 + b*x2 + d, d < 0 in km.
struct GeometryParam {
  double a = 0.0;
  double b = 0.0;
  double d = 0.0;

  double depth_at(double y1, double y2) const { return a * y1 + b * y2 + d; }
  // Upward unit normal of the plane.
  Vec3 normal() const;
};

// A unit point dislocation: position below the surface, unit slip direction
// tangential to the fault plane, and unit fault normal.
struct DislocationSource {
  Vec3 position = Vec3::Zero();       // km, position(2) < 0
  Vec3 slip_direction = Vec3::Zero(); // unit, tangential
  Vec3 fault_normal = Vec3::Zero();   // unit

  void validate() const;
};

// Residuals from the finite-difference verification of the dislocation field.
struct ResidualReport {
  double max_navier_rel = 0.0;    // interior Navier residual / local scale
  double max_traction_rel = 0.0;  // surface traction residual / local scale
  int interior_probes = 0;
  int surface_probes = 0;
};

// Axis-aligned probe region for verify_field.
struct ProbeBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

// Evaluation guard: points closer than this to the source are rejected.
inline constexpr double kSingularGuardKm = 1e-6;

// Point-force Green's tensor G[i][j]: displacement component i at x due to a
// unit force along j at src (src(2) < 0).  Exposed for verification tests.
Mat3 green_force(const ElasticMedium& medium, const Vec3& x, const Vec3& src);

// Displacement at an interior point x (x3 <= 0) due to the unit point
// dislocation `src`.  Serves as the oracle for the surface-specialized path.
Vec3 disloc_displacement(const ElasticMedium& medium,
                         const DislocationSource& src, const Vec3& x);

// Displacement at the surface receiver x = (x1, x2, 0) due to the unit point
// dislocation `src`, per unit slip-moment (no area factor).
Vec3 green_surface(const ElasticMedium& medium, const DislocationSource& src,
                   const Vec2& x);

// Finite-difference verification of the dislocation displacement field:
// interior Navier residual (central differences) and surface traction
// residual (one-sided in x3), each relative to a local field scale.  The
// probe box must stay at least 1 km away from the source.
ResidualReport verify_field(const ElasticMedium& medium,
                            const DislocationSource& src,
                            const ProbeBox& probe_box, int interior_probes,
                            int surface_probes, double step_km,
                            unsigned seed);

// Least-squares slope of log|u| against log r for surface receivers at
// horizontal distances logarithmically spaced in [r_min, r_max]; the
// far-field displacement decays like r^-2, so the fit should be near -2.
double decay_exponent(const ElasticMedium& medium,
                      const DislocationSource& src, double r_min,
                      double r_max, int n_samples);

}  // namespace slipinv
