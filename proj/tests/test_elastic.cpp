// Tests for the half-space Green's tensor: frozen reference values from the
// symbolic derivation, elastic-theory identities, and the finite-difference
// field verification.
#include "doctest.h"

#include <cmath>

#include "slipinv/elastic.hpp"

using namespace slipinv;

namespace {

// Slip direction and normal for the plane x3 = a*x1 + b*x2 + d with slip
// along steepest ascent as used by the discretization module.
DislocationSource plane_source(const GeometryParam& m, double y1, double y2) {
  DislocationSource src;
  src.position = Vec3(y1, y2, m.depth_at(y1, y2));
  src.fault_normal = m.normal();
  Vec3 t(-m.a, -m.b, -(m.a * m.a + m.b * m.b));
  src.slip_direction = t.normalized();
  return src;
}

const ElasticMedium kMedium{};  // lambda = mu = 1, nu = 0.25

}  // namespace

// ===========================================================================
// Frozen values from the generating derivation (nu = 0.25, mu = 1)
// ===========================================================================

TEST_CASE("point-force tensor matches frozen surface-receiver values") {
  // Receiver (10, 10, 0), source (0, 0, -14).
  const double GA[3][3] = {
      {0.0060084758897857144, 0.00083583976332794266, 0.0020035743789775993},
      {0.00083583976332794266, 0.0060084758897857144, 0.0020035743789775993},
      {0.00082394368680391339, 0.00082394368680391339, 0.0079776402570264107},
  };
  const Mat3 g = green_force(kMedium, Vec3(10, 10, 0), Vec3(0, 0, -14));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(g(i, j) == doctest::Approx(GA[i][j]).epsilon(1e-12));
}

TEST_CASE("point-force tensor matches frozen interior-receiver values") {
  // Receiver (-1.5, 2.5, -1.1), source (0, 0, -4.75).
  const double GB[3][3] = {
      {0.020386618241248106, -0.001278008031631815, -0.0025902999072954328},
      {-0.001278008031631815, 0.021749826808322042, 0.0043171665121590546},
      {-0.002339231586710139, 0.003898719311183565, 0.032863279802609285},
  };
  const Mat3 g =
      green_force(kMedium, Vec3(-1.5, 2.5, -1.1), Vec3(0, 0, -4.75));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(g(i, j) == doctest::Approx(GB[i][j]).epsilon(1e-12));
}

TEST_CASE("surface dislocation contraction matches frozen kernel values") {
  // T[i][3p+q] at receiver (10, 10), source (0, 0, -14).
  const double TS[3][9] = {
      {1.8163832852525318e-5, 0.00018533178551811385, 0.00028382283614852305,
       -1.6633790609137054e-5, -1.6633790609137054e-5, 8.3465398250763124e-5,
       -6.9616922074166031e-5, 0.00013074051582359389,
       9.9452745820237187e-5},
      {-1.6633790609137054e-5, -1.6633790609137054e-5, 8.3465398250763124e-5,
       0.00018533178551811385, 1.8163832852525318e-5, 0.00028382283614852305,
       0.00013074051582359389, -6.9616922074166031e-5,
       9.9452745820237187e-5},
      {1.0710295703717851e-6, 8.3465398250763124e-5, -1.5300422433882644e-6,
       8.3465398250763124e-5, 1.0710295703717851e-6, -1.5300422433882644e-6,
       0.00030141832194748809, 0.00030141832194748809,
       0.00013923384414833206},
  };
  const GeometryParam m{-0.3, -0.15, -14.0};
  const DislocationSource src = plane_source(m, 0.0, 0.0);
  // Contract the frozen tensor with the moment density of this source.
  const Vec3 s = src.slip_direction, n = src.fault_normal;
  Mat3 mom = kMedium.mu * (s * n.transpose() + n * s.transpose());
  mom.diagonal().array() += kMedium.lambda * s.dot(n);
  Vec3 expected = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        expected(i) += TS[i][3 * p + q] * mom(p, q);

  const Vec3 u = green_surface(kMedium, src, Vec2(10, 10));
  for (int i = 0; i < 3; ++i)
    CHECK(u(i) == doctest::Approx(expected(i)).epsilon(1e-12));
}

// ===========================================================================
// Elastic-theory identities
// ===========================================================================

TEST_CASE("point-force tensor is reciprocal") {
  const Vec3 pts[][2] = {
      {Vec3(3.0, -2.0, -5.0), Vec3(-1.0, 4.0, -9.0)},
      {Vec3(12.0, 7.0, -1.5), Vec3(0.5, -3.0, -20.0)},
      {Vec3(-6.0, -6.0, -13.0), Vec3(6.0, 2.0, -2.5)},
  };
  for (const auto& pq : pts) {
    const Mat3 gpq = green_force(kMedium, pq[0], pq[1]);
    const Mat3 gqp = green_force(kMedium, pq[1], pq[0]);
    CHECK((gpq - gqp.transpose()).norm() < 1e-14 * gpq.norm());
  }
}

TEST_CASE("surface evaluation agrees with interior solution at x3 -> 0-") {
  const GeometryParam m{-0.3, -0.15, -14.0};
  const DislocationSource src = plane_source(m, 0.0, 0.0);
  const Vec2 x(10.0, 10.0);
  const Vec3 u_surface = green_surface(kMedium, src, x);
  const Vec3 u_interior =
      disloc_displacement(kMedium, src, Vec3(x(0), x(1), -1e-9));
  CHECK((u_surface - u_interior).norm() < 1e-6 * u_surface.norm());
}

TEST_CASE("mirror symmetry across the plane x2 = x1") {
  // Mirroring source position, slip, normal, and receiver across x2 = x1
  // must mirror the displacement.
  DislocationSource src;
  src.position = Vec3(2.0, -1.0, -8.0);
  const Vec3 n = Vec3(0.2, -0.4, 1.0).normalized();
  Vec3 t = Vec3(1.0, 0.5, 0.0);
  t -= t.dot(n) * n;
  src.fault_normal = n;
  src.slip_direction = t.normalized();

  auto mirror = [](const Vec3& v) { return Vec3(v(1), v(0), v(2)); };
  DislocationSource msrc;
  msrc.position = mirror(src.position);
  msrc.fault_normal = mirror(src.fault_normal);
  msrc.slip_direction = mirror(src.slip_direction);

  const Vec2 x(7.0, -3.0);
  const Vec3 u = green_surface(kMedium, src, x);
  const Vec3 mu_ = green_surface(kMedium, msrc, Vec2(x(1), x(0)));
  CHECK((mirror(u) - mu_).norm() < 1e-13 * u.norm());
}

TEST_CASE("far-field quadratic decay") {
  const GeometryParam m{-0.2, 0.1, -10.0};
  const DislocationSource src = plane_source(m, 0.0, 0.0);
  const double r = 200.0;  // much larger than the 10 km source depth
  const Vec2 dir(0.6, 0.8);
  const double u1 = green_surface(kMedium, src, r * dir).norm();
  const double u2 = green_surface(kMedium, src, 2 * r * dir).norm();
  CHECK(u2 / u1 == doctest::Approx(0.25).epsilon(0.15));

  const double alpha = decay_exponent(kMedium, src, 100.0, 1000.0, 12);
  CHECK(alpha > -2.1);
  CHECK(alpha < -1.9);
}

TEST_CASE("linearity in the slip moment and translation equivariance") {
  const GeometryParam m{0.1, -0.2, -12.0};
  const DislocationSource src = plane_source(m, 1.0, -2.0);
  const Vec2 x(8.0, 3.0);
  const Vec3 u = green_surface(kMedium, src, x);

  // Scaling mu scales the moment (and the hence the output) except for the
  // 1/mu in the Green's tensor; scale lambda = mu jointly to keep nu fixed
  // and the output must be unchanged.  True linearity in the slip magnitude
  // is exercised through the forward operator; here we check the kernel is
  // exactly proportional to the moment by doubling it via a doubled medium.
  ElasticMedium doubled{2.0, 2.0};
  const Vec3 u2 = green_surface(doubled, src, x);
  CHECK((u2 - u).norm() < 1e-14 * u.norm());

  const Vec2 shift(40.0, -25.0);
  DislocationSource tsrc = src;
  tsrc.position += Vec3(shift(0), shift(1), 0.0);
  const Vec3 ut = green_surface(kMedium, tsrc, x + shift);
  CHECK((ut - u).norm() < 1e-13 * u.norm());
}

// ===========================================================================
// Input validation
// ===========================================================================

TEST_CASE("sources at or above the surface are rejected") {
  DislocationSource src;
  src.position = Vec3(0, 0, 0.5);
  src.fault_normal = Vec3(0, 0, 1);
  src.slip_direction = Vec3(1, 0, 0);
  CHECK_THROWS_AS(green_surface(kMedium, src, Vec2(1, 1)), ConfigError);
}

TEST_CASE("non-tangential slip is rejected") {
  DislocationSource src;
  src.position = Vec3(0, 0, -5);
  src.fault_normal = Vec3(0, 0, 1);
  src.slip_direction = Vec3(0, 0, 1);  // parallel to the normal
  CHECK_THROWS_AS(green_surface(kMedium, src, Vec2(1, 1)), ConfigError);
}

TEST_CASE("invalid medium is rejected") {
  ElasticMedium bad{-1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("probe box touching the source is rejected as singular") {
  const GeometryParam m{0.0, -0.2, -6.0};
  const DislocationSource src = plane_source(m, 0.0, 0.0);
  ProbeBox box;
  box.lo = src.position - Vec3(0.5, 0.5, 0.5);
  box.hi = src.position + Vec3(0.5, 0.5, 0.5);
  CHECK_THROWS_WITH_AS(verify_field(kMedium, src, box, 1, 1, 1e-3, 1),
                       doctest::Contains("singular point"), ConfigError);
}

// ===========================================================================
// Finite-difference field verification
// ===========================================================================

TEST_CASE("Navier and traction residuals within tolerance") {
  const GeometryParam m{-0.3, -0.15, -14.0};
  const DislocationSource src = plane_source(m, 0.0, 0.0);
  ProbeBox box;
  box.lo = Vec3(-25.0, -25.0, -9.0);
  box.hi = Vec3(25.0, 25.0, 0.0);
  const ResidualReport rep =
      verify_field(kMedium, src, box, 40, 40, 1e-3, 20250801);
  CHECK(rep.interior_probes == 40);
  CHECK(rep.surface_probes == 40);
  CHECK(rep.max_navier_rel < 1e-4);
  CHECK(rep.max_traction_rel < 1e-3);
}
