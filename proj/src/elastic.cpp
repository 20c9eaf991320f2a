// Implementation of the half-space Green's tensor and its verification.
#include "slipinv/elastic.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace slipinv {

namespace {
#include "disloc_interior_gen.inc"
#include "disloc_surface_gen.inc"
#include "green_force_gen.inc"

// Moment density per unit slip for a dislocation with slip direction s and
// normal n: m_pq = lambda (s.n) delta_pq + mu (s_p n_q + n_p s_q).
Mat3 moment_density(const ElasticMedium& med, const Vec3& s, const Vec3& n) {
  Mat3 m = med.mu * (s * n.transpose() + n * s.transpose());
  m.diagonal().array() += med.lambda * s.dot(n);
  return m;
}

void check_receiver_distance(const Vec3& x, const Vec3& src_pos) {
  if ((x - src_pos).norm() < kSingularGuardKm) {
    throw NumericalError("green evaluation at singular point: receiver within "
                         "1e-6 km of the source");
  }
}
}  // namespace

void ElasticMedium::validate() const {
  if (!(lambda > 0.0) || !(mu > 0.0)) {
    std::ostringstream os;
    os << "elastic medium requires lambda > 0 and mu > 0, got lambda="
       << lambda << " mu=" << mu;
    throw ConfigError(os.str());
  }
}

Vec3 GeometryParam::normal() const {
  return Vec3(-a, -b, 1.0) / std::sqrt(1.0 + a * a + b * b);
}

void DislocationSource::validate() const {
  if (!(position(2) < 0.0)) {
    throw ConfigError("dislocation source must lie strictly below the "
                      "surface (x3 < 0)");
  }
  if (std::abs(slip_direction.norm() - 1.0) > 1e-12 ||
      std::abs(fault_normal.norm() - 1.0) > 1e-12) {
    throw ConfigError("slip_direction and fault_normal must be unit vectors");
  }
  if (std::abs(slip_direction.dot(fault_normal)) > 1e-12) {
    throw ConfigError("slip_direction must be tangential to the fault "
                      "(slip . normal = 0)");
  }
}

Mat3 green_force(const ElasticMedium& medium, const Vec3& x, const Vec3& src) {
  medium.validate();
  if (!(src(2) < 0.0)) {
    throw ConfigError("point-force source must have x3 < 0");
  }
  check_receiver_distance(x, src);
  double g[9];
  green_force_kernel(x(0) - src(0), x(1) - src(1), x(2), -src(2),
                     medium.poisson(), medium.mu, g);
  Mat3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = g[3 * i + j];
  return out;
}

Vec3 disloc_displacement(const ElasticMedium& medium,
                         const DislocationSource& src, const Vec3& x) {
  medium.validate();
  src.validate();
  check_receiver_distance(x, src.position);
  double t[27];
  disloc_interior_kernel(x(0), x(1), x(2), src.position(0), src.position(1),
                         src.position(2), medium.poisson(), medium.mu, t);
  const Mat3 m = moment_density(medium, src.slip_direction, src.fault_normal);
  Vec3 u = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) u(i) += t[9 * i + 3 * p + q] * m(p, q);
  return u;
}

Vec3 green_surface(const ElasticMedium& medium, const DislocationSource& src,
                   const Vec2& x) {
  medium.validate();
  src.validate();
  check_receiver_distance(Vec3(x(0), x(1), 0.0), src.position);
  double t[27];
  disloc_surface_kernel(x(0), x(1), src.position(0), src.position(1),
                        src.position(2), medium.poisson(), medium.mu, t);
  const Mat3 m = moment_density(medium, src.slip_direction, src.fault_normal);
  Vec3 u = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) u(i) += t[9 * i + 3 * p + q] * m(p, q);
  return u;
}

namespace {

// Second-order one-sided derivative into the solid at a surface point.
Vec3 backward_dz(const ElasticMedium& med, const DislocationSource& src,
                 const Vec3& x, double h) {
  const Vec3 f0 = disloc_displacement(med, src, x);
  const Vec3 f1 = disloc_displacement(med, src, x - Vec3(0, 0, h));
  const Vec3 f2 = disloc_displacement(med, src, x - Vec3(0, 0, 2 * h));
  return (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h);
}

}  // namespace

ResidualReport verify_field(const ElasticMedium& medium,
                            const DislocationSource& src,
                            const ProbeBox& probe_box, int interior_probes,
                            int surface_probes, double step_km,
                            unsigned seed) {
  medium.validate();
  src.validate();
  // The probe region must keep clear of the source singularity.
  Vec3 nearest;
  for (int k = 0; k < 3; ++k) {
    nearest(k) = std::min(std::max(src.position(k), probe_box.lo(k)),
                          probe_box.hi(k));
  }
  if ((nearest - src.position).norm() < 1.0) {
    throw ConfigError("singular point: probe box must exclude a 1 km ball "
                      "around the source");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto sample_box = [&](bool surface) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      p(k) = probe_box.lo(k) + u01(rng) * (probe_box.hi(k) - probe_box.lo(k));
    }
    if (surface) p(2) = 0.0;
    return p;
  };
  const double h = step_km;
  const double lam = medium.lambda, mu = medium.mu;

  ResidualReport rep;
  auto field = [&](const Vec3& p) {
    return disloc_displacement(medium, src, p);
  };

  for (int probe = 0; probe < interior_probes; ++probe) {
    Vec3 p = sample_box(false);
    if (p(2) > -2 * h) p(2) = -2 * h;  // keep the FD stencil inside the solid
    // All second derivatives d2u_i / dx_j dx_k from central differences.
    double d2[3][3][3];
    const Vec3 f0 = field(p);
    for (int j = 0; j < 3; ++j) {
      const Vec3 ej = Vec3::Unit(j) * h;
      const Vec3 fp = field(p + ej), fm = field(p - ej);
      for (int i = 0; i < 3; ++i)
        d2[i][j][j] = (fp(i) - 2.0 * f0(i) + fm(i)) / (h * h);
      for (int k = j + 1; k < 3; ++k) {
        const Vec3 ek = Vec3::Unit(k) * h;
        const Vec3 fpp = field(p + ej + ek), fpm = field(p + ej - ek);
        const Vec3 fmp = field(p - ej + ek), fmm = field(p - ej - ek);
        for (int i = 0; i < 3; ++i) {
          const double v = (fpp(i) - fpm(i) - fmp(i) + fmm(i)) / (4 * h * h);
          d2[i][j][k] = v;
          d2[i][k][j] = v;
        }
      }
    }
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) scale += d2[i][j][k] * d2[i][j][k];
    scale = (lam + 2 * mu) * std::sqrt(scale);
    for (int i = 0; i < 3; ++i) {
      double lap = d2[i][0][0] + d2[i][1][1] + d2[i][2][2];
      double graddiv = d2[0][i][0] + d2[1][i][1] + d2[2][i][2];
      const double res = mu * lap + (lam + mu) * graddiv;
      rep.max_navier_rel =
          std::max(rep.max_navier_rel, std::abs(res) / (scale + 1e-300));
    }
    ++rep.interior_probes;
  }

  for (int probe = 0; probe < surface_probes; ++probe) {
    Vec3 p = sample_box(true);
    // Gradient du_i/dx_j: central horizontally, one-sided down in x3.
    Mat3 grad;
    for (int j = 0; j < 2; ++j) {
      const Vec3 ej = Vec3::Unit(j) * h;
      const Vec3 fp = field(p + ej), fm = field(p - ej);
      grad.col(j) = (fp - fm) / (2.0 * h);
    }
    grad.col(2) = backward_dz(medium, src, p, h);
    const double div = grad.trace();
    const double scale = (lam + 2 * mu) * grad.norm();
    // Traction on the plane x3 = 0: sigma_i3.
    for (int i = 0; i < 3; ++i) {
      double t = mu * (grad(i, 2) + grad(2, i));
      if (i == 2) t += lam * div;
      rep.max_traction_rel =
          std::max(rep.max_traction_rel, std::abs(t) / (scale + 1e-300));
    }
    ++rep.surface_probes;
  }
  return rep;
}

double decay_exponent(const ElasticMedium& medium,
                      const DislocationSource& src, double r_min,
                      double r_max, int n_samples) {
  if (!(r_min > 0.0) || !(r_max > r_min) || n_samples < 2) {
    throw ConfigError("decay_exponent requires 0 < r_min < r_max and at "
                      "least two samples");
  }
  // Fit log(rms_az |u|) = alpha log r + const; averaging over azimuths
  // avoids the nodal directions of the radiation pattern where the leading
  // r^-2 coefficient vanishes.
  const int n_az = 12;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) / (n_samples - 1);
    const double r = r_min * std::pow(r_max / r_min, t);
    double ms = 0.0;
    for (int j = 0; j < n_az; ++j) {
      const double phi = (2.0 * M_PI * (j + 0.1)) / n_az;
      const Vec2 x = Vec2(src.position(0), src.position(1)) +
                     r * Vec2(std::cos(phi), std::sin(phi));
      ms += green_surface(medium, src, x).squaredNorm();
    }
    const double lx = std::log(r), ly = 0.5 * std::log(ms / n_az);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double n = n_samples;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace slipinv
