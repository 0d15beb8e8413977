#pragma once

// Reference computations the library results are checked against. Each one is
// written independently of the code under test (no shared helpers).

#include "conicscan/ellipse_fit.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

using conicscan::Vec2;

// Power sums from scratch, coordinates relative to `o`.
inline conicscan::PowerSums power_sums(std::span<const Vec2> pts, const Vec2& o) {
  conicscan::PowerSums s;
  for (const auto& p : pts) {
    const double x = p.x() - o.x(), y = p.y() - o.y();
    s.x4 += x * x * x * x;
    s.x3y += x * x * x * y;
    s.x2y2 += x * x * y * y;
    s.xy3 += x * y * y * y;
    s.y4 += y * y * y * y;
    s.x3 += x * x * x;
    s.x2y += x * x * y;
    s.xy2 += x * y * y;
    s.y3 += y * y * y;
    s.x2 += x * x;
    s.xy += x * y;
    s.y2 += y * y;
    s.x += x;
    s.y += y;
    s.one += 1.0;
  }
  return s;
}

inline std::vector<double> as_vector(const conicscan::PowerSums& s) {
  return {s.x4, s.x3y, s.x2y2, s.xy3, s.y4, s.x3, s.x2y, s.xy2, s.y3, s.x2, s.xy, s.y2, s.x, s.y, s.one};
}

// Coefficients of the ellipse with the given center, semi-axes and angle,
// scaled to unit norm with a + c > 0.
inline Eigen::Matrix<double, 6, 1> ellipse_coefficients(double cx, double cy, double ra, double rb, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  // ((x' c + y' s) / ra)^2 + ((-x' s + y' c) / rb)^2 = 1 with x' = x - cx
  const double A = c * c / (ra * ra) + s * s / (rb * rb);
  const double B = 2.0 * c * s * (1.0 / (ra * ra) - 1.0 / (rb * rb));
  const double C = s * s / (ra * ra) + c * c / (rb * rb);
  const double D = -2.0 * A * cx - B * cy;
  const double E = -2.0 * C * cy - B * cx;
  const double F = A * cx * cx + B * cx * cy + C * cy * cy - 1.0;
  Eigen::Matrix<double, 6, 1> v;
  v << A, B, C, D, E, F;
  return v.normalized();
}

inline Eigen::Matrix<double, 6, 1> as_vector(const conicscan::ConicCoefficients& k) {
  Eigen::Matrix<double, 6, 1> v;
  v << k.a, k.b, k.c, k.d, k.e, k.f;
  v.normalize();
  if (v(0) + v(2) < 0) v = -v;
  return v;
}

// The original direct ellipse fit: generalized eigenproblem S a = l C a on the
// full 6x6 scatter matrix, solved as eig(S^-1 C). Points are centered and
// scaled first; the result is mapped back. Needs a non-singular S (noisy data).
inline std::optional<Eigen::Matrix<double, 6, 1>> direct_fit(std::span<const Vec2> pts) {
  Vec2 m = Vec2::Zero();
  for (const auto& p : pts) m += p;
  m /= static_cast<double>(pts.size());
  double sc = 0;
  for (const auto& p : pts) sc = std::max(sc, (p - m).norm());
  Eigen::MatrixXd D(pts.size(), 6);
  for (size_t i = 0; i < pts.size(); ++i) {
    const double x = (pts[i].x() - m.x()) / sc, y = (pts[i].y() - m.y()) / sc;
    D.row(static_cast<Eigen::Index>(i)) << x * x, x * y, y * y, x, y, 1.0;
  }
  const Eigen::Matrix<double, 6, 6> S = D.transpose() * D;
  Eigen::Matrix<double, 6, 6> C = Eigen::Matrix<double, 6, 6>::Zero();
  C(0, 2) = C(2, 0) = 2.0;
  C(1, 1) = -1.0;
  Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(S.inverse() * C);
  // S a = l C a has one positive l; here its reciprocal is the largest eigenvalue
  std::optional<Eigen::Matrix<double, 6, 1>> best;
  double top = 0.0;
  for (int i = 0; i < 6; ++i) {
    const auto l = es.eigenvalues()(i);
    if (std::abs(l.imag()) > 1e-9 * std::abs(l.real()) || l.real() <= top) continue;
    Eigen::Matrix<double, 6, 1> a = es.eigenvectors().col(i).real();
    if (4 * a(0) * a(2) - a(1) * a(1) <= 0) continue;
    best = a;
    top = l.real();
  }
  if (!best) return std::nullopt;
  // undo x' = (x - m) / sc
  auto a = *best;
  const double A = a(0) / (sc * sc), B = a(1) / (sc * sc), Cc = a(2) / (sc * sc), Dd = a(3) / sc, E = a(4) / sc,
               F = a(5);
  Eigen::Matrix<double, 6, 1> w;
  w << A, B, Cc, Dd - 2 * A * m.x() - B * m.y(), E - 2 * Cc * m.y() - B * m.x(),
      F + A * m.x() * m.x() + B * m.x() * m.y() + Cc * m.y() * m.y() - Dd * m.x() - E * m.y();
  w.normalize();
  if (w(0) + w(2) < 0) w = -w;
  return w;
}

// Closest distance from p to the ellipse boundary by dense sampling.
inline double boundary_distance(double cx, double cy, double ra, double rb, double theta, const Vec2& p,
                                int samples = 200000) {
  const double c = std::cos(theta), s = std::sin(theta);
  double best = 1e300;
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * M_PI * i / samples;
    const double ex = ra * std::cos(t), ey = rb * std::sin(t);
    const Vec2 q(cx + c * ex - s * ey, cy + s * ex + c * ey);
    best = std::min(best, (q - p).norm());
  }
  return best;
}

inline std::vector<Vec2> ellipse_points(double cx, double cy, double ra, double rb, double theta, int n,
                                        double t0 = 0.0, double span = 2.0 * M_PI) {
  std::vector<Vec2> out;
  const double c = std::cos(theta), s = std::sin(theta);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + span * i / (span >= 2.0 * M_PI - 1e-12 ? n : n - 1);
    const double ex = ra * std::cos(t), ey = rb * std::sin(t);
    out.emplace_back(cx + c * ex - s * ey, cy + s * ex + c * ey);
  }
  return out;
}

// Parameter error of a fit against the truth, relative to the major radius,
// with the angle compared modulo pi (ignored for near-circles).
inline double relative_error(const conicscan::GeometricEllipse2D& e, double cx, double cy, double ra, double rb,
                             double theta) {
  const double scale = std::max(ra, rb);
  double err = std::max({std::abs(e.cx - cx), std::abs(e.cy - cy), std::abs(e.r_major - std::max(ra, rb)),
                         std::abs(e.r_minor - std::min(ra, rb))}) /
               scale;
  if (std::abs(ra - rb) > 1e-3 * scale) {
    const double major_angle = ra >= rb ? theta : theta + M_PI / 2;
    double d = std::fmod(std::abs(e.theta - major_angle), M_PI);
    d = std::min(d, M_PI - d);
    err = std::max(err, d);
  }
  return err;
}

}  // namespace oracle
