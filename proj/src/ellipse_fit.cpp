#include "conicscan/ellipse_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace conicscan {
namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

// Relative determinant below which a 3x3 moment matrix counts as singular.
// det / prod(diag) is in [0, 1] for positive semidefinite matrices.
constexpr double kSingularRatio = 1e-13;

bool nearly_singular(const Matrix3d& m, double det) {
  const double scale = m(0, 0) * m(1, 1) * m(2, 2);
  return !(scale > 0.0) || !(std::abs(det) > kSingularRatio * scale);
}

// Roots of lambda^3 + c2 lambda^2 + c1 lambda + c0, largest first. The
// trigonometric branch costs a cosine per root, so the caller asks for the
// largest and only falls back to the others when it is unusable.
class CubicRoots {
 public:
  CubicRoots(double c2, double c1, double c0) : shift_(c2 / 3.0) {
    const double p = c1 - c2 * shift_;
    const double q = 2.0 * shift_ * shift_ * shift_ - shift_ * c1 + c0;
    const double half_q = q / 2.0;
    const double third_p = p / 3.0;
    const double disc = half_q * half_q + third_p * third_p * third_p;
    if (disc <= 0.0 && p < 0.0) {
      three_ = true;
      m_ = 2.0 * std::sqrt(-third_p);
      phi_ = std::acos(std::clamp(3.0 * q / (p * m_), -1.0, 1.0)) / 3.0;
    } else {
      // one real root; for the symmetric-definite problems here that only
      // happens through rounding near a double root, whose value is also
      // reported
      const double sq = std::sqrt(std::max(disc, 0.0));
      t_ = std::cbrt(-half_q + sq) + std::cbrt(-half_q - sq);
    }
  }
  int count() const { return three_ ? 3 : 2; }
  double operator[](int k) const {
    constexpr double kTwoThirdsPi = 2.0 * std::numbers::pi / 3.0;
    if (three_) return m_ * std::cos(phi_ - kTwoThirdsPi * k) - shift_;  // k = 0 is the largest
    return k == 0 ? std::max(t_, -t_ / 2.0) - shift_ : std::min(t_, -t_ / 2.0) - shift_;
  }

 private:
  double shift_;
  bool three_ = false;
  double m_ = 0.0, phi_ = 0.0, t_ = 0.0;
};

// Null vector of (m - lambda I) from the best-conditioned cross product of its rows.
bool eigenvector(const Matrix3d& m, double lambda, Vector3d& out) {
  Matrix3d n = m;
  n.diagonal().array() -= lambda;
  const Vector3d r0 = n.row(0), r1 = n.row(1), r2 = n.row(2);
  const std::array<Vector3d, 3> cands = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (cands[i].squaredNorm() > cands[best].squaredNorm()) best = i;
  const double norm = cands[best].norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return false;
  out = cands[best] / norm;
  return true;
}

}  // namespace

void ScatterAccumulator::add(double x, double y) {
  const double u = x - origin_.x();
  const double v = y - origin_.y();
  const double uu = u * u, uv = u * v, vv = v * v;
  sums_.x4 += uu * uu;
  sums_.x3y += uu * uv;
  sums_.x2y2 += uu * vv;
  sums_.xy3 += uv * vv;
  sums_.y4 += vv * vv;
  sums_.x3 += uu * u;
  sums_.x2y += uu * v;
  sums_.xy2 += u * vv;
  sums_.y3 += vv * v;
  sums_.x2 += uu;
  sums_.xy += uv;
  sums_.y2 += vv;
  sums_.x += u;
  sums_.y += v;
  sums_.one += 1.0;
  ++n_;
}

void ScatterAccumulator::remove(double x, double y) {
  if (n_ == 0) throw std::logic_error("ScatterAccumulator::remove on empty accumulator");
  if (n_ == 1) {
    reset();
    return;
  }
  const double u = x - origin_.x();
  const double v = y - origin_.y();
  const double uu = u * u, uv = u * v, vv = v * v;
  sums_.x4 -= uu * uu;
  sums_.x3y -= uu * uv;
  sums_.x2y2 -= uu * vv;
  sums_.xy3 -= uv * vv;
  sums_.y4 -= vv * vv;
  sums_.x3 -= uu * u;
  sums_.x2y -= uu * v;
  sums_.xy2 -= u * vv;
  sums_.y3 -= vv * v;
  sums_.x2 -= uu;
  sums_.xy -= uv;
  sums_.y2 -= vv;
  sums_.x -= u;
  sums_.y -= v;
  sums_.one -= 1.0;
  --n_;
}

ConicCoefficients ConicCoefficients::normalized() const {
  const double norm = std::sqrt(a * a + b * b + c * c + d * d + e * e + f * f);
  const double s = (a + c < 0.0 ? -1.0 : 1.0) / norm;
  return {a * s, b * s, c * s, d * s, e * s, f * s};
}

ConicCoefficients ConicCoefficients::to_absolute(const Vec2& origin) const {
  const double ox = origin.x(), oy = origin.y();
  ConicCoefficients w = *this;
  w.d = d - 2.0 * a * ox - b * oy;
  w.e = e - b * ox - 2.0 * c * oy;
  w.f = f + a * ox * ox + b * ox * oy + c * oy * oy - d * ox - e * oy;
  return w;
}

ConicCoefficients GeometricEllipse2D::to_conic() const {
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double ia = 1.0 / (r_major * r_major), ib = 1.0 / (r_minor * r_minor);
  ConicCoefficients k;
  k.a = cs * cs * ia + sn * sn * ib;
  k.b = 2.0 * cs * sn * (ia - ib);
  k.c = sn * sn * ia + cs * cs * ib;
  k.d = -2.0 * k.a * cx - k.b * cy;
  k.e = -k.b * cx - 2.0 * k.c * cy;
  k.f = k.a * cx * cx + k.b * cx * cy + k.c * cy * cy - 1.0;
  return k;
}

std::optional<ConicCoefficients> fit_local(const ScatterAccumulator& acc, int min_points) {
  if (acc.count() < std::max(min_points, kMinConicPoints)) return std::nullopt;
  const PowerSums& s = acc.sums();

  Matrix3d s1, s2, s3;
  s1 << s.x4, s.x3y, s.x2y2,
        s.x3y, s.x2y2, s.xy3,
        s.x2y2, s.xy3, s.y4;
  s2 << s.x3, s.x2y, s.x2,
        s.x2y, s.xy2, s.xy,
        s.xy2, s.y3, s.y2;
  s3 << s.x2, s.xy, s.x,
        s.xy, s.y2, s.y,
        s.x, s.y, s.one;

  // symmetric adjugate
  const double c00 = s.y2 * s.one - s.y * s.y, c01 = s.x * s.y - s.xy * s.one, c02 = s.xy * s.y - s.x * s.y2;
  const double c11 = s.x2 * s.one - s.x * s.x, c12 = s.xy * s.x - s.x2 * s.y, c22 = s.x2 * s.y2 - s.xy * s.xy;
  const double det3 = s.x2 * c00 + s.xy * c01 + s.x * c02;
  if (nearly_singular(s3, det3)) return std::nullopt;
  Matrix3d inv3;
  inv3 << c00, c01, c02,
          c01, c11, c12,
          c02, c12, c22;
  inv3 /= det3;

  // Linear coefficients follow from the quadratic ones: a2 = t * a1.
  const Matrix3d t = -(inv3 * s2.transpose());
  const Matrix3d reduced = s1 + s2 * t;

  // Premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]].
  Matrix3d m;
  m.row(0) = reduced.row(2) / 2.0;
  m.row(1) = -reduced.row(1);
  m.row(2) = reduced.row(0) / 2.0;

  const double tr = m.trace();
  const double minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) -
                        m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  const CubicRoots roots(-tr, minors, -m.determinant());

  // The ellipse is the eigenvector of the one positive eigenvalue (the largest
  // root, or the one nearest zero for exact data); try it before the rest.
  bool found = false;
  Vector3d best;
  double best_lambda = 0.0;
  for (int i = 0; i < roots.count(); ++i) {
    const double lambda = roots[i];
    Vector3d v;
    if (!eigenvector(m, lambda, v)) continue;
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (!(cond > 0.0)) continue;
    if (!found || std::abs(lambda) < std::abs(best_lambda)) {
      best = v;
      best_lambda = lambda;
      found = true;
    }
    if (i == 0) break;
  }
  if (!found) return std::nullopt;

  const Vector3d lin = t * best;
  ConicCoefficients k{best(0), best(1), best(2), lin(0), lin(1), lin(2)};
  if (!std::isfinite(k.a + k.b + k.c + k.d + k.e + k.f)) return std::nullopt;
  return k.normalized();
}

std::optional<ConicCoefficients> fit(const ScatterAccumulator& acc, int min_points) {
  auto local = fit_local(acc, min_points);
  if (!local) return std::nullopt;
  return local->to_absolute(acc.origin()).normalized();
}

std::optional<ConicCoefficients> fit_points(std::span<const Vec2> points, int min_points) {
  if (points.empty()) return std::nullopt;
  ScatterAccumulator acc(points.front());
  for (const auto& p : points) acc.add(p);
  return fit(acc, min_points);
}

double rms_residual(const ScatterAccumulator& acc, const ConicCoefficients& k) {
  if (acc.count() == 0) return 0.0;
  const PowerSums& s = acc.sums();
  // sum F^2 = a^T S a with S = D^T D
  const double a = k.a, b = k.b, c = k.c, d = k.d, e = k.e, f = k.f;
  const double sum_f2 =
      a * a * s.x4 + b * b * s.x2y2 + c * c * s.y4 + d * d * s.x2 + e * e * s.y2 + f * f * s.one +
      2.0 * (a * b * s.x3y + a * c * s.x2y2 + a * d * s.x3 + a * e * s.x2y + a * f * s.x2 +
             b * c * s.xy3 + b * d * s.x2y + b * e * s.xy2 + b * f * s.xy + c * d * s.xy2 +
             c * e * s.y3 + c * f * s.y2 + d * e * s.xy + d * f * s.x + e * f * s.y);
  // sum |grad F|^2
  const double sum_g2 = (4 * a * a + b * b) * s.x2 + (b * b + 4 * c * c) * s.y2 +
                        4 * b * (a + c) * s.xy + (4 * a * d + 2 * b * e) * s.x +
                        (2 * b * d + 4 * c * e) * s.y + (d * d + e * e) * s.one;
  if (!(sum_g2 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(sum_f2, 0.0) / sum_g2);
}

std::optional<GeometricEllipse2D> to_geometric(const ConicCoefficients& conic) {
  ConicCoefficients k = conic;
  if (!(k.discriminant() < 0.0)) return std::nullopt;
  if (k.a + k.c < 0.0) k = {-k.a, -k.b, -k.c, -k.d, -k.e, -k.f};

  const double det = 4.0 * k.a * k.c - k.b * k.b;
  GeometricEllipse2D g;
  g.cx = (k.b * k.e - 2.0 * k.c * k.d) / det;
  g.cy = (k.b * k.d - 2.0 * k.a * k.e) / det;
  const double value_at_center = k.f + (k.d * g.cx + k.e * g.cy) / 2.0;

  const double mean = (k.a + k.c) / 2.0;
  const double half_diff = std::hypot((k.a - k.c) / 2.0, k.b / 2.0);
  const double lambda_small = mean - half_diff;
  const double lambda_large = mean + half_diff;
  if (!(lambda_small > 0.0) || !(value_at_center < 0.0)) return std::nullopt;

  g.r_major = std::sqrt(-value_at_center / lambda_small);
  g.r_minor = std::sqrt(-value_at_center / lambda_large);
  if (!std::isfinite(g.r_major) || !std::isfinite(g.r_minor)) return std::nullopt;

  if (half_diff <= 1e-12 * mean) {
    g.theta = 0.0;
  } else {
    // 0.5 atan2(b, a - c) is the direction of the larger eigenvalue (minor axis)
    double theta = 0.5 * std::atan2(k.b, k.a - k.c) + std::numbers::pi / 2.0;
    theta = std::fmod(theta, std::numbers::pi);
    if (theta < 0.0) theta += std::numbers::pi;
    g.theta = theta;
  }
  return g;
}

double point_error(const GeometricEllipse2D& e, double x, double y) {
  const double cs = std::cos(e.theta), sn = std::sin(e.theta);
  const double dx = x - e.cx, dy = y - e.cy;
  const double u = cs * dx + sn * dy;
  const double v = -sn * dx + cs * dy;
  const double a2 = e.r_major * e.r_major, b2 = e.r_minor * e.r_minor;
  // k is the radial scale of the point: the boundary is k = 1
  const double k = std::sqrt(u * u / a2 + v * v / b2);
  if (k < 1e-12) return e.r_minor;
  const double grad = std::hypot(u / (a2 * k), v / (b2 * k));
  return std::abs(k - 1.0) / grad;
}

std::optional<CircleFit> fit_circle(const ScatterAccumulator& acc) {
  if (acc.count() < 3) return std::nullopt;
  const PowerSums& s = acc.sums();
  Matrix3d s3;
  s3 << s.x2, s.xy, s.x,
        s.xy, s.y2, s.y,
        s.x, s.y, s.one;
  const double det = s3.determinant();
  if (nearly_singular(s3, det)) return std::nullopt;
  const Vector3d rhs(-(s.x3 + s.xy2), -(s.x2y + s.y3), -(s.x2 + s.y2));
  const Vector3d def = s3.inverse() * rhs;
  const Vec2 center(-def(0) / 2.0, -def(1) / 2.0);
  const double r2 = center.squaredNorm() - def(2);
  if (!(r2 > 0.0) || !std::isfinite(r2)) return std::nullopt;
  return CircleFit{center + acc.origin(), std::sqrt(r2)};
}

}  // namespace conicscan
