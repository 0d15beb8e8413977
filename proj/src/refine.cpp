#include "conicscan/classify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace conicscan {
namespace {

constexpr size_t kMaxRefinePoints = 600;
constexpr double kHuber = 2.5;
constexpr double kConverged = 1e-6;  // relative cost decrease that ends the iteration
constexpr double kInlierSigmas = 3.0;
constexpr int kTrimRounds = 2;
constexpr size_t kMinRefinePoints = 10;

// Any unit vector orthogonal to a, and a third completing the basis.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& a) {
  const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = a.cross(helper).normalized();
  return {u, a.cross(u)};
}

struct SphereModel {
  static constexpr int N = 4;
  Vec3 c;
  double r;
  SphereModel apply(const Eigen::Matrix<double, N, 1>& d) const { return {c + d.head<3>(), r + d(3)}; }
  double residual(const Vec3& p) const { return (p - c).norm() - r; }
};

struct CylinderModel {
  static constexpr int N = 5;
  Vec3 o, a;
  double r;
  CylinderModel apply(const Eigen::Matrix<double, N, 1>& d) const {
    const auto [u, v] = orthonormal_basis(a);
    return {o + d(0) * u + d(1) * v, (a + d(2) * u + d(3) * v).normalized(), r + d(4)};
  }
  double residual(const Vec3& p) const {
    const Vec3 q = p - o;
    return (q - q.dot(a) * a).norm() - r;
  }
};

struct ConeModel {
  static constexpr int N = 6;
  Vec3 apex, a;  // a points from the apex into the cone
  double alpha;
  ConeModel apply(const Eigen::Matrix<double, N, 1>& d) const {
    const auto [u, v] = orthonormal_basis(a);
    return {apex + d.head<3>(), (a + d(3) * u + d(4) * v).normalized(), alpha + d(5)};
  }
  double residual(const Vec3& p) const {
    const Vec3 q = p - apex;
    const double h = q.dot(a);
    const double rho = (q - h * a).norm();
    return rho * std::cos(alpha) - h * std::sin(alpha);
  }
};

double robust_scale(std::vector<double> abs_res) {
  auto mid = abs_res.begin() + abs_res.size() / 2;
  std::nth_element(abs_res.begin(), mid, abs_res.end());
  return std::max(1.4826 * *mid, 1e-4);
}

template <typename Model>
double weighted_cost(const Model& m, std::span<const Vec3> pts, double scale) {
  double cost = 0.0;
  const double k = kHuber * scale;
  for (const auto& p : pts) {
    const double r = std::abs(m.residual(p));
    cost += r <= k ? 0.5 * r * r : k * (r - 0.5 * k);
  }
  return cost;
}

// Levenberg-Marquardt with numeric Jacobians and Huber weights. Returns the
// robust scale of the final residuals, or a negative value on failure.
template <typename Model>
double fit_model(Model& model, std::span<const Vec3> pts, int iterations) {
  constexpr int N = Model::N;
  using VecN = Eigen::Matrix<double, N, 1>;
  using MatN = Eigen::Matrix<double, N, N>;
  constexpr double h = 1e-6;

  auto scale_of = [&](const Model& m) {
    std::vector<double> a(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) a[i] = std::abs(m.residual(pts[i]));
    return robust_scale(std::move(a));
  };

  double lambda = 1e-3;
  double scale = scale_of(model);
  double cost = weighted_cost(model, pts, scale);
  for (int it = 0; it < iterations; ++it) {
    MatN jtj = MatN::Zero();
    VecN jtr = VecN::Zero();
    std::array<Model, 2 * N> probes;
    for (int j = 0; j < N; ++j) {
      VecN d = VecN::Zero();
      d(j) = h;
      probes[2 * j] = model.apply(d);
      probes[2 * j + 1] = model.apply(-d);
    }
    const double k = kHuber * scale;
    for (const auto& p : pts) {
      const double r = model.residual(p);
      VecN jrow;
      for (int j = 0; j < N; ++j) jrow(j) = (probes[2 * j].residual(p) - probes[2 * j + 1].residual(p)) / (2.0 * h);
      const double w = std::abs(r) <= k ? 1.0 : k / std::abs(r);
      jtj.noalias() += w * jrow * jrow.transpose();
      jtr.noalias() += w * r * jrow;
    }

    bool improved = false;
    for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
      MatN damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const VecN step = damped.ldlt().solve(-jtr);
      if (!step.allFinite()) return -1.0;
      const Model trial = model.apply(step);
      const double trial_cost = weighted_cost(trial, pts, scale);
      if (trial_cost < cost) {
        model = trial;
        const bool converged = cost - trial_cost <= kConverged * cost;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-9);
        improved = true;
        if (converged) return scale_of(model);
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
    scale = scale_of(model);
    cost = weighted_cost(model, pts, scale);
  }
  return scale_of(model);
}

// Huber alone leaves structured outliers (floor pixels at a contact line)
// pulling on the fit; refit on the points within kInlierSigmas.
template <typename Model>
double fit_trimmed(Model& model, std::span<const Vec3> pts, int iterations) {
  double scale = fit_model(model, pts, iterations);
  for (int round = 0; round < kTrimRounds && scale > 0.0; ++round) {
    std::vector<Vec3> keep;
    for (const auto& p : pts)
      if (std::abs(model.residual(p)) <= kInlierSigmas * scale) keep.push_back(p);
    if (keep.size() < kMinRefinePoints || keep.size() == pts.size()) break;
    Model trial = model;
    const double s = fit_model(trial, keep, iterations);
    if (s < 0.0) break;
    model = trial;
    scale = s;
  }
  return scale;
}

std::vector<Vec3> subsample(std::span<const Vec3> points) {
  if (points.size() <= kMaxRefinePoints) return {points.begin(), points.end()};
  std::vector<Vec3> out;
  out.reserve(kMaxRefinePoints);
  const double stride = static_cast<double>(points.size()) / kMaxRefinePoints;
  for (size_t i = 0; i < kMaxRefinePoints; ++i) out.push_back(points[static_cast<size_t>(i * stride)]);
  return out;
}

template <typename Model>
std::pair<double, double> inlier_extent(const Model& m, std::span<const Vec3> pts, double scale,
                                        const auto& coordinate) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) {
    if (std::abs(m.residual(p)) > kInlierSigmas * scale) continue;
    const double z = coordinate(p);
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  return {lo, hi};
}

// Azimuth bins over the half facing the camera; a bin counts once it holds
// kBinPoints inliers.
constexpr int kAzimuthBins = 18;
constexpr int kDiscCells = 6;
constexpr int kBinPoints = 2;

template <typename Model>
double axial_coverage(const Model& m, const Vec3& on_axis, const Vec3& axis, std::span<const Vec3> pts, double scale) {
  std::array<int, kAzimuthBins> bins{};
  for (const auto& p : pts) {
    if (std::abs(m.residual(p)) > kInlierSigmas * scale) continue;
    const Vec3 foot = on_axis + (p - on_axis).dot(axis) * axis;
    const Vec3 radial = p - foot;
    Vec3 view = -foot - (-foot).dot(axis) * axis;
    if (view.norm() < 1e-9) continue;
    view.normalize();
    const double az = std::atan2(radial.dot(axis.cross(view)), radial.dot(view));
    if (std::abs(az) >= std::numbers::pi / 2) continue;
    const int b = static_cast<int>((az + std::numbers::pi / 2) / std::numbers::pi * kAzimuthBins);
    ++bins[static_cast<size_t>(std::clamp(b, 0, kAzimuthBins - 1))];
  }
  return static_cast<double>(std::count_if(bins.begin(), bins.end(), [](int c) { return c >= kBinPoints; })) /
         kAzimuthBins;
}

double sphere_coverage(const SphereModel& m, std::span<const Vec3> pts, double scale) {
  const Vec3 view = -m.c.normalized();
  const auto [e1, e2] = orthonormal_basis(view);
  std::array<int, kDiscCells * kDiscCells> cells{};
  for (const auto& p : pts) {
    if (std::abs(m.residual(p)) > kInlierSigmas * scale) continue;
    const Vec3 u = (p - m.c).normalized();
    const int i = std::clamp(static_cast<int>((u.dot(e1) + 1.0) / 2.0 * kDiscCells), 0, kDiscCells - 1);
    const int j = std::clamp(static_cast<int>((u.dot(e2) + 1.0) / 2.0 * kDiscCells), 0, kDiscCells - 1);
    ++cells[static_cast<size_t>(i * kDiscCells + j)];
  }
  int inside = 0, hit = 0;
  for (int i = 0; i < kDiscCells; ++i)
    for (int j = 0; j < kDiscCells; ++j) {
      const double x = (i + 0.5) / kDiscCells * 2.0 - 1.0, y = (j + 0.5) / kDiscCells * 2.0 - 1.0;
      if (x * x + y * y > 1.0) continue;
      ++inside;
      if (cells[static_cast<size_t>(i * kDiscCells + j)] >= kBinPoints) ++hit;
    }
  return static_cast<double>(hit) / inside;
}

// The ellipse-based estimate and the surface fit must roughly agree; a
// cross-section seen over too little of its arc fails here.
constexpr double kMaxRadiusChange = 2.0;

bool plausible(double before, double after) {
  return std::isfinite(after) && after * kMaxRadiusChange > before && after < kMaxRadiusChange * before;
}

}  // namespace

bool contains(const Primitive& prim, const Vec3& p, double margin) {
  if (const auto* s = std::get_if<Sphere>(&prim.shape)) return (p - s->center).norm() <= margin * s->radius;
  if (const auto* c = std::get_if<Cylinder>(&prim.shape)) {
    const double z = c->axis.project(p);
    return c->axis.distance(p) <= margin * c->radius && z >= c->z_min - 0.5 * c->radius &&
           z <= c->z_max + 0.5 * c->radius;
  }
  // the body of a cone reaches from the apex to the base, seen or not
  const auto& k = std::get<Cone>(prim.shape);
  const double h = (p - k.apex).dot(k.axis.direction);
  if (h <= 0.0) return false;
  const double local = h * std::tan(k.half_angle);
  const double h_max = (k.axis.at(k.z_max) - k.apex).dot(k.axis.direction);
  return k.axis.distance(p) <= margin * local && h <= h_max + 0.5 * local;
}

std::vector<Primitive> suppress_nested(std::vector<Primitive> prims) {
  std::stable_sort(prims.begin(), prims.end(), [](const Primitive& a, const Primitive& b) { return a.support > b.support; });
  std::vector<Primitive> kept;
  for (auto& p : prims) {
    const Vec3 at = p.position();
    if (std::none_of(kept.begin(), kept.end(), [&](const Primitive& k) { return contains(k, at); }))
      kept.push_back(std::move(p));
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Primitive& a, const Primitive& b) { return a.first_row < b.first_row; });
  return kept;
}

std::vector<Vec3> support_points(const DepthFrame& frame, const EllipseChain& chain, std::span<const int> rows) {
  std::vector<Vec3> out;
  const auto& k = frame.intrinsics();
  for (const auto& e : chain.ellipses)
    if (rows.empty() || std::binary_search(rows.begin(), rows.end(), e.row))
      for (int u = e.first_column; u <= e.last_column; ++u)
      if (frame.valid(e.row, u)) out.push_back(backproject(k, u, e.row, frame.at(e.row, u)));
  return out;
}

namespace {
std::optional<Primitive> refine_impl(const Primitive& prim, std::span<const Vec3> points, int iterations);
}

std::optional<Primitive> refine(const Primitive& prim, std::span<const Vec3> points, int iterations) {
  auto out = refine_impl(prim, points, iterations);
  // a refit that wanders off the chain it started from is not trusted
  if (out && ((out->position() - prim.position()).norm() > std::max(prim.radius(), out->radius()) ||
              !plausible(prim.radius(), out->radius())))
    return std::nullopt;
  return out;
}

namespace {

std::optional<Primitive> refine_impl(const Primitive& prim, std::span<const Vec3> points, int iterations) {
  const auto pts = subsample(points);
  if (pts.size() < kMinRefinePoints) return std::nullopt;
  Primitive out = prim;

  if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
    SphereModel m{s->center, s->radius};
    const double scale = fit_trimmed(m, pts, iterations);
    if (scale < 0.0 || !plausible(s->radius, m.r)) return std::nullopt;
    out.shape = Sphere{m.c, m.r};
    out.surface_residual = scale;
    out.coverage = sphere_coverage(m, pts, scale);
    return out;
  }

  if (const auto* c = std::get_if<Cylinder>(&prim.shape)) {
    CylinderModel m{c->axis.anchor, c->axis.direction, c->radius};
    const double scale = fit_trimmed(m, pts, iterations);
    if (scale < 0.0 || !plausible(c->radius, m.r)) return std::nullopt;
    Cylinder cyl;
    cyl.axis.direction = m.a.dot(c->axis.direction) < 0.0 ? Vec3(-m.a) : m.a;
    cyl.axis.anchor = m.o + (c->axis.anchor - m.o).dot(cyl.axis.direction) * cyl.axis.direction;
    cyl.radius = m.r;
    std::tie(cyl.z_min, cyl.z_max) =
        inlier_extent(m, pts, scale, [&](const Vec3& p) { return cyl.axis.project(p); });
    if (!(cyl.z_max > cyl.z_min)) return std::nullopt;
    out.shape = cyl;
    out.surface_residual = scale;
    out.coverage = axial_coverage(m, m.o, m.a, pts, scale);
    return out;
  }

  const auto& k = std::get<Cone>(prim.shape);
  ConeModel m{k.apex, k.axis.direction, k.half_angle};
  const double scale = fit_trimmed(m, pts, iterations);
  if (scale < 0.0 || !(m.alpha > 0.0 && m.alpha < std::numbers::pi / 2) || !plausible(k.half_angle, m.alpha))
    return std::nullopt;
  Cone cone;
  cone.apex = m.apex;
  cone.axis.anchor = m.apex;
  cone.axis.direction = m.a;
  cone.half_angle = m.alpha;
  std::tie(cone.z_min, cone.z_max) =
      inlier_extent(m, pts, scale, [&](const Vec3& p) { return (p - m.apex).dot(m.a); });
  cone.z_min = std::max(cone.z_min, 0.0);
  if (!(cone.z_max > cone.z_min)) return std::nullopt;
  cone.apex_reliable = k.apex_reliable;
  out.shape = cone;
  out.surface_residual = scale;
  out.coverage = axial_coverage(m, m.apex, m.a, pts, scale);
  return out;
}

}  // namespace

}  // namespace conicscan
