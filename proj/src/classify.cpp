#include "conicscan/classify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace conicscan {
namespace {

// Outlier trimming: |residual| above kTrimSigmas robust sigmas (and above
// kTrimFloor meters) is dropped, unless that would drop more than
// kMaxTrimFraction of the points.
constexpr double kTrimSigmas = 3.5;
constexpr double kTrimFloor = 0.003;
constexpr double kMaxTrimFraction = 0.25;
constexpr int kMinModelPoints = 3;
constexpr int kGaussNewtonSteps = 8;

double rms(const std::vector<double>& res, const std::vector<bool>& mask) {
  double ss = 0.0;
  int n = 0;
  for (size_t i = 0; i < res.size(); ++i)
    if (mask[i]) {
      ss += res[i] * res[i];
      ++n;
    }
  return n ? std::sqrt(ss / n) : 0.0;
}

double median(std::vector<double> v) {
  auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Returns true when the mask changed.
bool trim(const std::vector<double>& res, std::vector<bool>& mask) {
  std::vector<double> abs_res;
  for (double r : res) abs_res.push_back(std::abs(r));
  std::vector<double> sorted = abs_res;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double mad = sorted[sorted.size() / 2];
  const double threshold = std::max(kTrimSigmas * 1.4826 * mad, kTrimFloor);
  std::vector<bool> next(res.size());
  int dropped = 0;
  for (size_t i = 0; i < res.size(); ++i) {
    next[i] = abs_res[i] <= threshold;
    if (!next[i]) ++dropped;
  }
  const int n = static_cast<int>(res.size());
  if (dropped == 0 || dropped > kMaxTrimFraction * n || n - dropped < kMinModelPoints) return false;
  mask = std::move(next);
  return true;
}

struct LineModel {
  double slope = 0, intercept = 0;
};

bool fit_line_masked(std::span<const ZRPoint> pts, const std::vector<bool>& mask, LineModel& m) {
  double sz = 0, sr = 0, szz = 0, szr = 0;
  int n = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!mask[i]) continue;
    sz += pts[i].z;
    sr += pts[i].r;
    szz += pts[i].z * pts[i].z;
    szr += pts[i].z * pts[i].r;
    ++n;
  }
  if (n < 2) return false;
  const double mz = sz / n, mr = sr / n;
  const double var = szz / n - mz * mz;
  if (!(var > 1e-18)) return false;
  m.slope = (szr / n - mz * mr) / var;
  m.intercept = mr - m.slope * mz;
  return true;
}

std::vector<double> line_residuals(std::span<const ZRPoint> pts, const LineModel& m) {
  std::vector<double> res(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) res[i] = pts[i].r - (m.slope * pts[i].z + m.intercept);
  return res;
}

struct CircleModel {
  double z0 = 0, radius = 0;
};

// Circle centered on the z axis: algebraic start, then Gauss-Newton on the
// geometric residual sqrt((z - z0)^2 + r^2) - R.
bool fit_circle_masked(std::span<const ZRPoint> pts, const std::vector<bool>& mask, CircleModel& m) {
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d atb = Eigen::Vector2d::Zero();
  int n = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!mask[i]) continue;
    const Eigen::Vector2d row(2.0 * pts[i].z, 1.0);
    const double target = pts[i].z * pts[i].z + pts[i].r * pts[i].r;
    ata += row * row.transpose();
    atb += row * target;
    ++n;
  }
  if (n < kMinModelPoints || !(std::abs(ata.determinant()) > 1e-18)) return false;
  const Eigen::Vector2d sol = ata.ldlt().solve(atb);
  double z0 = sol(0);
  double r2 = sol(1) + z0 * z0;
  if (!(r2 > 0.0)) return false;
  double radius = std::sqrt(r2);

  for (int it = 0; it < kGaussNewtonSteps; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!mask[i]) continue;
      const double dz = pts[i].z - z0;
      const double rho = std::hypot(dz, pts[i].r);
      if (rho <= 0.0) continue;
      const Eigen::Vector2d j(-dz / rho, -1.0);
      const double res = rho - radius;
      jtj += j * j.transpose();
      jtr += j * res;
    }
    const Eigen::Vector2d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    z0 += step(0);
    radius += step(1);
    if (step.norm() < 1e-12) break;
  }
  if (!(radius > 0.0) || !std::isfinite(z0)) return false;
  m.z0 = z0;
  m.radius = radius;
  return true;
}

std::vector<double> circle_residuals(std::span<const ZRPoint> pts, const CircleModel& m) {
  std::vector<double> res(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) res[i] = std::hypot(pts[i].z - m.z0, pts[i].r) - m.radius;
  return res;
}

void fit_line_model(std::span<const ZRPoint> pts, ZRModels& out) {
  std::vector<bool> mask(pts.size(), true);
  LineModel m;
  if (pts.size() < kMinModelPoints || !fit_line_masked(pts, mask, m)) return;
  if (trim(line_residuals(pts, m), mask) && !fit_line_masked(pts, mask, m)) return;
  out.line_ok = true;
  out.slope = m.slope;
  out.intercept = m.intercept;
  out.line_residual = rms(line_residuals(pts, m), mask);
  out.line_inliers = std::move(mask);
}

void fit_circle_model(std::span<const ZRPoint> pts, ZRModels& out) {
  std::vector<bool> mask(pts.size(), true);
  CircleModel m;
  if (pts.size() < kMinModelPoints || !fit_circle_masked(pts, mask, m)) return;
  if (trim(circle_residuals(pts, m), mask) && !fit_circle_masked(pts, mask, m)) return;
  out.circle_ok = true;
  out.z0 = m.z0;
  out.sphere_radius = m.radius;
  out.circle_residual = rms(circle_residuals(pts, m), mask);
  out.circle_inliers = std::move(mask);
}

double unwrap(double angle, double reference) {
  double d = std::remainder(angle - reference, 2.0 * std::numbers::pi);
  return reference + d;
}

int count_true(const std::vector<bool>& v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

bool radius_ok(double r, const ClassifierConfig& cfg) { return r >= cfg.radius_min && r <= cfg.radius_max; }

}  // namespace

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Cone: return "cone";
    case PrimitiveKind::Sphere: return "sphere";
  }
  return "unknown";
}

Vec3 Primitive::position() const {
  if (const auto* s = std::get_if<Sphere>(&shape)) return s->center;
  if (const auto* c = std::get_if<Cylinder>(&shape)) return c->axis.at(0.5 * (c->z_min + c->z_max));
  const auto& k = std::get<Cone>(shape);
  return k.axis.at(0.5 * (k.z_min + k.z_max));
}

double Primitive::radius() const {
  if (const auto* s = std::get_if<Sphere>(&shape)) return s->radius;
  if (const auto* c = std::get_if<Cylinder>(&shape)) return c->radius;
  const auto& k = std::get<Cone>(shape);
  return std::tan(k.half_angle) * (position() - k.apex).norm();
}

void ClassifierConfig::validate() const {
  if (!(cylinder_slope_tol > 0.0) || !(cone_slope_min > 0.0) || cylinder_slope_tol > cone_slope_min)
    throw std::invalid_argument("classifier: need 0 < cylinder slope tol <= cone slope min");
  if (!(zr_residual_tol > 0.0)) throw std::invalid_argument("classifier: residual tolerance must be positive");
  if (!(apex_range_factor > 0.0)) throw std::invalid_argument("classifier: apex range factor must be positive");
  if (!(radius_min > 0.0) || !(radius_min < radius_max))
    throw std::invalid_argument("classifier: need 0 < radius_min < radius_max");
  if (!(min_extent_ratio >= 0.0)) throw std::invalid_argument("classifier: min extent ratio must be non-negative");
  if (!(split_residual > 0.0) || split_depth < 0 || min_segment < 3)
    throw std::invalid_argument("classifier: bad split parameters");
}

ZRModels fit_zr_models(std::span<const ZRPoint> line_points, std::span<const ZRPoint> circle_points) {
  ZRModels out;
  fit_line_model(line_points, out);
  fit_circle_model(circle_points, out);
  return out;
}

ZRDecision decide(const ZRModels& m, const ClassifierConfig& cfg) {
  const bool line_wins = m.line_ok && (!m.circle_ok || m.line_residual <= m.circle_residual);
  if (line_wins) {
    if (m.line_residual > cfg.zr_residual_tol) return ZRDecision::None;
    const double angle = std::atan(std::abs(m.slope));
    if (angle <= cfg.cylinder_slope_tol) return ZRDecision::Cylinder;
    if (angle > cfg.cone_slope_min) return ZRDecision::Cone;
    return ZRDecision::None;
  }
  if (m.circle_ok && m.circle_residual <= cfg.zr_residual_tol) return ZRDecision::Sphere;
  return ZRDecision::None;
}

ZRDecision classify_zr(std::span<const ZRPoint> points, const ClassifierConfig& cfg, ZRModels* models) {
  ZRModels m = fit_zr_models(points, points);
  const ZRDecision d = decide(m, cfg);
  if (models) *models = std::move(m);
  return d;
}

namespace {

// Scan planes all contain the camera x axis, so the x coordinate of the
// section centers varies linearly along any of the three shapes and is far
// less noisy than their depth. Segments that bridge a contact crease with
// the floor show up as lateral outliers.
EllipseChain drop_lateral_outliers(const EllipseChain& chain) {
  const auto centers = chain.centers();
  const auto line = fit_line(centers);
  if (!line) return chain;
  const size_t n = centers.size();
  std::vector<double> z(n);
  for (size_t i = 0; i < n; ++i) z[i] = line->line.project(centers[i]);
  // Median of slopes between members half a chain apart: a least-squares
  // line is dragged by the very outliers sought.
  std::vector<double> slopes;
  const size_t half = n / 2;
  for (size_t i = 0; i + half < n; ++i) {
    const size_t j = i + half;
    if (std::abs(z[j] - z[i]) > 1e-9) slopes.push_back((centers[j].x() - centers[i].x()) / (z[j] - z[i]));
  }
  const double b = slopes.empty() ? 0.0 : median(slopes);
  std::vector<double> offsets(n);
  for (size_t i = 0; i < n; ++i) offsets[i] = centers[i].x() - b * z[i];
  const double a = median(offsets);
  std::vector<double> res(n);
  for (size_t i = 0; i < n; ++i) res[i] = offsets[i] - a;
  std::vector<bool> keep(n, true);
  if (!trim(res, keep)) return chain;
  EllipseChain out;
  for (size_t i = 0; i < n; ++i)
    if (keep[i]) out.ellipses.push_back(chain.ellipses[i]);
  return out;
}

std::optional<Primitive> classify_members(const EllipseChain& chain, const ClassifierConfig& cfg);

}  // namespace

std::optional<Primitive> classify(const EllipseChain& chain, const ClassifierConfig& cfg) {
  if (chain.size() < static_cast<size_t>(kMinModelPoints)) return std::nullopt;
  auto p = classify_members(drop_lateral_outliers(chain), cfg);
  if (p) {
    p->first_row = chain.ellipses.front().row;
    p->last_row = chain.ellipses.back().row;
    p->zr_radius = p->radius();
  }
  return p;
}

namespace {

std::optional<Primitive> classify_members(const EllipseChain& chain, const ClassifierConfig& cfg) {
  if (chain.size() < static_cast<size_t>(kMinModelPoints)) return std::nullopt;
  const auto centers = chain.centers();
  const auto line = fit_line(centers);
  if (!line) return std::nullopt;

  const size_t n = chain.size();
  std::vector<ZRPoint> along_line(n);
  for (size_t i = 0; i < n; ++i)
    along_line[i] = {line->line.project(centers[i]), chain.ellipses[i].lateral_radius()};

  // Sphere cross-sections have their centers on a circle; measure z along it.
  const auto circle = fit_circle3d(centers);
  std::vector<double> angles;
  std::vector<ZRPoint> along_circle = along_line;
  if (circle) {
    angles.resize(n);
    angles[0] = circle->circle.angle_of(centers[0]);
    for (size_t i = 1; i < n; ++i) angles[i] = unwrap(circle->circle.angle_of(centers[i]), angles[i - 1]);
    for (size_t i = 0; i < n; ++i) along_circle[i].z = circle->circle.radius * (angles[i] - angles[0]);
  }

  ZRModels models = fit_zr_models(along_line, along_circle);
  double center_angle = 0.0;
  if (circle && models.circle_ok) {
    // Arc length overstates the distance from the sphere center slightly;
    // the chord to the point at z0 is exact.
    const double rho = circle->circle.radius;
    center_angle = angles[0] + models.z0 / rho;
    for (size_t i = 0; i < n; ++i) along_circle[i].z = 2.0 * rho * std::sin((angles[i] - center_angle) / 2.0);
    ZRModels refined;
    fit_circle_model(along_circle, refined);
    if (refined.circle_ok) {
      models.circle_ok = true;
      models.z0 = refined.z0;
      models.sphere_radius = refined.sphere_radius;
      models.circle_residual = refined.circle_residual;
      models.circle_inliers = refined.circle_inliers;
      // z0 is now a chord offset from center_angle
      center_angle += 2.0 * std::asin(std::clamp(models.z0 / (2.0 * rho), -1.0, 1.0));
    }
  }

  const ZRDecision decision = decide(models, cfg);
  if (decision == ZRDecision::None) return std::nullopt;

  Primitive p;
  p.first_row = chain.ellipses.front().row;
  p.last_row = chain.ellipses.back().row;
  const auto& inliers = decision == ZRDecision::Sphere ? models.circle_inliers : models.line_inliers;
  for (size_t i = 0; i < n; ++i)
    if (inliers[i]) p.rows.push_back(chain.ellipses[i].row);

  if (decision == ZRDecision::Sphere) {
    Sphere s;
    s.center = circle ? circle->circle.at(center_angle) : line->line.at(models.z0);
    s.radius = models.sphere_radius;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t i = 0; i < n; ++i)
      if (models.circle_inliers[i]) {
        lo = std::min(lo, along_circle[i].z);
        hi = std::max(hi, along_circle[i].z);
      }
    if (!radius_ok(s.radius, cfg) || hi - lo < cfg.min_extent_ratio * s.radius) return std::nullopt;
    p.shape = s;
    p.support = count_true(models.circle_inliers);
    p.residual = models.circle_residual;
    return p;
  }

  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -z_min;
  double r_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!models.line_inliers[i]) continue;
    z_min = std::min(z_min, along_line[i].z);
    z_max = std::max(z_max, along_line[i].z);
    r_sum += along_line[i].r;
  }
  p.support = count_true(models.line_inliers);
  p.residual = models.line_residual;

  if (decision == ZRDecision::Cylinder) {
    Cylinder c;
    c.axis = line->line;
    c.radius = r_sum / p.support;
    c.z_min = z_min;
    c.z_max = z_max;
    if (!radius_ok(c.radius, cfg) || z_max - z_min < cfg.min_extent_ratio * c.radius) return std::nullopt;
    p.shape = c;
    return p;
  }

  Cone k;
  k.axis = line->line;
  const double apex_z = -models.intercept / models.slope;
  k.apex = line->line.at(apex_z);
  k.half_angle = std::atan(std::abs(models.slope));
  const double extent = z_max - z_min;
  const double beyond = std::max({z_min - apex_z, apex_z - z_max, 0.0});
  k.apex_reliable = beyond <= cfg.apex_range_factor * extent;
  if (models.slope < 0.0) {
    k.axis.direction = -k.axis.direction;
    k.z_min = -z_max;
    k.z_max = -z_min;
  } else {
    k.z_min = z_min;
    k.z_max = z_max;
  }
  p.shape = k;
  if (!radius_ok(p.radius(), cfg) || extent < cfg.min_extent_ratio * p.radius()) return std::nullopt;
  return p;
}

EllipseChain slice(const EllipseChain& chain, size_t begin, size_t end) {
  EllipseChain out;
  out.ellipses.assign(chain.ellipses.begin() + static_cast<long>(begin), chain.ellipses.begin() + static_cast<long>(end));
  return out;
}

void segment_chain(const EllipseChain& chain, size_t begin, size_t end, const ClassifierConfig& cfg, int depth,
                   std::vector<Primitive>& out) {
  const auto whole = classify(slice(chain, begin, end), cfg);
  const size_t n = end - begin;
  const size_t part = static_cast<size_t>(cfg.min_segment);
  const bool good_enough = whole && whole->residual <= cfg.split_residual * cfg.zr_residual_tol;
  if (depth == 0 || n < 2 * part || good_enough) {
    if (whole) out.push_back(*whole);
    return;
  }

  size_t best_split = 0;
  int best_support = 0;
  double best_rms = std::numeric_limits<double>::infinity();
  bool best_both = false;
  for (size_t s = begin + part; s + part <= end; ++s) {
    const auto a = classify(slice(chain, begin, s), cfg);
    const auto b = classify(slice(chain, s, end), cfg);
    if (!a && !b) continue;
    const int support = (a ? a->support : 0) + (b ? b->support : 0);
    double ss = 0.0;
    for (const auto* p : {&a, &b})
      if (*p) ss += (*p)->residual * (*p)->residual * (*p)->support;
    const double rms = std::sqrt(ss / support);
    if (support > best_support || (support == best_support && rms < best_rms)) {
      best_split = s;
      best_support = support;
      best_rms = rms;
      best_both = a && b;
    }
  }

  const bool split = best_split != 0 && (whole ? best_both && best_rms < cfg.split_residual * whole->residual
                                               : best_support > 0);
  if (!split) {
    if (whole) out.push_back(*whole);
    return;
  }
  segment_chain(chain, begin, best_split, cfg, depth - 1, out);
  segment_chain(chain, best_split, end, cfg, depth - 1, out);
}

}  // namespace

std::vector<Primitive> classify_segments(const EllipseChain& chain, const ClassifierConfig& cfg) {
  std::vector<Primitive> out;
  segment_chain(chain, 0, chain.size(), cfg, cfg.split_depth, out);
  return out;
}

}  // namespace conicscan
