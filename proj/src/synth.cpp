#include "conicscan/synth.hpp"

#include "conicscan/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace conicscan {
namespace {

constexpr double kEps = 1e-12;
constexpr double kBoardGap = 0.2;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, double t, int row) {
  return splitmix(splitmix(seed) ^ splitmix(std::bit_cast<std::uint64_t>(t) + 0x51ULL) ^
                  splitmix(static_cast<std::uint64_t>(row) + 0x7f4aULL));
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Smallest root > kEps of a t^2 + 2 b t + c = 0 that `accept` admits.
template <typename Accept>
std::optional<double> first_root(double a, double b, double c, Accept accept) {
  std::optional<double> best;
  auto consider = [&](double t) {
    if (t > kEps && accept(t) && (!best || t < *best)) best = t;
  };
  if (std::abs(a) < kEps) {
    if (std::abs(b) > kEps) consider(-c / (2.0 * b));
    return best;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return best;
  const double s = std::sqrt(disc);
  consider((-b - s) / a);
  consider((-b + s) / a);
  return best;
}

std::optional<double> disc_hit(const Vec3& center, const Vec3& normal, double radius, const Vec3& o, const Vec3& d) {
  const double denom = normal.dot(d);
  if (std::abs(denom) < kEps) return std::nullopt;
  const double t = normal.dot(center - o) / denom;
  if (t <= kEps || ((o + t * d) - center).squaredNorm() > radius * radius) return std::nullopt;
  return t;
}

std::optional<double> closer(std::optional<double> a, std::optional<double> b) {
  if (!a) return b;
  if (!b) return a;
  return std::min(*a, *b);
}

std::optional<double> hit(const SphereSpec& s, const Vec3& o, const Vec3& d) {
  const Vec3 w = o - s.center;
  return first_root(d.dot(d), w.dot(d), w.dot(w) - s.radius * s.radius, [](double) { return true; });
}

std::optional<double> hit(const CylinderSpec& c, const Vec3& o, const Vec3& d) {
  const Vec3 a = c.axis.normalized();
  const Vec3 w = o - c.base;
  const Vec3 dp = d - d.dot(a) * a;
  const Vec3 wp = w - w.dot(a) * a;
  auto side = first_root(dp.dot(dp), wp.dot(dp), wp.dot(wp) - c.radius * c.radius, [&](double t) {
    const double s = (w + t * d).dot(a);
    return s >= 0.0 && s <= c.height;
  });
  auto caps = closer(disc_hit(c.base, a, c.radius, o, d), disc_hit(c.base + c.height * a, a, c.radius, o, d));
  return closer(side, caps);
}

std::optional<double> hit(const ConeSpec& c, const Vec3& o, const Vec3& d) {
  const Vec3 a = c.axis.normalized();
  const Vec3 apex = c.base + c.height * a;
  const double k = c.base_radius / c.height;
  const double m = 1.0 + k * k;
  const Vec3 w = o - apex;
  const double da = d.dot(a), wa = w.dot(a);
  auto side = first_root(d.dot(d) - m * da * da, w.dot(d) - m * wa * da, w.dot(w) - m * wa * wa, [&](double t) {
    const double h = -(w + t * d).dot(a);
    return h >= 0.0 && h <= c.height;
  });
  return closer(side, disc_hit(c.base, a, c.base_radius, o, d));
}

ShapeSpec moved(const ShapeSpec& shape, const Vec3& offset) {
  ShapeSpec out = shape;
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SphereSpec>)
          s.center += offset;
        else
          s.base += offset;
      },
      out);
  return out;
}

// Outward unit normal at a point on the surface.
Vec3 surface_normal(const ShapeSpec& shape, const Vec3& p) {
  if (const auto* s = std::get_if<SphereSpec>(&shape)) return (p - s->center).normalized();
  if (const auto* c = std::get_if<CylinderSpec>(&shape)) {
    const Vec3 a = c->axis.normalized();
    const Vec3 q = p - c->base;
    const double h = q.dot(a);
    const Vec3 radial = q - h * a;
    if (radial.norm() < c->radius * (1.0 - 1e-6)) return h < 0.5 * c->height ? Vec3(-a) : a;
    return radial.normalized();
  }
  const auto& k = std::get<ConeSpec>(shape);
  const Vec3 a = k.axis.normalized();
  const Vec3 q = p - k.base;
  const double h = q.dot(a);
  const Vec3 radial = q - h * a;
  const double local = k.base_radius * (1.0 - h / k.height);
  if (h < 1e-6 * k.height && radial.norm() < local * (1.0 - 1e-6)) return -a;
  const double alpha = std::atan2(k.base_radius, k.height);
  return (std::cos(alpha) * radial.normalized() + std::sin(alpha) * a).normalized();
}

struct RenderContext {
  std::vector<ShapeSpec> shapes;  // at time t
  std::vector<double> board_depth;  // per object, +inf when not occluded
  std::vector<double> board_fraction;
};

Vec3 pixel_ray(const CameraIntrinsics& k, int u, int v) { return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0}; }

// Nearest hit among objects; returns object index or -1.
int nearest_object(const RenderContext& ctx, const Vec3& dir, double& t_out) {
  int best = -1;
  double best_t = kInf;
  for (size_t i = 0; i < ctx.shapes.size(); ++i) {
    if (auto t = intersect(ctx.shapes[i], Vec3::Zero(), dir); t && *t < best_t) {
      best_t = *t;
      best = static_cast<int>(i);
    }
  }
  t_out = best_t;
  return best;
}

void render_row(const SceneSpec& scene, const RenderContext& ctx, const CameraIntrinsics& k, double time, int v,
                double* out) {
  const int w = k.width;
  std::vector<double> t_row(static_cast<size_t>(w), kInf);
  std::vector<int> owner(static_cast<size_t>(w), -1);
  std::vector<double> t_hit(static_cast<size_t>(w), kInf);
  for (int u = 0; u < w; ++u) {
    const Vec3 dir = pixel_ray(k, u, v);
    owner[u] = nearest_object(ctx, dir, t_hit[u]);
    double t = t_hit[u];
    for (const auto& p : scene.planes)
      if (auto tp = intersect(p, Vec3::Zero(), dir); tp && *tp < t) {
        t = *tp;
        owner[u] = -1;
      }
    t_row[u] = t;
  }

  // Angular occlusion: the azimuth of the surface normal about the vertical
  // orders the visible cross-section from left to right.
  for (size_t i = 0; i < ctx.shapes.size(); ++i) {
    if (!std::isfinite(ctx.board_depth[i])) continue;
    std::vector<double> azimuth(static_cast<size_t>(w), kInf);
    double lo = kInf, hi = -kInf;
    for (int u = 0; u < w; ++u) {
      if (owner[u] != static_cast<int>(i)) continue;
      const Vec3 n = surface_normal(ctx.shapes[i], t_hit[u] * pixel_ray(k, u, v));
      if (std::hypot(n.x(), n.z()) < 0.1) continue;  // cap
      azimuth[u] = std::atan2(n.x(), -n.z());
      lo = std::min(lo, azimuth[u]);
      hi = std::max(hi, azimuth[u]);
    }
    if (!(hi > lo)) continue;
    const double cut = lo + ctx.board_fraction[i] * (hi - lo);
    for (int u = 0; u < w; ++u)
      if (azimuth[u] < cut) t_row[u] = std::min(t_row[u], ctx.board_depth[i]);
  }

  std::mt19937_64 rng(stream_seed(scene.seed, time, v));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = scene.noise.sigma > 0.0 || scene.noise.sigma_per_meter > 0.0;
  for (int u = 0; u < w; ++u) {
    double z = t_row[u];
    if (!std::isfinite(z)) {
      out[u] = 0.0;
      continue;
    }
    if (noisy) {
      const double ray_len = pixel_ray(k, u, v).norm();
      const double range = z * ray_len;
      const double sigma = scene.noise.sigma + scene.noise.sigma_per_meter * range;
      z = (range + sigma * gauss(rng)) / ray_len;
    }
    out[u] = z > 0.0 ? z : 0.0;
  }
}

RenderContext prepare(const SceneSpec& scene, const CameraIntrinsics& k, double time) {
  scene.validate();
  k.validate();
  RenderContext ctx;
  for (const auto& obj : scene.objects) ctx.shapes.push_back(moved(obj.shape, obj.velocity * time));
  ctx.board_depth.assign(ctx.shapes.size(), kInf);
  ctx.board_fraction.assign(ctx.shapes.size(), 0.0);

  for (const auto& occ : scene.occluders) {
    if (occ.fraction <= 0.0) continue;
    size_t idx = 0;
    while (scene.objects[idx].id != occ.object_id) ++idx;
    // the board sits in front of the nearest visible point of the object
    double nearest = kInf;
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u)
        if (auto t = intersect(ctx.shapes[idx], Vec3::Zero(), pixel_ray(k, u, v))) nearest = std::min(nearest, *t);
    if (!std::isfinite(nearest)) continue;
    ctx.board_depth[idx] = std::max(nearest - kBoardGap, 0.05);
    ctx.board_fraction[idx] = occ.fraction;
  }
  return ctx;
}

DepthFrame render_impl(const SceneSpec& scene, const CameraIntrinsics& k, double t, bool parallel) {
  const RenderContext ctx = prepare(scene, k, t);
  std::vector<double> depths(static_cast<size_t>(k.width) * k.height, 0.0);
  if (parallel) {
#ifdef CONICSCAN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(worker_count())
#endif
    for (int v = 0; v < k.height; ++v) render_row(scene, ctx, k, t, v, depths.data() + static_cast<size_t>(v) * k.width);
  } else {
    for (int v = 0; v < k.height; ++v) render_row(scene, ctx, k, t, v, depths.data() + static_cast<size_t>(v) * k.width);
  }
  return DepthFrame(k, std::move(depths), t);
}

Vec3 tilted_up(double tilt_toward_camera_deg) {
  const double a = deg(tilt_toward_camera_deg);
  return Vec3(0.0, -std::cos(a), -std::sin(a));
}

}  // namespace

void SceneSpec::validate() const {
  for (const auto& obj : objects) {
    const bool ok = std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SphereSpec>)
            return s.radius > 0.0 && s.center.allFinite();
          else if constexpr (std::is_same_v<T, CylinderSpec>)
            return s.radius > 0.0 && s.height > 0.0 && s.axis.norm() > 0.0 && s.base.allFinite();
          else
            return s.base_radius > 0.0 && s.height > 0.0 && s.axis.norm() > 0.0 && s.base.allFinite();
        },
        obj.shape);
    if (!ok || !obj.velocity.allFinite()) throw std::invalid_argument("scene: bad parameters for object '" + obj.id + "'");
  }
  for (const auto& p : planes)
    if (!(p.normal.norm() > 0.0) || !std::isfinite(p.offset)) throw std::invalid_argument("scene: bad plane");
  for (const auto& occ : occluders) {
    if (!(occ.fraction >= 0.0 && occ.fraction < 1.0))
      throw std::invalid_argument("scene: occlusion fraction must be in [0, 1)");
    if (!find(occ.object_id)) throw std::invalid_argument("scene: occluder refers to unknown object '" + occ.object_id + "'");
  }
  if (!(noise.sigma >= 0.0) || !(noise.sigma_per_meter >= 0.0))
    throw std::invalid_argument("scene: noise must be non-negative");
}

const SceneObject* SceneSpec::find(const std::string& id) const {
  for (const auto& obj : objects)
    if (obj.id == id) return &obj;
  return nullptr;
}

std::optional<double> intersect(const ShapeSpec& shape, const Vec3& origin, const Vec3& dir) {
  return std::visit([&](const auto& s) { return hit(s, origin, dir); }, shape);
}

std::optional<double> intersect(const PlaneSpec& plane, const Vec3& origin, const Vec3& dir) {
  const double denom = plane.normal.dot(dir);
  if (std::abs(denom) < kEps) return std::nullopt;
  const double t = (plane.offset - plane.normal.dot(origin)) / denom;
  if (t <= kEps) return std::nullopt;
  return t;
}

DepthFrame render(const SceneSpec& scene, const CameraIntrinsics& k, double t) {
  return render_impl(scene, k, t, true);
}

DepthFrame render_serial(const SceneSpec& scene, const CameraIntrinsics& k, double t) {
  return render_impl(scene, k, t, false);
}

SceneSpec scaled(const SceneSpec& scene, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("scaled: factor must be positive");
  SceneSpec out = scene;
  for (auto& obj : out.objects) {
    obj.velocity *= s;
    std::visit(
        [s](auto& sh) {
          using T = std::decay_t<decltype(sh)>;
          if constexpr (std::is_same_v<T, SphereSpec>) {
            sh.center *= s;
            sh.radius *= s;
          } else if constexpr (std::is_same_v<T, CylinderSpec>) {
            sh.base *= s;
            sh.radius *= s;
            sh.height *= s;
          } else {
            sh.base *= s;
            sh.base_radius *= s;
            sh.height *= s;
          }
        },
        obj.shape);
  }
  for (auto& p : out.planes) p.offset *= s;
  out.noise.sigma *= s;
  return out;
}

std::vector<Vec2> sample_ellipse_2d(const EllipseSampleSpec& spec) {
  if (spec.count < 6) throw std::invalid_argument("sample_ellipse_2d: need at least 6 points");
  if (!(spec.r_major >= spec.r_minor && spec.r_minor > 0.0))
    throw std::invalid_argument("sample_ellipse_2d: need r_major >= r_minor > 0");
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("sample_ellipse_2d: sigma must be non-negative");
  std::mt19937_64 rng(splitmix(spec.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec2> out;
  const double c = std::cos(spec.theta), s = std::sin(spec.theta);
  const bool closed = spec.arc_deg >= 360.0;
  const int steps = closed ? spec.count : spec.count - 1;
  for (int i = 0; i < spec.count; ++i) {
    const double phi = deg(spec.start_deg + spec.arc_deg * i / steps);
    const double ex = spec.r_major * std::cos(phi), ey = spec.r_minor * std::sin(phi);
    Vec2 p(spec.center.x() + c * ex - s * ey, spec.center.y() + s * ex + c * ey);
    if (spec.sigma > 0.0) p += spec.sigma * Vec2(gauss(rng), gauss(rng));
    out.push_back(p);
  }
  for (const auto& seg : spec.background) {
    for (int i = 0; i < spec.background_count; ++i) {
      const double f = spec.background_count > 1 ? static_cast<double>(i) / (spec.background_count - 1) : 0.5;
      Vec2 p = seg.a + f * (seg.b - seg.a);
      if (spec.sigma > 0.0) p += spec.sigma * Vec2(gauss(rng), gauss(rng));
      out.push_back(p);
    }
  }
  return out;
}

std::vector<SlicePoint> render_slice(const SliceSceneSpec& spec) {
  std::mt19937_64 rng(splitmix(spec.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SlicePoint> out;
  const double a = spec.r_major, b = spec.r_minor;
  for (int i = 0; i < spec.rays; ++i) {
    const double ang = deg(-0.5 * spec.fov_deg + spec.fov_deg * (i + 0.5) / spec.rays);
    const Vec2 dir(std::sin(ang), std::cos(ang));
    // ray against the axis-aligned ellipse
    const Vec2 w = -spec.center;
    const double qa = dir.x() * dir.x() / (a * a) + dir.y() * dir.y() / (b * b);
    const double qb = w.x() * dir.x() / (a * a) + w.y() * dir.y() / (b * b);
    const double qc = w.x() * w.x() / (a * a) + w.y() * w.y() / (b * b) - 1.0;
    double t = kInf;
    bool on_object = false;
    if (auto r = first_root(qa, qb, qc, [](double) { return true; })) {
      t = *r;
      on_object = true;
    }
    if (dir.y() > kEps && spec.wall_y / dir.y() < t) {
      t = spec.wall_y / dir.y();
      on_object = false;
    }
    if (!std::isfinite(t)) continue;
    t += spec.sigma * gauss(rng);
    out.push_back({t * dir, on_object});
  }
  return out;
}

SceneSpec room(double sigma, std::uint64_t seed) {
  SceneSpec s;
  s.planes.push_back({Vec3::UnitY(), kFloorY});
  s.planes.push_back({Vec3::UnitZ(), 4.0});
  s.noise.sigma = sigma;
  s.seed = seed;
  return s;
}

SceneSpec trash_can_scene(double sigma, std::uint64_t seed) {
  SceneSpec s = room(sigma, seed);
  s.objects.push_back({"trash_can", CylinderSpec{Vec3(0.0, kFloorY, 2.5), -Vec3::UnitY(), 0.2, 0.6}, Vec3::Zero()});
  return s;
}

SceneSpec parking_cone_scene(double sigma, std::uint64_t seed, double tilt_deg) {
  SceneSpec s = room(sigma, seed);
  s.objects.push_back({"cone", ConeSpec{Vec3(0.0, kFloorY, 2.2), tilted_up(tilt_deg), 0.17, 0.7}, Vec3::Zero()});
  return s;
}

SceneSpec ball_scene(double sigma, std::uint64_t seed) {
  SceneSpec s = room(sigma, seed);
  s.objects.push_back({"ball", SphereSpec{Vec3(0.0, kFloorY - 0.36, 2.5), 0.36}, Vec3::Zero()});
  return s;
}

SceneSpec three_object_scene(double sigma, std::uint64_t seed) {
  SceneSpec s = room(sigma, seed);
  s.objects.push_back({"trash_can", CylinderSpec{Vec3(-0.9, kFloorY, 2.5), -Vec3::UnitY(), 0.2, 0.6}, Vec3::Zero()});
  s.objects.push_back({"cone", ConeSpec{Vec3(0.0, kFloorY, 2.3), -Vec3::UnitY(), 0.17, 0.7}, Vec3::Zero()});
  s.objects.push_back({"ball", SphereSpec{Vec3(0.95, kFloorY - 0.36, 2.6), 0.36}, Vec3::Zero()});
  return s;
}

SceneSpec sphere_on_cylinder_scene(double sigma, std::uint64_t seed) {
  SceneSpec s = room(sigma, seed);
  const double top = kFloorY - 0.6;
  s.objects.push_back({"trash_can", CylinderSpec{Vec3(0.0, kFloorY, 2.5), -Vec3::UnitY(), 0.2, 0.6}, Vec3::Zero()});
  s.objects.push_back({"ball", SphereSpec{Vec3(0.0, top - 0.3, 2.5), 0.3}, Vec3::Zero()});
  return s;
}

SceneSpec tilted_cylinder_scene(double tilt_deg, double sigma, std::uint64_t seed) {
  SceneSpec s = room(sigma, seed);
  const double a = deg(tilt_deg);
  const Vec3 axis(std::sin(a), -std::cos(a), 0.0);
  // a pole: short arcs near the caps of a stubby can read as a sphere
  const double height = 0.6;
  const double radius = 0.1;
  const Vec3 mid(0.0, 0.0, 2.0);
  s.objects.push_back({"cylinder", CylinderSpec{mid - 0.5 * height * axis, axis, radius, height}, Vec3::Zero()});
  return s;
}

SceneSpec cylinder_at(double distance, double sigma, std::uint64_t seed) {
  // camera close to the floor so the whole can stays in view at 1 m
  constexpr double floor_y = 0.3;
  SceneSpec s = room(sigma, seed);
  s.planes[0].offset = floor_y;
  s.planes[1].offset = std::max(4.0, distance + 1.5);
  s.objects.push_back({"cylinder", CylinderSpec{Vec3(0.0, floor_y, distance), -Vec3::UnitY(), 0.2, 0.6}, Vec3::Zero()});
  return s;
}

SceneSpec occluded_cylinder_scene(double fraction, double distance, double sigma, std::uint64_t seed) {
  SceneSpec s = cylinder_at(distance, sigma, seed);
  s.occluders.push_back({"cylinder", fraction});
  return s;
}

SceneSpec moving_cylinder_scene(double speed, double distance, double sigma, std::uint64_t seed) {
  SceneSpec s = cylinder_at(distance, sigma, seed);
  s.planes[1].offset = 8.0;
  s.objects[0].velocity = Vec3(0.0, 0.0, speed);
  return s;
}

}  // namespace conicscan
