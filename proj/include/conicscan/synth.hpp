#pragma once

#include "conicscan/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace conicscan {

/// Points p with normal . p = offset. Infinite.
struct PlaneSpec {
  Vec3 normal = -Vec3::UnitZ();
  double offset = -4.0;
};

struct SphereSpec {
  Vec3 center = Vec3(0, 0, 2);
  double radius = 0.36;
};

/// Closed cylinder from `base` along the unit `axis` for `height` meters.
struct CylinderSpec {
  Vec3 base = Vec3(0, 0.8, 2.5);
  Vec3 axis = -Vec3::UnitY();
  double radius = 0.2;
  double height = 0.6;
};

/// Cone with its base disc centered at `base`; the apex is base + height * axis.
struct ConeSpec {
  Vec3 base = Vec3(0, 0.8, 2.5);
  Vec3 axis = -Vec3::UnitY();
  double base_radius = 0.17;
  double height = 0.7;
};

using ShapeSpec = std::variant<SphereSpec, CylinderSpec, ConeSpec>;

struct SceneObject {
  std::string id;
  ShapeSpec shape;
  Vec3 velocity = Vec3::Zero();  ///< m/s, the object is translated by velocity * t
};

/// Hides the leftmost `fraction` of the object's visible cross-section, by
/// angle around it in each row, behind a fronto-parallel board 0.2 m in front
/// of the object's nearest point.
struct OccluderSpec {
  std::string object_id;
  double fraction = 0.0;
};

/// Range noise sigma(range) = sigma + sigma_per_meter * range, applied along
/// the viewing ray.
struct NoiseModel {
  double sigma = 0.0;
  double sigma_per_meter = 0.0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<PlaneSpec> planes;
  std::vector<OccluderSpec> occluders;
  NoiseModel noise;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument for malformed parameters.
  void validate() const;
  const SceneObject* find(const std::string& id) const;
};

/// Ray distance parameter t of the first hit along origin + t * dir, t > 0.
std::optional<double> intersect(const ShapeSpec& shape, const Vec3& origin, const Vec3& dir);
std::optional<double> intersect(const PlaneSpec& plane, const Vec3& origin, const Vec3& dir);

/// Ray-cast the scene at time t. Rows render in parallel; the result depends
/// only on (scene, intrinsics, t).
DepthFrame render(const SceneSpec& scene, const CameraIntrinsics& k, double t = 0.0);
DepthFrame render_serial(const SceneSpec& scene, const CameraIntrinsics& k, double t = 0.0);

/// Uniform scaling of every length in the scene (noise included).
SceneSpec scaled(const SceneSpec& scene, double s);

struct Segment2D {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};

struct EllipseSampleSpec {
  double r_major = 40.0;
  double r_minor = 20.0;
  Vec2 center = Vec2::Zero();
  double theta = 0.0;      ///< radians
  double arc_deg = 360.0;  ///< covered arc, starting at start_deg
  double start_deg = 0.0;
  double sigma = 0.0;  ///< isotropic Gaussian noise per coordinate
  int count = 100;
  std::uint64_t seed = 1;
  std::vector<Segment2D> background;  ///< line segments sampled after the arc
  int background_count = 0;           ///< points per background segment
};

/// Points along the arc (in order), followed by the background segments.
std::vector<Vec2> sample_ellipse_2d(const EllipseSampleSpec& spec);

/// Two-dimensional range scan of an elliptic object in front of a wall, in
/// the unit-free coordinates of the slice experiments (x lateral, y depth).
struct SliceSceneSpec {
  double r_major = 40.0;  ///< along x
  double r_minor = 20.0;  ///< along y
  Vec2 center = Vec2(0.0, 150.0);
  double wall_y = 250.0;
  double fov_deg = 100.0;
  int rays = 200;
  double sigma = 1.0;  ///< range noise
  std::uint64_t seed = 1;
};

struct SlicePoint {
  Vec2 p = Vec2::Zero();
  bool on_object = false;
};

/// Scan points in ray order; rays that miss everything are dropped.
std::vector<SlicePoint> render_slice(const SliceSceneSpec& spec);

// Scenes used by the experiments and the acceptance suite. The camera looks
// along +z with +y pointing down; the floor is 0.8 m below the camera.

constexpr double kFloorY = 0.8;

/// Floor and back wall at 4 m.
SceneSpec room(double sigma = 0.0, std::uint64_t seed = 1);
SceneSpec trash_can_scene(double sigma, std::uint64_t seed);
SceneSpec parking_cone_scene(double sigma, std::uint64_t seed, double tilt_deg = 0.0);
SceneSpec ball_scene(double sigma, std::uint64_t seed);
/// Trash can, parking cone and exercise ball side by side.
SceneSpec three_object_scene(double sigma, std::uint64_t seed);
/// Ball resting on top of a trash can.
SceneSpec sphere_on_cylinder_scene(double sigma, std::uint64_t seed);
/// Pole (R = 0.1, 0.6 long) 2 m ahead, rotated by tilt_deg about the optical axis.
SceneSpec tilted_cylinder_scene(double tilt_deg, double sigma, std::uint64_t seed);
/// Upright can (R = 0.2, 0.6 tall, axis through (0, *, distance)) on a floor
/// 0.3 m below the camera.
SceneSpec cylinder_at(double distance, double sigma, std::uint64_t seed);
/// cylinder_at() with the object's left `fraction` hidden.
SceneSpec occluded_cylinder_scene(double fraction, double distance, double sigma, std::uint64_t seed);
/// Cylinder starting at `distance` and moving away from the camera at `speed`.
SceneSpec moving_cylinder_scene(double speed, double distance, double sigma, std::uint64_t seed);

}  // namespace conicscan
