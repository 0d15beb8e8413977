#pragma once

#include "conicscan/chain.hpp"

#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace conicscan {

enum class PrimitiveKind { Cylinder, Cone, Sphere };

std::string_view to_string(PrimitiveKind kind);

struct Cylinder {
  Line3D axis;  ///< anchor at the centroid of the supporting ellipse centers
  double radius = 0.0;
  double z_min = 0.0;  ///< extent along the axis, relative to the anchor
  double z_max = 0.0;
};

struct Cone {
  Line3D axis;  ///< direction points from the apex towards the base
  Vec3 apex = Vec3::Zero();
  double half_angle = 0.0;  ///< radians
  double z_min = 0.0;       ///< extent along the axis, relative to the anchor
  double z_max = 0.0;
  bool apex_reliable = true;  ///< false when the apex lies far beyond the data
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct Primitive {
  std::variant<Cylinder, Cone, Sphere> shape;
  int support = 0;        ///< ellipses that agree with the model
  double residual = 0.0;  ///< RMS residual in (z, r) space, meters
  int first_row = 0;
  int last_row = 0;
  std::vector<int> rows;          ///< rows of the ellipses that agree with the model
  double zr_radius = 0.0;         ///< radius() as classified from the ellipses, before any refinement
  double surface_residual = 0.0;  ///< robust RMS distance of the pixels to the refined surface (0 if unrefined)
  /// Share of the camera-facing half of the surface with supporting pixels,
  /// by azimuth around the axis (sphere: over the visible disc). 0 if unrefined.
  double coverage = 0.0;

  PrimitiveKind kind() const { return static_cast<PrimitiveKind>(shape.index()); }
  /// Reference point: middle of the visible extent on the axis, or the sphere center.
  Vec3 position() const;
  /// Cylinder or sphere radius; for a cone the radius at the middle of the extent.
  double radius() const;
};

struct ClassifierConfig {
  double cylinder_slope_tol = 5.0 * std::numbers::pi / 180.0;  ///< radians
  double cone_slope_min = 5.0 * std::numbers::pi / 180.0;      ///< radians
  double zr_residual_tol = 0.015;                              ///< meters
  double apex_range_factor = 3.0;  ///< apex farther than this many extents is unreliable
  double radius_min = 0.03;        ///< meters, accepted primitive radii
  double radius_max = 1.0;
  /// Axial extent of the supporting data must reach this multiple of the
  /// radius (for spheres: of the diameter is covered by half this ratio).
  double min_extent_ratio = 0.5;
  /// Chains whose single-model residual exceeds split_residual * tolerance
  /// (or that fit no model) are searched for a split into two primitives.
  double split_residual = 0.5;
  int split_depth = 2;  ///< recursion limit of the split search
  int min_segment = 5;  ///< fewest ellipses on each side of a split

  void validate() const;
};

/// Position along the object axis and the cross-section radius at that position.
struct ZRPoint {
  double z = 0.0;
  double r = 0.0;
};

/// Fits of both (z, r) templates: the line r = slope z + intercept (cylinders
/// and cones) and the circle r = sqrt(R^2 - (z - z0)^2) centered on the z axis
/// (spheres).
struct ZRModels {
  bool line_ok = false;
  double slope = 0.0;
  double intercept = 0.0;
  double line_residual = 0.0;
  std::vector<bool> line_inliers;

  bool circle_ok = false;
  double z0 = 0.0;
  double sphere_radius = 0.0;
  double circle_residual = 0.0;
  std::vector<bool> circle_inliers;
};

/// Least-squares fits of both templates, with one pass of outlier trimming.
ZRModels fit_zr_models(std::span<const ZRPoint> line_points, std::span<const ZRPoint> circle_points);

enum class ZRDecision { None, Cylinder, Cone, Sphere };

/// Arbitration between the two templates: the smaller residual wins, gated
/// by the residual tolerance and the slope thresholds.
ZRDecision decide(const ZRModels& models, const ClassifierConfig& cfg);

/// decide(fit_zr_models(points, points)) for points already in (z, r) space.
ZRDecision classify_zr(std::span<const ZRPoint> points, const ClassifierConfig& cfg, ZRModels* models = nullptr);

/// Classify one ellipse chain and build the 3D primitive.
std::optional<Primitive> classify(const EllipseChain& chain, const ClassifierConfig& cfg);

/// classify() with chain splitting: a chain that is better explained by two
/// consecutive primitives (a ball resting on a can) yields both.
std::vector<Primitive> classify_segments(const EllipseChain& chain, const ClassifierConfig& cfg);

/// True when p lies inside the primitive, grown by `margin` times its radius.
bool contains(const Primitive& prim, const Vec3& p, double margin = 1.1);

/// Greedy suppression: primitives are visited by decreasing support and
/// dropped when their reference point lies inside one already kept.
std::vector<Primitive> suppress_nested(std::vector<Primitive> prims);

/// Least-squares fit of the primitive's surface to 3D points (Levenberg-
/// Marquardt on orthogonal distances, with robust reweighting). The kind is
/// kept; geometry and extent are replaced. nullopt when the fit diverges.
std::optional<Primitive> refine(const Primitive& prim, std::span<const Vec3> points, int iterations = 15);

/// Camera-frame points of the pixels of the chain ellipses in the given rows
/// (all rows when `rows` is empty).
std::vector<Vec3> support_points(const DepthFrame& frame, const EllipseChain& chain, std::span<const int> rows = {});

}  // namespace conicscan
