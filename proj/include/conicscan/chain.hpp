#pragma once

#include "conicscan/geometry.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace conicscan {

struct ChainConfig {
  double phi = 0.10;    ///< meters, largest center distance between linked ellipses
  int k_neighbors = 3;  ///< rows looked ahead when linking (skips up to k-1 bad rows)
  int min_chain = 3;

  void validate() const;
};

struct Line3D {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();  ///< unit length

  Vec3 at(double s) const { return anchor + s * direction; }
  double project(const Vec3& p) const { return (p - anchor).dot(direction); }
  double distance(const Vec3& p) const { return (p - at(project(p))).norm(); }
};

struct Circle3D {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  Vec3 u_axis = Vec3::UnitY();  ///< in-plane basis, u x v = normal
  Vec3 v_axis = Vec3::UnitZ();
  double radius = 0.0;

  /// Angle of the projection of p around the center, measured from u_axis.
  double angle_of(const Vec3& p) const;
  Vec3 at(double angle) const;
};

enum class CenterModel { Unknown, Line, Circle };

/// Ellipses of one connected component, ordered by strictly increasing row.
struct EllipseChain {
  std::vector<Ellipse> ellipses;
  CenterModel model = CenterModel::Unknown;
  double residual = 0.0;

  size_t size() const { return ellipses.size(); }
  std::vector<Vec3> centers() const;
};

/// Greedy vertical linking: each ellipse links to the nearest center within
/// phi in the first of rows r+1 .. r+k that has one, and every ellipse has at
/// most one predecessor. Returns the resulting paths with at least min_chain
/// members, ordered by their first row.
std::vector<EllipseChain> build_components(std::span<const Ellipse> ellipses, const ChainConfig& cfg);

/// Running first and second moments of 3D points (relative to the first point).
class MomentAccumulator3D {
 public:
  void add(const Vec3& p);
  int count() const { return n_; }
  Vec3 mean() const;
  /// Population covariance.
  Eigen::Matrix3d covariance() const;

  const Vec3& sum() const { return sum_; }
  const Eigen::Matrix3d& sum_outer() const { return outer_; }
  const Vec3& origin() const { return origin_; }

 private:
  int n_ = 0;
  Vec3 origin_ = Vec3::Zero();
  Vec3 sum_ = Vec3::Zero();
  Eigen::Matrix3d outer_ = Eigen::Matrix3d::Zero();
};

struct LineFit3D {
  Line3D line;  ///< anchor at the centroid, direction from first to last point
  double residual = 0.0;  ///< RMS orthogonal distance
};

struct CircleFit3D {
  Circle3D circle;
  double residual = 0.0;  ///< RMS distance of the points to the circle
};

/// Total least-squares line through the points. nullopt for fewer than two
/// points or coincident points.
std::optional<LineFit3D> fit_line(std::span<const Vec3> points);
std::optional<LineFit3D> fit_center_line(const EllipseChain& chain);

/// Circle through the points in their best-fit plane. nullopt when the points
/// are (nearly) collinear.
std::optional<CircleFit3D> fit_circle3d(std::span<const Vec3> points);
std::optional<CircleFit3D> fit_center_circle(const EllipseChain& chain);

}  // namespace conicscan
