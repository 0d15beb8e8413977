#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <span>
#include <vector>

namespace conicscan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Pinhole camera model. Image rows grow along +y, columns along +x, the
/// optical axis is +z.
struct CameraIntrinsics {
  double fx = 262.5;
  double fy = 262.5;
  double cx = 159.5;
  double cy = 119.5;
  int width = 320;
  int height = 240;

  /// Throws std::invalid_argument when the model is not usable.
  void validate() const;

  /// Default model for a frame of the given size: the 320x240 model
  /// (fx = fy = 262.5, principal point at the image center) scaled to width.
  static CameraIntrinsics for_resolution(int width, int height);

  /// Intrinsics of the 90 degree rotated view (rows and columns exchanged).
  CameraIntrinsics transposed() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Organized range image. Depth values are z-depths in meters, row-major.
/// A depth that is zero, negative or not finite marks an invalid pixel.
class DepthFrame {
 public:
  DepthFrame() = default;
  DepthFrame(CameraIntrinsics intrinsics, std::vector<double> depths, double timestamp = 0.0);

  /// Frame of the given intrinsics with every pixel invalid.
  static DepthFrame empty(const CameraIntrinsics& intrinsics, double timestamp = 0.0);

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }
  double timestamp() const { return timestamp_; }
  void set_timestamp(double t) { timestamp_ = t; }

  double at(int row, int col) const { return depths_[static_cast<size_t>(row) * width() + col]; }
  double& at(int row, int col) { return depths_[static_cast<size_t>(row) * width() + col]; }
  bool valid(int row, int col) const { return is_valid_depth(at(row, col)); }

  std::span<const double> row(int r) const {
    return {depths_.data() + static_cast<size_t>(r) * width(), static_cast<size_t>(width())};
  }
  const std::vector<double>& depths() const { return depths_; }

  size_t valid_count() const;

  static bool is_valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

 private:
  CameraIntrinsics intrinsics_;
  std::vector<double> depths_;
  double timestamp_ = 0.0;
};

/// One valid pixel of a scan row, expressed both in the metric coordinates of
/// the row's scan plane and in the camera frame.
struct ScanRowPoint {
  int u = 0;       ///< column index
  double x = 0.0;  ///< lateral coordinate in the scan plane (m)
  double d = 0.0;  ///< depth coordinate in the scan plane (m)
  Vec3 p3d = Vec3::Zero();
};

/// The plane swept by the viewing rays of one image row. It contains the
/// camera x axis; `lateral` and `forward` are an orthonormal basis of it.
struct ScanPlane {
  double tilt = 0.0;  ///< (row - cy) / fy, the y/z slope of the plane
  Vec3 lateral = Vec3::UnitX();
  Vec3 forward = Vec3::UnitZ();

  static ScanPlane for_row(const CameraIntrinsics& k, int row);
  Vec3 normal() const { return lateral.cross(forward); }
  Vec3 lift(double x, double d) const { return x * lateral + d * forward; }
};

/// Ellipse found on a single scan row (the mid-level element of the pipeline).
struct Ellipse {
  Vec3 center = Vec3::Zero();  ///< camera frame, meters
  double r1 = 0.0;             ///< semi-axis closer to the row direction
  double r2 = 0.0;             ///< semi-axis closer to the in-plane depth direction
  double theta = 0.0;          ///< major axis orientation in the scan plane, [0, pi)
  int row = 0;
  int support = 0;
  double residual = 0.0;  ///< RMS fit error of the segment (m)
  int first_column = 0;
  int last_column = 0;
  Vec2 plane_center = Vec2::Zero();  ///< center in scan-plane (x, d) coordinates

  double minor_radius() const { return std::min(r1, r2); }
  double major_radius() const { return std::max(r1, r2); }
  double aspect() const { return minor_radius() / major_radius(); }
  /// Half the extent of the ellipse along the row direction.
  double lateral_radius() const {
    const double a = major_radius(), b = minor_radius();
    const double c = std::cos(theta), s = std::sin(theta);
    return std::sqrt(a * a * c * c + b * b * s * s);
  }
};

/// Points of one row in column order. Invalid pixels are skipped.
std::vector<ScanRowPoint> project_row(const DepthFrame& frame, int row);

/// Exchange rows and columns (the 90 degree rotated view of the scene).
/// A camera-frame point (x, y, z) of the original is (y, x, z) in the result.
DepthFrame transpose_frame(const DepthFrame& frame);

/// Camera-frame point for pixel (u, v) at z-depth `depth`.
inline Vec3 backproject(const CameraIntrinsics& k, double u, double v, double depth) {
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

/// Pixel coordinates (u, v) of a camera-frame point.
inline Vec2 reproject(const CameraIntrinsics& k, const Vec3& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

}  // namespace conicscan
