#include "conicscan/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace conicscan {

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("intrinsics: frame dimensions must be positive");
  if (!(fx > 0.0) || !(fy > 0.0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside the frame");
}

CameraIntrinsics CameraIntrinsics::for_resolution(int width, int height) {
  CameraIntrinsics k;
  const double scale = width / 320.0;
  k.fx = k.fy = 262.5 * scale;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

CameraIntrinsics CameraIntrinsics::transposed() const {
  CameraIntrinsics t;
  t.fx = fy;
  t.fy = fx;
  t.cx = cy;
  t.cy = cx;
  t.width = height;
  t.height = width;
  return t;
}

DepthFrame::DepthFrame(CameraIntrinsics intrinsics, std::vector<double> depths, double timestamp)
    : intrinsics_(intrinsics), depths_(std::move(depths)), timestamp_(timestamp) {
  intrinsics_.validate();
  const size_t expected = static_cast<size_t>(intrinsics_.width) * intrinsics_.height;
  if (depths_.size() != expected)
    throw std::invalid_argument("depth frame: grid has " + std::to_string(depths_.size()) +
                                " values, intrinsics expect " + std::to_string(expected));
}

DepthFrame DepthFrame::empty(const CameraIntrinsics& intrinsics, double timestamp) {
  const size_t n = static_cast<size_t>(intrinsics.width) * intrinsics.height;
  return DepthFrame(intrinsics, std::vector<double>(n, 0.0), timestamp);
}

size_t DepthFrame::valid_count() const {
  return static_cast<size_t>(std::count_if(depths_.begin(), depths_.end(), is_valid_depth));
}

ScanPlane ScanPlane::for_row(const CameraIntrinsics& k, int row) {
  ScanPlane plane;
  plane.tilt = (row - k.cy) / k.fy;
  plane.forward = Vec3(0.0, plane.tilt, 1.0).normalized();
  return plane;
}

std::vector<ScanRowPoint> project_row(const DepthFrame& frame, int row) {
  const auto& k = frame.intrinsics();
  const ScanPlane plane = ScanPlane::for_row(k, row);
  // distance along `forward` of a point with z-depth 1
  const double stretch = std::sqrt(1.0 + plane.tilt * plane.tilt);

  std::vector<ScanRowPoint> points;
  points.reserve(static_cast<size_t>(frame.width()));
  const auto depths = frame.row(row);
  for (int u = 0; u < frame.width(); ++u) {
    const double z = depths[static_cast<size_t>(u)];
    if (!DepthFrame::is_valid_depth(z)) continue;
    ScanRowPoint p;
    p.u = u;
    p.p3d = backproject(k, u, row, z);
    p.x = p.p3d.x();
    p.d = z * stretch;
    points.push_back(p);
  }
  return points;
}

DepthFrame transpose_frame(const DepthFrame& frame) {
  const int w = frame.width();
  const int h = frame.height();
  std::vector<double> out(frame.depths().size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out[static_cast<size_t>(c) * h + r] = frame.at(r, c);
  return DepthFrame(frame.intrinsics().transposed(), std::move(out), frame.timestamp());
}

}  // namespace conicscan
