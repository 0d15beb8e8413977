#pragma once

#include "conicscan/ellipse_fit.hpp"
#include "conicscan/geometry.hpp"

#include <span>
#include <vector>

namespace conicscan {

struct SegmenterConfig {
  double error_threshold = 0.01;  ///< meters, RMS residual a segment may reach
  int min_support = 8;            ///< points a saved segment needs
  double radius_min = 0.03;       ///< meters, bounds on the minor semi-axis
  double radius_max = 1.0;
  double elongation_min = 0.2;  ///< minor/major ratio kept by prefilter()
  int max_gap = 2;              ///< longest run of invalid pixels inside a segment
  /// Consecutive points farther apart than jump_ratio * range (per sample
  /// step) belong to different surfaces. 0 disables the check.
  double jump_ratio = 0.1;

  void validate() const;
};

/// Work counters of one segmentation pass.
struct SegmenterStats {
  long adds = 0;
  long removes = 0;
  long fits = 0;
  long points = 0;

  SegmenterStats& operator+=(const SegmenterStats& o) {
    adds += o.adds;
    removes += o.removes;
    fits += o.fits;
    points += o.points;
    return *this;
  }
};

/// One maximal run of consecutive points that an ellipse fits within the
/// error threshold, in the coordinates of the input points.
struct FittedSegment {
  GeometricEllipse2D ellipse;
  int begin = 0;  ///< index of the first point
  int end = 0;    ///< one past the last point
  double residual = 0.0;

  int support() const { return end - begin; }
};

/// Single left-to-right pass over ordered 2D points. Each point is added to
/// the running fit; once the RMS residual exceeds the threshold the point is
/// taken back, the segment is saved (when large enough and a real ellipse) and
/// a new segment starts at the rejected point. `columns` (same length as
/// `points`, or empty for consecutive indices) lets gaps of more than
/// cfg.max_gap missing samples terminate a segment. Range is measured from the
/// coordinate origin, which is the sensor for projected rows.
std::vector<FittedSegment> segment_scan(std::span<const Vec2> points, std::span<const int> columns,
                                        const SegmenterConfig& cfg, SegmenterStats* stats = nullptr);

/// segment_scan() over one projected image row, returning ellipses lifted to
/// the camera frame.
std::vector<Ellipse> extract_ellipses(std::span<const ScanRowPoint> points, const ScanPlane& plane, int row,
                                      const SegmenterConfig& cfg, SegmenterStats* stats = nullptr);

/// project_row() followed by extract_ellipses().
std::vector<Ellipse> extract_row(const DepthFrame& frame, int row, const SegmenterConfig& cfg,
                                 SegmenterStats* stats = nullptr);

/// Drop elongated ellipses and those whose minor semi-axis lies outside
/// [radius_min, radius_max]. Order is preserved.
std::vector<Ellipse> prefilter(std::span<const Ellipse> ellipses, const SegmenterConfig& cfg);
bool passes_prefilter(const Ellipse& e, const SegmenterConfig& cfg);

}  // namespace conicscan
