#include "conicscan/scanline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace conicscan {

void SegmenterConfig::validate() const {
  if (!(error_threshold > 0.0)) throw std::invalid_argument("segmenter: error threshold must be positive");
  if (min_support < kMinFitPoints) throw std::invalid_argument("segmenter: min support must be at least 6");
  if (!(radius_min > 0.0) || !(radius_min < radius_max))
    throw std::invalid_argument("segmenter: need 0 < radius_min < radius_max");
  if (!(elongation_min > 0.0) || elongation_min > 1.0)
    throw std::invalid_argument("segmenter: elongation_min must be in (0, 1]");
  if (max_gap < 0) throw std::invalid_argument("segmenter: max_gap must be non-negative");
  if (!(jump_ratio >= 0.0)) throw std::invalid_argument("segmenter: jump_ratio must be non-negative");
}

std::vector<FittedSegment> segment_scan(std::span<const Vec2> points, std::span<const int> columns,
                                        const SegmenterConfig& cfg, SegmenterStats* stats) {
  std::vector<FittedSegment> out;
  const int n = static_cast<int>(points.size());
  SegmenterStats local;
  local.points = n;
  if (n == 0) {
    if (stats) *stats += local;
    return out;
  }
  const bool have_columns = !columns.empty();
  if (have_columns && columns.size() != points.size())
    throw std::invalid_argument("segment_scan: columns and points differ in length");

  ScatterAccumulator acc(points[0]);
  int begin = 0;

  // Last accepted fit and the point count it was computed with.
  ConicCoefficients last_fit;
  double last_residual = 0.0;
  int last_count = -1;

  auto save = [&](int end) {
    const int count = end - begin;
    if (count < cfg.min_support) return;
    ConicCoefficients conic = last_fit;
    double residual = last_residual;
    if (last_count != acc.count()) {
      auto k = fit_local(acc);
      ++local.fits;
      if (!k) return;
      conic = *k;
      residual = rms_residual(acc, conic);
    }
    if (!(residual <= cfg.error_threshold)) return;
    auto g = to_geometric(conic);
    if (!g) return;
    g->cx += acc.origin().x();
    g->cy += acc.origin().y();
    out.push_back(FittedSegment{*g, begin, end, residual});
  };

  auto start = [&](int i) {
    begin = i;
    acc.reset(points[static_cast<size_t>(i)]);
    last_count = -1;
  };

  for (int i = 0; i < n; ++i) {
    const Vec2& p = points[static_cast<size_t>(i)];
    if (i > begin) {
      const int step = have_columns ? columns[i] - columns[i - 1] : 1;
      const Vec2& prev = points[static_cast<size_t>(i - 1)];
      const bool gap = step - 1 > cfg.max_gap;
      const bool jump = cfg.jump_ratio > 0.0 && (p - prev).norm() > cfg.jump_ratio * prev.norm() * step;
      if (gap || jump) {
        save(i);
        start(i);
      }
    }
    acc.add(p);
    ++local.adds;
    if (acc.count() < kMinFitPoints) continue;

    ++local.fits;
    const auto k = fit_local(acc);
    const double err = k ? rms_residual(acc, *k) : std::numeric_limits<double>::infinity();
    if (err > cfg.error_threshold) {
      acc.remove(p);
      ++local.removes;
      save(i);
      start(i);
      acc.add(p);
      ++local.adds;
    } else {
      last_fit = *k;
      last_residual = err;
      last_count = acc.count();
    }
  }
  save(n);

  if (stats) *stats += local;
  return out;
}

std::vector<Ellipse> extract_ellipses(std::span<const ScanRowPoint> points, const ScanPlane& plane, int row,
                                      const SegmenterConfig& cfg, SegmenterStats* stats) {
  std::vector<Vec2> xy(points.size());
  std::vector<int> cols(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    xy[i] = Vec2(points[i].x, points[i].d);
    cols[i] = points[i].u;
  }

  std::vector<Ellipse> out;
  for (const auto& seg : segment_scan(xy, cols, cfg, stats)) {
    const auto& g = seg.ellipse;
    Ellipse e;
    e.plane_center = Vec2(g.cx, g.cy);
    e.center = plane.lift(g.cx, g.cy);
    e.theta = g.theta;
    // r1 follows the row direction, r2 the in-plane depth direction
    if (std::abs(std::cos(g.theta)) >= std::abs(std::sin(g.theta))) {
      e.r1 = g.r_major;
      e.r2 = g.r_minor;
    } else {
      e.r1 = g.r_minor;
      e.r2 = g.r_major;
    }
    e.row = row;
    e.support = seg.support();
    e.residual = seg.residual;
    e.first_column = cols[static_cast<size_t>(seg.begin)];
    e.last_column = cols[static_cast<size_t>(seg.end - 1)];
    out.push_back(e);
  }
  return out;
}

std::vector<Ellipse> extract_row(const DepthFrame& frame, int row, const SegmenterConfig& cfg,
                                 SegmenterStats* stats) {
  const auto points = project_row(frame, row);
  return extract_ellipses(points, ScanPlane::for_row(frame.intrinsics(), row), row, cfg, stats);
}

bool passes_prefilter(const Ellipse& e, const SegmenterConfig& cfg) {
  const double minor = e.minor_radius();
  return e.aspect() >= cfg.elongation_min && minor >= cfg.radius_min && minor <= cfg.radius_max;
}

std::vector<Ellipse> prefilter(std::span<const Ellipse> ellipses, const SegmenterConfig& cfg) {
  std::vector<Ellipse> out;
  for (const auto& e : ellipses)
    if (passes_prefilter(e, cfg)) out.push_back(e);
  return out;
}

}  // namespace conicscan
