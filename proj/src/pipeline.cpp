#include "conicscan/pipeline.hpp"

#include "conicscan/parallel.hpp"

#include <chrono>
#include <stdexcept>

namespace conicscan {
namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

Vec3 swap_xy(const Vec3& v) { return {v.y(), v.x(), v.z()}; }

Line3D swap_xy(const Line3D& l) { return {swap_xy(l.anchor), swap_xy(l.direction)}; }

DetectionResult detect_view(const DepthFrame& frame, const DetectorConfig& cfg, Execution exec) {
  DetectionResult out;
  const auto t0 = Clock::now();

  auto t = Clock::now();
  const auto ellipses = extract_frame_ellipses(frame, cfg.segmenter, exec, &out.stats);
  out.timings.extract_us = micros_since(t);
  out.ellipses = ellipses.size();

  t = Clock::now();
  const auto kept = prefilter(ellipses, cfg.segmenter);
  out.timings.prefilter_us = micros_since(t);
  out.kept = kept.size();

  t = Clock::now();
  const auto chains = build_components(kept, cfg.chain);
  out.timings.chain_us = micros_since(t);
  out.chains = chains.size();

  t = Clock::now();
  std::vector<Primitive> found;
  for (const auto& chain : chains) {
    for (auto& p : classify_segments(chain, cfg.classifier)) {
      if (cfg.refine) {
        // pixels that no surface of this kind explains: not an object
        const auto pts = support_points(frame, chain, p.rows);
        auto r = refine(p, pts);
        if (!r || r->coverage < cfg.min_coverage) continue;
        p = std::move(*r);
      }
      found.push_back(std::move(p));
    }
  }
  out.primitives = suppress_nested(std::move(found));
  out.timings.classify_us = micros_since(t);

  out.timings.total_us = micros_since(t0);
  return out;
}

}  // namespace

void DetectorConfig::validate() const {
  segmenter.validate();
  chain.validate();
  classifier.validate();
  if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) throw std::invalid_argument("detector: min_coverage must be in [0, 1]");
}

std::vector<Ellipse> extract_frame_ellipses(const DepthFrame& frame, const SegmenterConfig& cfg, Execution exec,
                                            SegmenterStats* stats) {
  const int h = frame.height();
  std::vector<std::vector<Ellipse>> rows(static_cast<size_t>(h));
  std::vector<SegmenterStats> row_stats(static_cast<size_t>(h));

  if (exec == Execution::Serial) {
    for (int r = 0; r < h; ++r) rows[r] = extract_row(frame, r, cfg, &row_stats[r]);
  } else {
#ifdef CONICSCAN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(worker_count())
#endif
    for (int r = 0; r < h; ++r) rows[r] = extract_row(frame, r, cfg, &row_stats[r]);
  }

  std::vector<Ellipse> out;
  for (int r = 0; r < h; ++r) {
    out.insert(out.end(), rows[r].begin(), rows[r].end());
    if (stats) *stats += row_stats[r];
  }
  return out;
}

Primitive untranspose(const Primitive& p) {
  Primitive q = p;
  std::visit(
      [](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          s.center = swap_xy(s.center);
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          s.axis = swap_xy(s.axis);
        } else {
          s.axis = swap_xy(s.axis);
          s.apex = swap_xy(s.apex);
        }
      },
      q.shape);
  return q;
}

void merge_detections(std::vector<Primitive>& base, const std::vector<Primitive>& extra) {
  for (const auto& e : extra) {
    bool duplicate = false;
    for (auto& b : base) {
      const double reach = std::max(b.radius(), e.radius());
      if ((b.position() - e.position()).norm() > reach) continue;
      duplicate = true;
      if (e.support > b.support) b = e;
      break;
    }
    if (!duplicate) base.push_back(e);
  }
}

DetectionResult detect_frame(const DepthFrame& frame, const DetectorConfig& cfg, Execution exec) {
  DetectionResult out = detect_view(frame, cfg, exec);
  if (!cfg.transpose_pass) return out;

  const auto t0 = Clock::now();
  const DetectionResult rotated = detect_view(transpose_frame(frame), cfg, exec);
  std::vector<Primitive> mapped;
  for (const auto& p : rotated.primitives) mapped.push_back(untranspose(p));
  merge_detections(out.primitives, mapped);
  out.primitives = suppress_nested(std::move(out.primitives));

  out.timings.extract_us += rotated.timings.extract_us;
  out.timings.prefilter_us += rotated.timings.prefilter_us;
  out.timings.chain_us += rotated.timings.chain_us;
  out.timings.classify_us += rotated.timings.classify_us;
  out.timings.total_us += micros_since(t0);
  out.stats += rotated.stats;
  out.ellipses += rotated.ellipses;
  out.kept += rotated.kept;
  out.chains += rotated.chains;
  return out;
}

}  // namespace conicscan
