#pragma once

#include "conicscan/chain.hpp"
#include "conicscan/classify.hpp"
#include "conicscan/scanline.hpp"

#include <vector>

namespace conicscan {

struct DetectorConfig {
  SegmenterConfig segmenter;
  ChainConfig chain;
  ClassifierConfig classifier;
  /// Also run on the 90 degree rotated view and merge, for objects tilted by
  /// more than 45 degrees about the optical axis.
  bool transpose_pass = false;
  /// Fit each classified primitive to its supporting pixels in 3D; those the
  /// fit rejects are dropped.
  bool refine = true;
  /// Refined primitives must have pixels over this share of their visible
  /// half (see Primitive::coverage). Rejects fits to plane creases.
  double min_coverage = 0.25;

  void validate() const;
};

enum class Execution { Serial, Parallel };

/// Wall-clock microseconds per stage of one detect_frame() call.
struct StageTimings {
  double extract_us = 0.0;  ///< projection and per-row ellipse fitting
  double prefilter_us = 0.0;
  double chain_us = 0.0;
  double classify_us = 0.0;  ///< classification, refinement and suppression
  double total_us = 0.0;
};

struct DetectionResult {
  std::vector<Primitive> primitives;
  StageTimings timings;
  SegmenterStats stats;
  size_t ellipses = 0;  ///< found by the segmenter
  size_t kept = 0;      ///< left after the prefilter
  size_t chains = 0;
};

/// Ellipses of every row, ordered by row then column. The parallel kernel
/// processes rows concurrently and returns exactly what the serial one does.
std::vector<Ellipse> extract_frame_ellipses(const DepthFrame& frame, const SegmenterConfig& cfg,
                                            Execution exec = Execution::Parallel,
                                            SegmenterStats* stats = nullptr);

/// Full pipeline: per-row ellipses, prefilter, chains, classification.
DetectionResult detect_frame(const DepthFrame& frame, const DetectorConfig& cfg,
                             Execution exec = Execution::Parallel);

/// Merge detections of the rotated view (already mapped back to the original
/// camera frame) into `base`, dropping duplicates of the same object.
void merge_detections(std::vector<Primitive>& base, const std::vector<Primitive>& extra);

/// Express a primitive found on transpose_frame(f) in the camera frame of f.
Primitive untranspose(const Primitive& p);

}  // namespace conicscan
