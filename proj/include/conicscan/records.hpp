#pragma once

#include "conicscan/pipeline.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace conicscan {

struct DetectionRecord {
  long frame_id = 0;
  double timestamp = 0.0;
  std::vector<Primitive> primitives;
  StageTimings timings;

  static DetectionRecord from(long frame_id, double timestamp, const DetectionResult& result);
};

/// One JSON object per line:
///   {"frame": 0, "timestamp": 0.0,
///    "primitives": [{"kind": "cylinder", "position": [..], "radius": .., "axis": [..], ...}],
///    "timing_us": {"extract": .., "prefilter": .., "chain": .., "classify": .., "total": ..}}
/// Doubles are written with round-trip precision.
std::string to_json_line(const DetectionRecord& rec);

/// Inverse of to_json_line(). Throws std::invalid_argument for malformed input.
DetectionRecord parse_json_line(const std::string& line);

/// One CSV row per primitive (frames without primitives produce none).
std::string csv_header();
std::string to_csv_rows(const DetectionRecord& rec);

}  // namespace conicscan
