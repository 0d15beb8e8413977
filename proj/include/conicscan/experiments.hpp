#pragma once

#include "conicscan/pipeline.hpp"
#include "conicscan/ransac.hpp"
#include "conicscan/synth.hpp"
#include "conicscan/tracking.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace conicscan {

/// Segmenter settings for the unit-free 2D slice experiments (noise sigma up
/// to 2, radii 40/20).
SegmenterConfig slice_segmenter_config();

/// Every setting the experiments and the acceptance suite use.
struct Profile {
  DetectorConfig detector;
  KalmanConfig kalman = KalmanConfig::steady();
  SegmenterConfig slice = slice_segmenter_config();
  RansacConfig ransac;
  double range_sigma = 0.005;  ///< meters of range noise in rendered scenes
  double frame_dt = 1.0 / 30.0;
  int burn_in = 30;  ///< filtered estimates before this frame are left out of the statistics

  /// The settings of the reproduced experiments.
  static Profile paper();
  /// paper() with the general-purpose tracker (q = 0.5) instead of the steady one.
  static Profile responsive();
  /// Throws std::invalid_argument for an unknown name.
  static Profile named(const std::string& name);
};

/// Mean and population standard deviation.
struct Stats {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;

  static Stats of(const std::vector<double>& v);
};

/// A CSV table; NaN cells are written empty.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// Optional leading text column (e.g. a method name), one per row.
  std::string label_column;
  std::vector<std::string> labels;

  std::string to_csv() const;
};

// --- 2D ellipse under noise

struct NoiseOptions {
  std::vector<double> sigmas{0.0, 0.5, 1.0, 1.5, 2.0};
  int trials = 50;
  double r_major = 40.0;
  double r_minor = 20.0;
  int count = 100;
  double arc_deg = 360.0;
  std::uint64_t seed = 1;
};

struct NoiseRow {
  double sigma = 0.0;
  int trials = 0;
  int detected = 0;
  Stats r_major;
  Stats r_minor;
};

/// A trial detects the ellipse when the largest segment holds at least half
/// the points, its center is within 5 units of the truth and its radii within
/// 20% (major) and 30% (minor).
std::vector<NoiseRow> run_noise(const NoiseOptions& opt, const Profile& profile);
Table noise_table(const std::vector<NoiseRow>& rows);

// --- static cylinder at several distances

struct AccuracyOptions {
  std::vector<double> distances{1.0, 2.0, 3.0};
  int frames = 86;  ///< including the burn-in
  std::uint64_t seed = 1;
};

struct AccuracyRow {
  double distance = 0.0;  ///< D_G
  Stats measured;         ///< D_M, raw detections after the burn-in
  Stats filtered;         ///< D_K
  Stats radius;           ///< R_M
  Stats radius_filtered;  ///< R_K
  int frames = 0;
};

std::vector<AccuracyRow> run_accuracy(const AccuracyOptions& opt, const Profile& profile);
Table accuracy_table(const std::vector<AccuracyRow>& rows);

// --- angular occlusion of a cylinder

struct OcclusionOptions {
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  double distance = 1.0;
  double radius = 0.2;  ///< of the rendered can, for the detection check
  int frames = 20;
  std::uint64_t seed = 1;
};

struct OcclusionRow {
  double fraction = 0.0;
  int frames = 0;
  int detected = 0;
  Stats radius;           ///< R, as classified from the ellipses
  Stats radius_filtered;  ///< R_K
  Stats radius_fit;       ///< refined surface radius
};

/// A frame counts as detected when a cylinder lies within the can's radius
/// of the can's axis.
std::vector<OcclusionRow> run_occlusion(const OcclusionOptions& opt, const Profile& profile);
Table occlusion_table(const std::vector<OcclusionRow>& rows);

// --- cylinder moving away from the camera

struct VelocityOptions {
  std::vector<double> speeds{0.21, 0.65, 2.66};
  std::vector<int> observations{90, 90, 6};
  double start_distance = 1.0;
  std::uint64_t seed = 1;
};

struct VelocityRow {
  double speed = 0.0;  ///< V_G
  Stats raw;           ///< V_M, finite differences of consecutive detections
  Stats filtered;      ///< V_K
  int observations = 0;
};

std::vector<VelocityRow> run_velocity(const VelocityOptions& opt, const Profile& profile);
Table velocity_table(const std::vector<VelocityRow>& rows);

// --- RANSAC against the incremental segmenter on a slice with a wall behind the object

struct RansacOptions {
  int trials = 200;
  SliceSceneSpec slice;
  std::uint64_t seed = 1;
};

struct RansacTrial {
  std::string method;  ///< "ransac" or "incremental"
  int trial = 0;
  double time_us = 0.0;
  bool found = false;
  GeometricEllipse2D ellipse;  ///< best fit (for the incremental method: the largest object-like segment)
  int support = 0;
  bool degenerate = false;  ///< some accepted fit draws most of its support from the wall
};

struct RansacReport {
  int iterations = 0;
  int trials = 0;
  int ransac_degenerate = 0;
  int incremental_degenerate = 0;
  int incremental_found = 0;
  double ransac_us = 0.0;  ///< mean per slice
  double incremental_us = 0.0;
  std::vector<RansacTrial> runs;

  double speedup() const { return incremental_us > 0.0 ? ransac_us / incremental_us : 0.0; }
};

RansacReport run_ransac_comparison(const RansacOptions& opt, const Profile& profile);
Table ransac_table(const RansacReport& report);

// --- throughput

struct BenchOptions {
  std::vector<std::pair<int, int>> sizes{{160, 120}, {320, 240}, {640, 480}};
  int frames = 30;
  int warmup = 3;
  std::uint64_t seed = 1;
  Execution exec = Execution::Parallel;
};

struct BenchSize {
  int width = 0;
  int height = 0;
  double ms_per_frame = 0.0;
  StageTimings stages;  ///< mean per frame
  size_t primitives = 0;  ///< detected in the first frame
};

struct BenchReport {
  std::vector<BenchSize> sizes;
  double exponent = 0.0;  ///< slope of log(time) against log(pixels)

  const BenchSize* find(int width, int height) const;
};

/// Detection on the three-object scene at each size; rendering is not timed.
BenchReport run_bench(const BenchOptions& opt, const Profile& profile);
Table bench_table(const BenchReport& report);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace conicscan
