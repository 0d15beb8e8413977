#pragma once

#include "conicscan/ellipse_fit.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace conicscan {

struct RansacConfig {
  double confidence = 0.95;   ///< p, probability of drawing one all-inlier sample
  double inlier_ratio = 0.3;  ///< w, expected share of inliers
  /// Points per sample: 5 determines a general conic, 4 selects the roundest
  /// ellipse through the sample.
  int samples = 5;
  double inlier_tol = 2.0;   ///< distance to the ellipse boundary
  double ratio_min = 0.2;    ///< candidates with minor/major below this are rejected
  int max_iterations = 1'000'000;

  void validate() const;
  int iterations() const;
};

/// ceil(log(1 - p) / log(1 - w^n)), at least 1.
int iteration_count(double p, double w, int n);

struct RansacResult {
  ConicCoefficients conic;
  GeometricEllipse2D ellipse;
  std::vector<int> inliers;  ///< indices into the input, ascending
  int iterations = 0;
  int candidates = 0;  ///< samples that produced an acceptable ellipse
};

/// Ellipse through four points that maximizes (4ac - b^2) / (a^2 + b^2/2 + c^2),
/// which is largest (2) for circles: four concyclic points give their circle.
/// nullopt when the points admit no ellipse.
std::optional<ConicCoefficients> roundest_conic_through(std::span<const Vec2> four);

/// Conic of one sample under cfg.samples; nullopt unless it is a real ellipse.
std::optional<ConicCoefficients> sample_conic(std::span<const Vec2> sample, int samples);

/// cfg.iterations() rounds of sample, fit, count inliers; the best candidate
/// is refitted to its inliers. nullopt when no sample gave an acceptable
/// ellipse or there are fewer points than a sample needs.
std::optional<RansacResult> ransac_ellipse(std::span<const Vec2> points, const RansacConfig& cfg, std::mt19937_64& rng);
std::optional<RansacResult> ransac_ellipse(std::span<const Vec2> points, const RansacConfig& cfg, std::uint64_t seed);

}  // namespace conicscan
