#pragma once

#include "conicscan/geometry.hpp"

#include <optional>
#include <span>

namespace conicscan {

/// Fewest points the incremental segmenter fits (one above the 5 degrees of freedom).
inline constexpr int kMinFitPoints = 6;
/// Fewest points that determine a conic at all.
inline constexpr int kMinConicPoints = 5;

/// Running power sums S_{x^p y^q} = sum x^p y^q with p + q <= 4, which is
/// everything the scatter matrix D^T D of the design rows
/// (x^2, xy, y^2, x, y, 1) contains.
struct PowerSums {
  double x4 = 0, x3y = 0, x2y2 = 0, xy3 = 0, y4 = 0;
  double x3 = 0, x2y = 0, xy2 = 0, y3 = 0;
  double x2 = 0, xy = 0, y2 = 0;
  double x = 0, y = 0, one = 0;

  bool operator==(const PowerSums&) const = default;
};

/// O(1) add/remove of points for direct least-squares ellipse fitting. Points
/// are stored relative to `origin` to keep the quartic sums well scaled.
class ScatterAccumulator {
 public:
  ScatterAccumulator() = default;
  explicit ScatterAccumulator(const Vec2& origin) : origin_(origin) {}

  void add(double x, double y);
  void add(const Vec2& p) { add(p.x(), p.y()); }

  /// Inverse of add(). The caller guarantees the point was added before.
  /// Removing the last point restores the freshly constructed state exactly.
  /// Throws std::logic_error when empty.
  void remove(double x, double y);
  void remove(const Vec2& p) { remove(p.x(), p.y()); }

  void reset() { sums_ = {}; n_ = 0; }
  void reset(const Vec2& origin) { reset(); origin_ = origin; }

  int count() const { return n_; }
  const Vec2& origin() const { return origin_; }
  const PowerSums& sums() const { return sums_; }

  bool operator==(const ScatterAccumulator&) const = default;

 private:
  PowerSums sums_;
  int n_ = 0;
  Vec2 origin_ = Vec2::Zero();
};

/// a x^2 + b xy + c y^2 + d x + e y + f = 0
struct ConicCoefficients {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;

  double discriminant() const { return b * b - 4.0 * a * c; }
  double operator()(double x, double y) const {
    return a * x * x + b * x * y + c * y * y + d * x + e * y + f;
  }
  Vec2 gradient(double x, double y) const { return {2 * a * x + b * y + d, b * x + 2 * c * y + e}; }

  /// Unit coefficient norm, sign chosen so that a + c >= 0.
  ConicCoefficients normalized() const;
  /// For a conic written in coordinates relative to `origin`, the same curve
  /// in absolute coordinates.
  ConicCoefficients to_absolute(const Vec2& origin) const;
};

struct GeometricEllipse2D {
  double cx = 0, cy = 0;
  double r_major = 0, r_minor = 0;
  double theta = 0;  ///< major axis angle, [0, pi)

  ConicCoefficients to_conic() const;
};

struct CircleFit {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

/// Direct ellipse-specific least-squares fit in the accumulator's local frame
/// (coordinates relative to origin()). Uses the 3x3 block reduction of the
/// scatter matrix; returns nullopt for degenerate input or when no solution
/// satisfies 4ac - b^2 > 0.
std::optional<ConicCoefficients> fit_local(const ScatterAccumulator& acc, int min_points = kMinFitPoints);

/// fit_local() expressed in world coordinates.
std::optional<ConicCoefficients> fit(const ScatterAccumulator& acc, int min_points = kMinFitPoints);

/// Batch convenience: accumulate `points` (origin at the first point) and fit.
std::optional<ConicCoefficients> fit_points(std::span<const Vec2> points, int min_points = kMinFitPoints);

/// RMS approximate orthogonal residual of all accumulated points against a
/// conic given in the accumulator's local frame, sqrt(sum F^2 / sum |grad F|^2).
/// Constant time.
double rms_residual(const ScatterAccumulator& acc, const ConicCoefficients& local);

/// Center, semi-axes and orientation. nullopt unless the conic is a real ellipse.
std::optional<GeometricEllipse2D> to_geometric(const ConicCoefficients& conic);

/// Approximate orthogonal distance to the ellipse boundary. Exact on circles
/// and on the ellipse axes.
double point_error(const GeometricEllipse2D& e, double x, double y);

/// Algebraic circle fit from the same power sums (3 degrees of freedom), in
/// world coordinates. nullopt for collinear or coincident points.
std::optional<CircleFit> fit_circle(const ScatterAccumulator& acc);

}  // namespace conicscan
