#include "conicscan/ransac.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace conicscan {
namespace {

using Row6 = Eigen::Matrix<double, 1, 6>;

Row6 design_row(const Vec2& p, const Vec2& o) {
  const double x = p.x() - o.x(), y = p.y() - o.y();
  return {x * x, x * y, y * y, x, y, 1.0};
}

ConicCoefficients from_vector(const Eigen::Matrix<double, 6, 1>& v) { return {v(0), v(1), v(2), v(3), v(4), v(5)}; }

bool acceptable(const GeometricEllipse2D& e, const RansacConfig& cfg) {
  return std::isfinite(e.r_major) && e.r_minor > 0.0 && e.r_minor >= cfg.ratio_min * e.r_major;
}

std::vector<int> inliers_of(const GeometricEllipse2D& e, std::span<const Vec2> points, double tol) {
  std::vector<int> in;
  for (size_t i = 0; i < points.size(); ++i)
    if (point_error(e, points[i].x(), points[i].y()) <= tol) in.push_back(static_cast<int>(i));
  return in;
}

}  // namespace

void RansacConfig::validate() const {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("ransac: confidence must be in (0, 1)");
  if (!(inlier_ratio > 0.0 && inlier_ratio <= 1.0)) throw std::invalid_argument("ransac: inlier_ratio must be in (0, 1]");
  if (samples != 4 && samples != 5) throw std::invalid_argument("ransac: samples must be 4 or 5");
  if (!(inlier_tol > 0.0)) throw std::invalid_argument("ransac: inlier_tol must be > 0");
  if (!(ratio_min >= 0.0 && ratio_min <= 1.0)) throw std::invalid_argument("ransac: ratio_min must be in [0, 1]");
  if (max_iterations < 1) throw std::invalid_argument("ransac: max_iterations must be >= 1");
}

int RansacConfig::iterations() const {
  return std::min(iteration_count(confidence, inlier_ratio, samples), max_iterations);
}

int iteration_count(double p, double w, int n) {
  if (!(p > 0.0 && p < 1.0) || !(w > 0.0 && w <= 1.0) || n < 1)
    throw std::invalid_argument("iteration_count: need 0 < p < 1, 0 < w <= 1, n >= 1");
  const double good = std::pow(w, n);
  if (good >= 1.0) return 1;
  const double k = std::ceil(std::log1p(-p) / std::log1p(-good));
  if (!(k < static_cast<double>(std::numeric_limits<int>::max()))) return std::numeric_limits<int>::max();
  return std::max(1, static_cast<int>(k));
}

std::optional<ConicCoefficients> roundest_conic_through(std::span<const Vec2> four) {
  if (four.size() != 4) throw std::invalid_argument("roundest_conic_through: need exactly 4 points");
  const Vec2 o = 0.25 * (four[0] + four[1] + four[2] + four[3]);
  double scale = 0.0;
  for (const auto& p : four) scale = std::max(scale, (p - o).norm());
  if (!(scale > 0.0)) return std::nullopt;

  Eigen::Matrix<double, 4, 6> D;
  for (int i = 0; i < 4; ++i) D.row(i) = design_row(o + (four[i] - o) / scale, o);
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 6>> svd(D, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(3) > 1e-10 * sv(0))) return std::nullopt;  // three collinear points or repeats
  const Eigen::Matrix<double, 6, 2> N = svd.matrixV().rightCols<2>();

  // maximize (4ac - b^2) / (a^2 + b^2/2 + c^2) over a = N t; the ratio peaks
  // at 2 exactly for circles
  Eigen::Matrix<double, 6, 6> C = Eigen::Matrix<double, 6, 6>::Zero();
  C(0, 2) = C(2, 0) = 2.0;
  C(1, 1) = -1.0;
  Eigen::Matrix<double, 6, 6> W = Eigen::Matrix<double, 6, 6>::Zero();
  W(0, 0) = W(2, 2) = 1.0;
  W(1, 1) = 0.5;
  const Eigen::Matrix2d A = N.transpose() * C * N;
  const Eigen::Matrix2d B = N.transpose() * W * N;
  if (!(B.determinant() > 1e-12 * B.squaredNorm())) return std::nullopt;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(A, B);
  if (es.info() != Eigen::Success || !(es.eigenvalues()(1) > 0.0)) return std::nullopt;
  Eigen::Matrix<double, 6, 1> a = N * es.eigenvectors().col(1);

  // undo the scaling x' = x / s about o
  a(0) /= scale * scale;
  a(1) /= scale * scale;
  a(2) /= scale * scale;
  a(3) /= scale;
  a(4) /= scale;
  return from_vector(a).to_absolute(o);
}

std::optional<ConicCoefficients> sample_conic(std::span<const Vec2> sample, int samples) {
  if (samples == 4) return roundest_conic_through(sample);
  return fit_points(sample, kMinConicPoints);
}

std::optional<RansacResult> ransac_ellipse(std::span<const Vec2> points, const RansacConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int n = cfg.samples;
  if (static_cast<int>(points.size()) < n) return std::nullopt;

  const int k = cfg.iterations();
  std::vector<int> index(points.size());
  std::vector<Vec2> sample(static_cast<size_t>(n));
  RansacResult best;
  bool found = false;

  for (int it = 0; it < k; ++it) {
    // partial Fisher-Yates, fresh draw every round
    for (int i = 0; i < static_cast<int>(index.size()); ++i) index[i] = i;
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(index.size()) - 1);
      std::swap(index[i], index[pick(rng)]);
      sample[i] = points[index[i]];
    }
    const auto conic = sample_conic(sample, n);
    if (!conic) continue;
    const auto e = to_geometric(*conic);
    if (!e || !acceptable(*e, cfg)) continue;
    ++best.candidates;
    auto in = inliers_of(*e, points, cfg.inlier_tol);
    if (!found || in.size() > best.inliers.size()) {
      best.conic = *conic;
      best.ellipse = *e;
      best.inliers = std::move(in);
      found = true;
    }
  }
  if (!found) return std::nullopt;
  best.iterations = k;

  std::vector<Vec2> support;
  for (int i : best.inliers) support.push_back(points[i]);
  if (auto refit = fit_points(support, kMinFitPoints)) {
    if (auto e = to_geometric(*refit); e && acceptable(*e, cfg)) {
      best.conic = *refit;
      best.ellipse = *e;
      best.inliers = inliers_of(*e, points, cfg.inlier_tol);
    }
  }
  return best;
}

std::optional<RansacResult> ransac_ellipse(std::span<const Vec2> points, const RansacConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ransac_ellipse(points, cfg, rng);
}

}  // namespace conicscan
