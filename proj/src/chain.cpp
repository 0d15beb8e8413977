#include "conicscan/chain.hpp"

#include "conicscan/ellipse_fit.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace conicscan {
namespace {

// A circle this much larger than the spread of its points is indistinguishable
// from a line.
constexpr double kMaxRadiusToSpread = 50.0;

}  // namespace

void ChainConfig::validate() const {
  if (!(phi > 0.0)) throw std::invalid_argument("chain: phi must be positive");
  if (k_neighbors < 1) throw std::invalid_argument("chain: k must be at least 1");
  if (min_chain < 3) throw std::invalid_argument("chain: min_chain must be at least 3");
}

double Circle3D::angle_of(const Vec3& p) const {
  const Vec3 d = p - center;
  return std::atan2(d.dot(v_axis), d.dot(u_axis));
}

Vec3 Circle3D::at(double angle) const {
  return center + radius * (std::cos(angle) * u_axis + std::sin(angle) * v_axis);
}

std::vector<Vec3> EllipseChain::centers() const {
  std::vector<Vec3> out;
  out.reserve(ellipses.size());
  for (const auto& e : ellipses) out.push_back(e.center);
  return out;
}

std::vector<EllipseChain> build_components(std::span<const Ellipse> input, const ChainConfig& cfg) {
  std::vector<Ellipse> ellipses(input.begin(), input.end());
  std::stable_sort(ellipses.begin(), ellipses.end(), [](const Ellipse& a, const Ellipse& b) {
    return a.row != b.row ? a.row < b.row : a.first_column < b.first_column;
  });

  // row -> [first index, last index + 1)
  std::map<int, std::pair<size_t, size_t>> rows;
  for (size_t i = 0; i < ellipses.size(); ++i) {
    auto [it, inserted] = rows.try_emplace(ellipses[i].row, i, i + 1);
    if (!inserted) it->second.second = i + 1;
  }

  const size_t n = ellipses.size();
  constexpr size_t kNone = std::numeric_limits<size_t>::max();
  std::vector<size_t> next(n, kNone);
  std::vector<bool> has_pred(n, false);

  for (size_t i = 0; i < n; ++i) {
    const auto& e = ellipses[i];
    for (int gap = 1; gap <= cfg.k_neighbors; ++gap) {
      auto it = rows.find(e.row + gap);
      if (it == rows.end()) continue;
      size_t best = kNone;
      double best_dist = cfg.phi;
      for (size_t j = it->second.first; j < it->second.second; ++j) {
        if (has_pred[j]) continue;
        const double dist = (ellipses[j].center - e.center).norm();
        if (dist <= best_dist) {
          best_dist = dist;
          best = j;
        }
      }
      if (best != kNone) {
        next[i] = best;
        has_pred[best] = true;
        break;
      }
    }
  }

  std::vector<EllipseChain> chains;
  for (size_t i = 0; i < n; ++i) {
    if (has_pred[i]) continue;
    EllipseChain chain;
    for (size_t j = i; j != kNone; j = next[j]) chain.ellipses.push_back(ellipses[j]);
    if (static_cast<int>(chain.size()) >= cfg.min_chain) chains.push_back(std::move(chain));
  }
  return chains;
}

void MomentAccumulator3D::add(const Vec3& p) {
  if (n_ == 0) origin_ = p;
  const Vec3 d = p - origin_;
  sum_ += d;
  outer_.noalias() += d * d.transpose();
  ++n_;
}

Vec3 MomentAccumulator3D::mean() const {
  return n_ ? Vec3(origin_ + sum_ / n_) : Vec3(Vec3::Zero());
}

Eigen::Matrix3d MomentAccumulator3D::covariance() const {
  if (n_ == 0) return Eigen::Matrix3d::Zero();
  const Vec3 m = sum_ / n_;
  return outer_ / n_ - m * m.transpose();
}

std::optional<LineFit3D> fit_line(std::span<const Vec3> points) {
  if (points.size() < 2) return std::nullopt;
  MomentAccumulator3D acc;
  for (const auto& p : points) acc.add(p);
  const Eigen::Matrix3d cov = acc.covariance();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d values = eig.eigenvalues();  // ascending
  if (!(values(2) > 0.0)) return std::nullopt;

  LineFit3D fit;
  fit.line.anchor = acc.mean();
  fit.line.direction = eig.eigenvectors().col(2).normalized();
  if ((points.back() - points.front()).dot(fit.line.direction) < 0.0) fit.line.direction = -fit.line.direction;
  fit.residual = std::sqrt(std::max(0.0, values(0) + values(1)));
  return fit;
}

std::optional<LineFit3D> fit_center_line(const EllipseChain& chain) {
  if (chain.size() < 3) return std::nullopt;
  const auto centers = chain.centers();
  return fit_line(centers);
}

std::optional<CircleFit3D> fit_circle3d(std::span<const Vec3> points) {
  if (points.size() < 3) return std::nullopt;
  MomentAccumulator3D acc;
  for (const auto& p : points) acc.add(p);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(acc.covariance());
  const Eigen::Vector3d values = eig.eigenvalues();
  if (!(values(2) > 0.0) || values(1) <= 1e-12 * values(2)) return std::nullopt;

  const Vec3 mean = acc.mean();
  const Vec3 u = eig.eigenvectors().col(2);
  const Vec3 v = eig.eigenvectors().col(1);
  ScatterAccumulator planar(Vec2::Zero());
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    planar.add(d.dot(u), d.dot(v));
  }
  const auto c2 = fit_circle(planar);
  if (!c2) return std::nullopt;
  const double spread = 2.0 * std::sqrt(values(2));
  if (c2->radius > kMaxRadiusToSpread * spread) return std::nullopt;

  CircleFit3D fit;
  fit.circle.center = mean + c2->center.x() * u + c2->center.y() * v;
  fit.circle.u_axis = u;
  fit.circle.v_axis = v;
  fit.circle.normal = u.cross(v);
  fit.circle.radius = c2->radius;
  double ss = 0.0;
  for (const auto& p : points) {
    const Vec3 d = p - fit.circle.center;
    const double off = d.dot(fit.circle.normal);
    const double in = (d - off * fit.circle.normal).norm() - fit.circle.radius;
    ss += in * in + off * off;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

std::optional<CircleFit3D> fit_center_circle(const EllipseChain& chain) {
  const auto centers = chain.centers();
  return fit_circle3d(centers);
}

}  // namespace conicscan
