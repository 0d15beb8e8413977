#include "conicscan/tracking.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace conicscan {
namespace {

using H = Eigen::Matrix<double, 4, 7>;

H measurement_matrix() {
  H h = H::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
  h(3, 6) = 1.0;
  return h;
}

bool finite(const Measurement& m) { return m.position.allFinite() && std::isfinite(m.radius); }

}  // namespace

KalmanConfig KalmanConfig::steady() {
  KalmanConfig c;
  c.process_noise = 1e-6;
  return c;
}

void KalmanConfig::validate() const {
  if (!(process_noise >= 0.0)) throw std::invalid_argument("kalman: process_noise must be >= 0");
  if (!(radius_noise >= 0.0)) throw std::invalid_argument("kalman: radius_noise must be >= 0");
  if (!(measurement_sigma > 0.0)) throw std::invalid_argument("kalman: measurement_sigma must be > 0");
  if (!(measurement_sigma_per_meter >= 0.0)) throw std::invalid_argument("kalman: measurement_sigma_per_meter must be >= 0");
  if (!(initial_velocity_sigma > 0.0)) throw std::invalid_argument("kalman: initial_velocity_sigma must be > 0");
  if (!(gate_distance > 0.0)) throw std::invalid_argument("kalman: gate_distance must be > 0");
  if (max_missed < 1) throw std::invalid_argument("kalman: max_missed must be >= 1");
}

MeasurementNoise KalmanConfig::measurement_noise(double range) const {
  const double s = measurement_sigma + measurement_sigma_per_meter * std::abs(range);
  return MeasurementNoise::Identity() * s * s;
}

TrackState start_track(const Measurement& m, PrimitiveKind kind, int id, double t, const KalmanConfig& cfg) {
  if (!finite(m)) throw std::invalid_argument("tracking: non-finite measurement");
  TrackState s;
  s.x.head<3>() = m.position;
  s.x(6) = m.radius;
  const MeasurementNoise r = cfg.measurement_noise(m.position.norm());
  s.P.setZero();
  s.P.block<3, 3>(0, 0) = r.block<3, 3>(0, 0);
  s.P.block<3, 3>(3, 3) = Eigen::Matrix3d::Identity() * cfg.initial_velocity_sigma * cfg.initial_velocity_sigma;
  s.P(6, 6) = r(3, 3);
  s.kind = kind;
  s.id = id;
  s.time = s.last_seen = s.prev_seen = t;
  s.updates = 1;
  s.last_meas = s.prev_meas = m;
  return s;
}

TrackState predict(const TrackState& track, double dt, const KalmanConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("tracking: predict needs dt > 0");
  TrackCovariance F = TrackCovariance::Identity();
  F.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity() * dt;

  const double q = cfg.process_noise;
  TrackCovariance Q = TrackCovariance::Zero();
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  Q.block<3, 3>(0, 0) = I * q * dt * dt * dt / 3.0;
  Q.block<3, 3>(0, 3) = I * q * dt * dt / 2.0;
  Q.block<3, 3>(3, 0) = I * q * dt * dt / 2.0;
  Q.block<3, 3>(3, 3) = I * q * dt;
  Q(6, 6) = cfg.radius_noise * dt;

  TrackState out = track;
  out.x = F * track.x;
  out.P = F * track.P * F.transpose() + Q;
  out.P = 0.5 * (out.P + out.P.transpose());
  out.time = track.time + dt;
  return out;
}

Innovation innovation(const TrackState& track, const Measurement& m, const KalmanConfig& cfg) {
  const H h = measurement_matrix();
  Innovation in;
  in.residual.head<3>() = m.position - track.position();
  in.residual(3) = m.radius - track.radius();
  in.covariance = h * track.P * h.transpose() + cfg.measurement_noise(m.position.norm());
  in.nis = in.residual.dot(in.covariance.ldlt().solve(in.residual));
  return in;
}

TrackState update(const TrackState& track, const Measurement& m, const KalmanConfig& cfg, Innovation* info) {
  if (!finite(m)) throw std::invalid_argument("tracking: non-finite measurement");
  const H h = measurement_matrix();
  const Innovation in = innovation(track, m, cfg);
  // K = P H^T S^-1
  const Eigen::Matrix<double, 7, 4> K = in.covariance.ldlt().solve(h * track.P).transpose();

  TrackState out = track;
  out.x = track.x + K * in.residual;
  const TrackCovariance A = TrackCovariance::Identity() - K * h;
  out.P = A * track.P * A.transpose() + K * cfg.measurement_noise(m.position.norm()) * K.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  out.x(6) = std::max(out.x(6), std::numeric_limits<double>::min());

  out.prev_meas = track.last_meas;
  out.prev_seen = track.last_seen;
  out.last_meas = m;
  out.last_seen = track.time;
  out.updates = track.updates + 1;
  out.missed = 0;
  if (info) *info = in;
  return out;
}

std::vector<TrackState> associate_and_step(std::vector<TrackState> tracks, std::span<const Primitive> detections,
                                           double t, const KalmanConfig& cfg, int& next_id) {
  for (auto& tr : tracks) {
    if (t > tr.time) tr = predict(tr, t - tr.time, cfg);
  }

  // all admissible (track, detection) pairs, closest first
  struct Pair {
    double dist;
    size_t track;
    size_t det;
  };
  std::vector<Pair> pairs;
  for (size_t i = 0; i < tracks.size(); ++i) {
    for (size_t j = 0; j < detections.size(); ++j) {
      if (detections[j].kind() != tracks[i].kind) continue;
      const double d = (detections[j].position() - tracks[i].position()).norm();
      if (d <= cfg.gate_distance) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.track != b.track ? a.track < b.track : a.det < b.det;
  });

  std::vector<bool> track_used(tracks.size(), false), det_used(detections.size(), false);
  for (const auto& p : pairs) {
    if (track_used[p.track] || det_used[p.det]) continue;
    track_used[p.track] = det_used[p.det] = true;
    tracks[p.track] = update(tracks[p.track], Measurement::of(detections[p.det]), cfg);
  }

  std::vector<TrackState> out;
  for (size_t i = 0; i < tracks.size(); ++i) {
    if (!track_used[i]) ++tracks[i].missed;
    if (tracks[i].missed <= cfg.max_missed) out.push_back(std::move(tracks[i]));
  }
  for (size_t j = 0; j < detections.size(); ++j) {
    if (!det_used[j]) out.push_back(start_track(Measurement::of(detections[j]), detections[j].kind(), next_id++, t, cfg));
  }
  return out;
}

std::optional<VelocityEstimate> estimate_velocity(const TrackState& track) {
  if (track.updates < 2) return std::nullopt;
  VelocityEstimate v;
  v.filtered = track.velocity().norm();
  const double dt = track.last_seen - track.prev_seen;
  if (dt > 0.0) v.raw = (track.last_meas.position - track.prev_meas.position).norm() / dt;
  return v;
}

Tracker::Tracker(KalmanConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const std::vector<TrackState>& Tracker::step(std::span<const Primitive> detections, double t) {
  tracks_ = associate_and_step(std::move(tracks_), detections, t, cfg_, next_id_);
  return tracks_;
}

const TrackState* Tracker::find(int id) const {
  for (const auto& t : tracks_)
    if (t.id == id) return &t;
  return nullptr;
}

bool is_psd(const TrackCovariance& P, double tol) {
  if (!P.allFinite()) return false;
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<TrackCovariance> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

}  // namespace conicscan
