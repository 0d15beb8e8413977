#pragma once

#include "conicscan/classify.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace conicscan {

/// State layout: position (m), velocity (m/s), radius (m).
using TrackVector = Eigen::Matrix<double, 7, 1>;
using TrackCovariance = Eigen::Matrix<double, 7, 7>;
using MeasurementNoise = Eigen::Matrix4d;

struct KalmanConfig {
  /// White acceleration noise density per axis, m^2/s^3.
  double process_noise = 0.5;
  /// Random-walk density of the radius, m^2/s.
  double radius_noise = 1e-8;
  /// Measurement sigma of each position axis and of the radius,
  /// sigma_0 + sigma_per_meter * range.
  double measurement_sigma = 1e-3;
  double measurement_sigma_per_meter = 1e-3;
  double initial_velocity_sigma = 1.0;  ///< m/s, spread of the unknown velocity of a new track
  double gate_distance = 0.3;           ///< meters between predicted and detected position
  int max_missed = 10;                  ///< frames without a detection before a track is dropped

  /// Near-rigid constant velocity (q = 1e-6) for objects that sit still or
  /// move steadily; smooths far more but follows maneuvers slowly.
  static KalmanConfig steady();

  void validate() const;
  MeasurementNoise measurement_noise(double range) const;
};

struct Measurement {
  Vec3 position = Vec3::Zero();
  double radius = 0.0;

  static Measurement of(const Primitive& p) { return {p.position(), p.radius()}; }
};

struct TrackState {
  TrackVector x = TrackVector::Zero();
  TrackCovariance P = TrackCovariance::Identity();
  double last_seen = 0.0;  ///< time of the last update
  double time = 0.0;       ///< time the state refers to
  PrimitiveKind kind = PrimitiveKind::Cylinder;
  int id = 0;
  int updates = 0;
  int missed = 0;  ///< frames since the last update

  // the last two raw measurements, for the finite-difference velocity
  Measurement last_meas;
  Measurement prev_meas;
  double prev_seen = 0.0;

  Vec3 position() const { return x.head<3>(); }
  Vec3 velocity() const { return x.segment<3>(3); }
  double radius() const { return x(6); }
  double distance() const { return position().norm(); }
};

/// New track at the measurement, velocity unknown.
TrackState start_track(const Measurement& m, PrimitiveKind kind, int id, double t, const KalmanConfig& cfg);

/// Constant-velocity prediction dt seconds ahead. Throws for dt <= 0.
TrackState predict(const TrackState& track, double dt, const KalmanConfig& cfg);

struct Innovation {
  Eigen::Vector4d residual = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double nis = 0.0;  ///< normalized innovation squared, chi-square with 4 dof when consistent
};

Innovation innovation(const TrackState& track, const Measurement& m, const KalmanConfig& cfg);

/// Kalman update with a position + radius measurement (Joseph form).
/// Throws std::invalid_argument for a non-finite measurement.
TrackState update(const TrackState& track, const Measurement& m, const KalmanConfig& cfg, Innovation* info = nullptr);

/// One frame: predict every track to time t, match detections by kind and
/// nearest predicted position within the gate, update the matched tracks,
/// start tracks for unmatched detections and drop tracks missed too often.
/// `next_id` supplies identifiers of new tracks.
std::vector<TrackState> associate_and_step(std::vector<TrackState> tracks, std::span<const Primitive> detections,
                                           double t, const KalmanConfig& cfg, int& next_id);

struct VelocityEstimate {
  double filtered = 0.0;  ///< |v| of the state, m/s
  double raw = 0.0;       ///< distance between the last two measurements over their time difference
};

/// nullopt until the track has been updated twice.
std::optional<VelocityEstimate> estimate_velocity(const TrackState& track);

/// Stateful convenience wrapper around associate_and_step().
class Tracker {
 public:
  explicit Tracker(KalmanConfig cfg = {});

  const std::vector<TrackState>& step(std::span<const Primitive> detections, double t);
  const std::vector<TrackState>& tracks() const { return tracks_; }
  const TrackState* find(int id) const;

 private:
  KalmanConfig cfg_;
  std::vector<TrackState> tracks_;
  int next_id_ = 1;
};

/// True when P is symmetric and its eigenvalues are >= -tol.
bool is_psd(const TrackCovariance& P, double tol = 1e-10);

}  // namespace conicscan
