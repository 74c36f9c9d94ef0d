#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>

#include "quad/robot_model.hpp"

namespace quad {

/// Linear Kalman filter over base position/velocity and the four world-frame
/// foot positions (18 states). Orientation is taken from the IMU as known.
struct EstimatorState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  std::array<Vec3, 4> foot_positions{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Eigen::Matrix<double, 18, 18> covariance = Eigen::Matrix<double, 18, 18>::Identity() * 1e-2;
};

struct EstimatorNoise {
  double process_position = 1e-4;
  double process_velocity = 1e-3;
  double process_foot = 1e-5;
  double process_foot_swing = 1e-2;  // per-update inflation while airborne
  double meas_stance = 1e-4;
  double meas_swing_inflation = 1e2;
};

class StateEstimator {
 public:
  explicit StateEstimator(EstimatorNoise noise = {}) : noise_(noise) {}

  /// Constant-acceleration propagation; feet are propagated as constants.
  void predict(const Vec3& body_acceleration_world, double dt);

  /// Fuse stance-leg kinematic odometry: per leg the rotated body-frame foot
  /// position must match foot_world - base_position. Swing legs keep the
  /// inflated noise so the update is effectively a no-op for them.
  void update(const std::array<Vec3, 4>& leg_fk_body, const std::array<bool, 4>& stance,
              const Eigen::Quaterniond& orientation);

  const EstimatorState& state() const { return state_; }
  EstimatorState& state() { return state_; }

 private:
  EstimatorState state_;
  EstimatorNoise noise_;
};

}  // namespace quad
