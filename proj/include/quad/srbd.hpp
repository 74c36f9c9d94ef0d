#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "quad/robot_model.hpp"

namespace quad {

constexpr int kStateDim = 13;  // [euler_ypr(3), position(3), omega(3), velocity(3), g]
constexpr int kInputDim = 12;  // 4 feet x 3 force axes, world frame

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kInputDim>;
using InputCov = Eigen::Matrix<double, kInputDim, kInputDim>;

/// Base state of the single-rigid-body model.
struct SrbdState {
  Vec3 euler_ypr = Vec3::Zero();       // yaw, pitch, roll (rad)
  Vec3 position = Vec3::Zero();        // m, world frame
  Vec3 angular_velocity = Vec3::Zero(); // rad/s, world frame
  Vec3 linear_velocity = Vec3::Zero(); // m/s, world frame
  double gravity_aug = kGravity;       // m/s^2, constant augmentation

  StateVec to_vector() const {
    StateVec x;
    x << euler_ypr, position, angular_velocity, linear_velocity, gravity_aug;
    return x;
  }
  static SrbdState from_vector(const StateVec& x) {
    SrbdState s;
    s.euler_ypr = x.segment<3>(0);
    s.position = x.segment<3>(3);
    s.angular_velocity = x.segment<3>(6);
    s.linear_velocity = x.segment<3>(9);
    s.gravity_aug = x(12);
    return s;
  }
};

struct CommandTwist {
  double vx = 0.0;  // m/s, heading
  double vy = 0.0;  // m/s, lateral
  double wz = 0.0;  // rad/s, turning
};

/// Mean and covariance of the model parameters the stochastic SRBD treats as
/// uncertain: [mass, diag(I), r_1..r_4], plus additive state noise.
struct UncertaintyParams {
  Eigen::Matrix<double, 16, 1> delta_mean;
  Eigen::Matrix<double, 16, 16> sigma_delta;
  StateMat sigma_w;
};

struct UncertaintyConfig {
  double mass_var = 1.0;       // kg^2
  double inertia_var = 0.01;   // (kg m^2)^2
  double foot_pos_var = 1e-4;  // m^2
  double state_noise_var = 1e-4;
};

/// Continuous-time linearization about the current yaw, with foot moment
/// arms taken about the base position. Swing-foot columns of B are zero.
void continuous_matrices(const RobotModel& model, double yaw,
                         const std::array<Vec3, 4>& foot_rel_com,
                         const std::array<bool, 4>& stance, StateMat& A_c,
                         InputMat& B_c);

/// Forward-Euler discretization: A_d = I + A_c dt, B_d = B_c dt.
void discretize(const StateMat& A_c, const InputMat& B_c, double dt,
                StateMat& A_d, InputMat& B_d);

/// Reference trajectory under a constant yaw-frame twist command: level base
/// at nominal height, heading/lateral velocity rotated by the integrated yaw.
std::vector<SrbdState> reference_rollout(const CommandTwist& cmd, const SrbdState& x0,
                                         int horizon, double dt, double nominal_height);

UncertaintyParams uncertainty_params(const RobotModel& model,
                                     const std::array<Vec3, 4>& foot_positions,
                                     const UncertaintyConfig& config);

}  // namespace quad
