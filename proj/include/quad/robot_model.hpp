#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace quad {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec12 = Eigen::Matrix<double, 12, 1>;

// Leg ordering used everywhere: FL, FR, RL, RR.
enum class Leg : int { FL = 0, FR = 1, RL = 2, RR = 3 };
constexpr int kNumLegs = 4;

constexpr double kGravity = 9.81;

/// Physical parameters shared by the controller, simulator and planners.
/// Values are configuration defaults, loadable from JSON.
struct RobotModel {
  double mass = 15.0;                        // kg
  Vec3 inertia_diag{0.10, 0.25, 0.30};       // kg m^2, body frame
  std::array<Vec3, 4> hip_offsets{
      Vec3{0.19, 0.095, 0.0},                // FL
      Vec3{0.19, -0.095, 0.0},               // FR
      Vec3{-0.19, 0.095, 0.0},               // RL
      Vec3{-0.19, -0.095, 0.0}};             // RR
  double abduction_offset = 0.095;           // m, lateral hip-to-thigh link
  double thigh_length = 0.213;               // m
  double calf_length = 0.213;                // m
  double friction_mu = 0.5;                  // controller friction coefficient
  double torque_limit = 23.7;                // N m per joint
  double nominal_height = 0.30;              // m, standing base height

  // +1 for left legs (abduction link points +y), -1 for right legs.
  double side_sign(int leg) const { return (leg == 0 || leg == 2) ? 1.0 : -1.0; }

  void validate() const;

  static RobotModel from_json_file(const std::string& path);
  static RobotModel from_json_string(const std::string& text);
  std::string to_json_string() const;
};

struct LegJointState {
  Vec3 q = Vec3::Zero();    // rad: abduction, hip, knee
  Vec3 qd = Vec3::Zero();   // rad/s
};

class OutOfWorkspaceError : public std::runtime_error {
 public:
  explicit OutOfWorkspaceError(const std::string& what) : std::runtime_error(what) {}
};

/// Foot position in the body frame. Zero configuration points the leg
/// straight down: foot at hip + (0, side*abduction, -(thigh+calf)).
Vec3 forward_kinematics(const RobotModel& model, int leg, const Vec3& q);

/// 3x3 Jacobian d(foot position)/dq of forward_kinematics.
Mat3 leg_jacobian(const RobotModel& model, int leg, const Vec3& q);

/// Analytic inverse kinematics, knee-bent-backward branch.
/// Throws OutOfWorkspaceError when the target is unreachable.
Vec3 inverse_kinematics(const RobotModel& model, int leg, const Vec3& p);

/// tau_ff = -J^T f, mapping a ground reaction force to joint torques.
Vec3 feedforward_torque(const Mat3& jacobian, const Vec3& f_grf);

}  // namespace quad
