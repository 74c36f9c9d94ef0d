#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <memory>
#include <string>

#include "quad/mpc.hpp"
#include "quad/robot_model.hpp"

namespace quad {

constexpr int kObsDim = 65;
using ObsVec = Eigen::Matrix<double, kObsDim, 1>;

struct LlcGains {
  Vec12 kp = Vec12::Constant(28.0);  // N m / rad
  Vec12 kd = Vec12::Constant(1.0);   // N m s / rad
};

/// Fixed-order 65-entry observation.
struct Observation {
  Vec3 body_angular_velocity;   // rad/s, body frame
  Vec3 projected_gravity;       // unit, body frame
  Vec3 command;                 // vx, vy, wz
  Vec12 joint_positions;
  Vec12 joint_velocities;
  Vec12 previous_action;
  Vec12 reference_joint_positions;
  Eigen::Vector4d reference_contact_states;
  Eigen::Vector4d phase_left_time;  // s

  ObsVec to_vector() const;
};

/// Per-tick reference produced by the MPC-side pipeline.
struct MotionReference {
  Vec12 joint_positions = Vec12::Zero();
  SrbdState base;
  std::array<bool, 4> contact_states{true, true, true, true};
};

/// tau = clamp(Kp (a - q) - Kd qd + tau_ff, +-limit). With tau_ff = 0 this
/// is the nominal PD law.
Vec12 llc_torque(const Vec12& action, const Vec12& q, const Vec12& qd, const Vec12& tau_ff,
                 const LlcGains& gains, double limit);

/// Per stance leg -J(q)^T R^T f_world; swing legs forced to zero.
Vec12 stance_feedforward(const RobotModel& model, const Vec12& q,
                         const Eigen::Matrix<double, 12, 1>& grf_world,
                         const std::array<bool, 4>& stance,
                         const Eigen::Quaterniond& orientation);

struct SensorSample {
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Vec3 body_angular_velocity = Vec3::Zero();  // body frame
  Vec12 joint_positions = Vec12::Zero();
  Vec12 joint_velocities = Vec12::Zero();
};

Observation assemble_observation(const SensorSample& sensors, const CommandTwist& cmd,
                                 const MotionReference& ref, const Vec12& prev_action,
                                 const Eigen::Vector4d& phase_left_time);

/// Policy interface: any mapping from the 65-dim observation to 12 target
/// joint positions. The reference-tracking stand-in echoes the reference.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Vec12 act(const Observation& obs) = 0;
};

class ReferenceTrackingPolicy : public Policy {
 public:
  Vec12 act(const Observation& obs) override { return obs.reference_joint_positions; }
};

/// Affine-layer network loaded from the documented binary format
/// (magic "QPOL", layer dims, row-major float64 weights, tanh hidden units).
class AffinePolicy : public Policy {
 public:
  static std::unique_ptr<AffinePolicy> load(const std::string& path);
  Vec12 act(const Observation& obs) override;

  struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
  };
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
};

/// Clamp an action to joint limits (symmetric box by default).
Vec12 clamp_action(const Vec12& action, double limit = 2.8);

enum class TrackKind { PoseQuat, Vector };

/// r = exp(-||(x* (-) x) / sigma||^2); quaternion difference uses the
/// shortest-arc angle so q and -q are identical.
double tracking_reward(const Eigen::VectorXd& x, const Eigen::VectorXd& x_star, double sigma,
                       TrackKind kind);

struct RewardBreakdown {
  double rotation = 0.0;
  double linear_velocity = 0.0;
  double angular_velocity = 0.0;
  double joint_position = 0.0;
  double action_rate = 0.0;      // penalty, <= 0
  double joint_accel = 0.0;      // penalty, <= 0
  double total = 0.0;
};

RewardBreakdown total_reward(const SrbdState& state, const Vec12& joint_positions,
                             const MotionReference& ref, const Vec12& action,
                             const Vec12& prev_action, const Vec12& joint_accel);

}  // namespace quad
