#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <stdexcept>

#include "quad/robot_model.hpp"
#include "quad/terrain.hpp"

namespace quad {

struct Payload {
  double mass = 0.0;        // kg
  Vec3 offset = Vec3::Zero();  // m, body frame
};

struct ActivePush {
  Vec3 force = Vec3::Zero();  // N, world frame, applied at the CoM
  double remaining = 0.0;     // s
};

/// Penalty-contact parameters of the ground-truth simulator. The simulator
/// friction deliberately differs from the controller's RobotModel mu.
struct SimParams {
  double contact_stiffness = 3e4;   // N/m
  double contact_damping = 300.0;   // N s/m
  double friction_mu = 0.7;
  double tangential_stiffness = 1e4;  // N/m, stick anchor spring
  double tangential_damping = 100.0;  // N s/m
  double joint_inertia = 0.02;      // kg m^2, virtual massless-leg inertia
  double joint_damping = 0.1;       // N m s/rad
};

struct WorldState {
  Vec3 position = Vec3::Zero();        // base origin, world frame
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Vec3 linear_velocity = Vec3::Zero(); // base origin, world frame
  Vec3 angular_velocity = Vec3::Zero(); // world frame
  Vec12 q = Vec12::Zero();
  Vec12 qd = Vec12::Zero();
  std::array<bool, 4> foot_contact{false, false, false, false};
  std::array<Vec3, 4> contact_anchor{};       // stick anchors, world frame
  std::array<Vec3, 4> contact_force{};        // last realized GRF, world frame
  Payload payload;
  ActivePush push;
  double time = 0.0;
  long tick = 0;
};

class SimulationBlowupError : public std::runtime_error {
 public:
  SimulationBlowupError(const std::string& what, long tick)
      : std::runtime_error(what + " at tick " + std::to_string(tick)), tick_(tick) {}
  long tick() const { return tick_; }

 private:
  long tick_;
};

class Simulator {
 public:
  Simulator(RobotModel model, SimParams params = {})
      : model_(std::move(model)), params_(params) {}

  /// Semi-implicit Euler step of the single rigid body plus massless legs
  /// with penalty ground contact. Deterministic.
  void step(WorldState& world, const Vec12& joint_torques, const Terrain& terrain,
            double dt) const;

  /// World-frame CoM acceleration realized in the last step (IMU model).
  const Vec3& last_com_acceleration() const { return last_accel_; }

  /// Total mass including payload.
  double total_mass(const WorldState& world) const {
    return model_.mass + world.payload.mass;
  }

  /// KE + gravity PE + contact spring PE, for settling diagnostics.
  double mechanical_energy(const WorldState& world, const Terrain& terrain) const;

  Vec3 foot_position_world(const WorldState& world, int leg) const;
  Vec3 foot_position_body(const WorldState& world, int leg) const {
    return forward_kinematics(model_, leg, world.q.segment<3>(3 * leg));
  }

  const RobotModel& model() const { return model_; }
  const SimParams& params() const { return params_; }

 private:
  RobotModel model_;
  SimParams params_;
  mutable Vec3 last_accel_ = Vec3::Zero();
};

/// Add a CoM force for the next `duration` seconds of simulated time.
void apply_push(WorldState& world, const Vec3& force, double duration);

/// Attach a point-mass payload at a body-frame offset. The controller's
/// RobotModel is never told about it.
void set_payload(WorldState& world, double mass, const Vec3& offset);

/// Roll/pitch beyond 0.6 rad or base height below 0.12 m above the terrain.
bool fall_detected(const WorldState& world, const Terrain& terrain);

/// Roll-pitch-yaw of a world orientation (yaw-pitch-roll order as stored in
/// SrbdState::euler_ypr).
Vec3 quat_to_ypr(const Eigen::Quaterniond& q);

}  // namespace quad
