#include "quad/srbd.hpp"

#include <cmath>
#include <stdexcept>

namespace quad {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rot_z(double yaw) {
  Mat3 r;
  const double c = std::cos(yaw), s = std::sin(yaw);
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

}  // namespace

void continuous_matrices(const RobotModel& model, double yaw,
                         const std::array<Vec3, 4>& foot_rel_com,
                         const std::array<bool, 4>& stance, StateMat& A_c,
                         InputMat& B_c) {
  const Mat3 rz = rot_z(yaw);
  const Mat3 inertia_body = model.inertia_diag.asDiagonal();
  const Mat3 inertia_world = rz * inertia_body * rz.transpose();
  const Eigen::FullPivLU<Mat3> lu(inertia_world);
  if (!lu.isInvertible())
    throw std::runtime_error("continuous_matrices: inertia matrix is not invertible");
  const Mat3 inertia_world_inv = lu.inverse();

  A_c.setZero();
  // euler rates ~= Rz^T omega under the small roll/pitch assumption
  A_c.block<3, 3>(0, 6) = rz.transpose();
  // position rate = velocity
  A_c.block<3, 3>(3, 9) = Mat3::Identity();
  // gravity augmentation feeds vertical acceleration
  A_c(11, 12) = -1.0;

  B_c.setZero();
  for (int k = 0; k < 4; ++k) {
    if (!stance[k]) continue;  // swing columns stay structurally zero
    B_c.block<3, 3>(6, 3 * k) = inertia_world_inv * skew(foot_rel_com[k]);
    B_c.block<3, 3>(9, 3 * k) = Mat3::Identity() / model.mass;
  }
}

void discretize(const StateMat& A_c, const InputMat& B_c, double dt,
                StateMat& A_d, InputMat& B_d) {
  if (!(dt > 0.0)) throw std::invalid_argument("discretize: dt must be > 0");
  A_d = StateMat::Identity() + A_c * dt;
  B_d = B_c * dt;
}

std::vector<SrbdState> reference_rollout(const CommandTwist& cmd, const SrbdState& x0,
                                         int horizon, double dt, double nominal_height) {
  if (horizon < 1) throw std::invalid_argument("reference_rollout: horizon must be >= 1");
  std::vector<SrbdState> refs(horizon + 1);
  double yaw = x0.euler_ypr[0];
  Vec3 pos(x0.position.x(), x0.position.y(), nominal_height);
  for (int i = 0; i <= horizon; ++i) {
    SrbdState& r = refs[i];
    r.euler_ypr = Vec3(yaw, 0.0, 0.0);
    r.position = pos;
    r.angular_velocity = Vec3(0.0, 0.0, cmd.wz);
    const double c = std::cos(yaw), s = std::sin(yaw);
    r.linear_velocity = Vec3(c * cmd.vx - s * cmd.vy, s * cmd.vx + c * cmd.vy, 0.0);
    r.gravity_aug = kGravity;
    pos += r.linear_velocity * dt;
    yaw += cmd.wz * dt;
  }
  return refs;
}

UncertaintyParams uncertainty_params(const RobotModel& model,
                                     const std::array<Vec3, 4>& foot_positions,
                                     const UncertaintyConfig& config) {
  if (config.mass_var < 0.0 || config.inertia_var < 0.0 || config.foot_pos_var < 0.0 ||
      config.state_noise_var < 0.0)
    throw std::invalid_argument("uncertainty_params: variances must be >= 0");
  UncertaintyParams u;
  u.delta_mean.setZero();
  u.delta_mean(0) = model.mass;
  u.delta_mean.segment<3>(1) = model.inertia_diag;
  for (int k = 0; k < 4; ++k) u.delta_mean.segment<3>(4 + 3 * k) = foot_positions[k];
  u.sigma_delta.setZero();
  u.sigma_delta(0, 0) = config.mass_var;
  u.sigma_delta.block<3, 3>(1, 1) = config.inertia_var * Mat3::Identity();
  for (int k = 0; k < 4; ++k)
    u.sigma_delta.block<3, 3>(4 + 3 * k, 4 + 3 * k) = config.foot_pos_var * Mat3::Identity();
  u.sigma_w = config.state_noise_var * StateMat::Identity();
  return u;
}

}  // namespace quad
