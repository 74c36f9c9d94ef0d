#include "quad/ctrl.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace quad {

ObsVec Observation::to_vector() const {
  ObsVec v;
  v << body_angular_velocity, projected_gravity, command, joint_positions, joint_velocities,
      previous_action, reference_joint_positions, reference_contact_states, phase_left_time;
  return v;
}

Vec12 llc_torque(const Vec12& action, const Vec12& q, const Vec12& qd, const Vec12& tau_ff,
                 const LlcGains& gains, double limit) {
  const Vec12 tau =
      gains.kp.cwiseProduct(action - q) - gains.kd.cwiseProduct(qd) + tau_ff;
  return tau.cwiseMax(-limit).cwiseMin(limit);
}

Vec12 stance_feedforward(const RobotModel& model, const Vec12& q,
                         const Eigen::Matrix<double, 12, 1>& grf_world,
                         const std::array<bool, 4>& stance,
                         const Eigen::Quaterniond& orientation) {
  Vec12 tau = Vec12::Zero();
  const Mat3 r_wb = orientation.toRotationMatrix();
  for (int k = 0; k < 4; ++k) {
    if (!stance[k]) continue;
    const Vec3 q_leg = q.segment<3>(3 * k);
    const Vec3 f_body = r_wb.transpose() * grf_world.segment<3>(3 * k);
    const Mat3 jac = leg_jacobian(model, k, q_leg);
    tau.segment<3>(3 * k) = feedforward_torque(jac, f_body);
  }
  return tau;
}

Observation assemble_observation(const SensorSample& sensors, const CommandTwist& cmd,
                                 const MotionReference& ref, const Vec12& prev_action,
                                 const Eigen::Vector4d& phase_left_time) {
  Observation o;
  o.body_angular_velocity = sensors.body_angular_velocity;
  o.projected_gravity =
      sensors.orientation.toRotationMatrix().transpose() * Vec3(0.0, 0.0, -1.0);
  o.command = Vec3(cmd.vx, cmd.vy, cmd.wz);
  o.joint_positions = sensors.joint_positions;
  o.joint_velocities = sensors.joint_velocities;
  o.previous_action = prev_action;
  o.reference_joint_positions = ref.joint_positions;
  for (int k = 0; k < 4; ++k)
    o.reference_contact_states(k) = ref.contact_states[k] ? 1.0 : 0.0;
  o.phase_left_time = phase_left_time;
  if (!o.to_vector().allFinite())
    throw std::runtime_error("assemble_observation: non-finite observation");
  return o;
}

namespace {
constexpr char kPolicyMagic[4] = {'Q', 'P', 'O', 'L'};
}

std::unique_ptr<AffinePolicy> AffinePolicy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("AffinePolicy: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kPolicyMagic, 4) != 0)
    throw std::runtime_error("AffinePolicy: bad magic in " + path);
  std::uint32_t n_layers = 0;
  in.read(reinterpret_cast<char*>(&n_layers), 4);
  if (!in || n_layers == 0 || n_layers > 16)
    throw std::runtime_error("AffinePolicy: invalid layer count");
  auto policy = std::make_unique<AffinePolicy>();
  int expected_in = kObsDim;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    std::uint32_t in_dim = 0, out_dim = 0;
    in.read(reinterpret_cast<char*>(&in_dim), 4);
    in.read(reinterpret_cast<char*>(&out_dim), 4);
    if (!in || static_cast<int>(in_dim) != expected_in || out_dim == 0 || out_dim > 4096)
      throw std::runtime_error("AffinePolicy: layer dimension mismatch");
    Layer layer;
    layer.W.resize(out_dim, in_dim);
    layer.b.resize(out_dim);
    in.read(reinterpret_cast<char*>(layer.W.data()),
            static_cast<std::streamsize>(sizeof(double) * in_dim * out_dim));
    in.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(sizeof(double) * out_dim));
    if (!in) throw std::runtime_error("AffinePolicy: truncated file");
    // weights are stored row-major; Eigen default is column-major
    Eigen::MatrixXd wt = layer.W;
    for (std::uint32_t r = 0; r < out_dim; ++r)
      for (std::uint32_t c = 0; c < in_dim; ++c)
        layer.W(r, c) = wt.data()[r * in_dim + c];
    expected_in = static_cast<int>(out_dim);
    policy->layers_.push_back(std::move(layer));
  }
  if (expected_in != 12)
    throw std::runtime_error("AffinePolicy: final layer must output 12 values");
  return policy;
}

Vec12 AffinePolicy::act(const Observation& obs) {
  Eigen::VectorXd h = obs.to_vector();
  for (size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].W * h + layers_[l].b;
    if (l + 1 < layers_.size()) h = h.array().tanh().matrix();
  }
  return Vec12(h);
}

Vec12 clamp_action(const Vec12& action, double limit) {
  return action.cwiseMax(-limit).cwiseMin(limit);
}

double tracking_reward(const Eigen::VectorXd& x, const Eigen::VectorXd& x_star, double sigma,
                       TrackKind kind) {
  if (!(sigma > 0.0)) throw std::domain_error("tracking_reward: sigma must be > 0");
  double err2 = 0.0;
  if (kind == TrackKind::PoseQuat) {
    if (x.size() != 4 || x_star.size() != 4)
      throw std::invalid_argument("tracking_reward: quaternions must be 4-vectors");
    Eigen::Quaterniond qa(x(0), x(1), x(2), x(3));
    Eigen::Quaterniond qb(x_star(0), x_star(1), x_star(2), x_star(3));
    qa.normalize();
    qb.normalize();
    const double dot = std::min(1.0, std::abs(qa.dot(qb)));  // shortest arc
    const double angle = 2.0 * std::acos(dot);
    err2 = (angle / sigma) * (angle / sigma);
  } else {
    if (x.size() != x_star.size())
      throw std::invalid_argument("tracking_reward: size mismatch");
    err2 = ((x_star - x) / sigma).squaredNorm();
  }
  return std::exp(-err2);
}

namespace {

Eigen::Vector4d roll_pitch_quat(double roll, double pitch) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                               Eigen::AngleAxisd(roll, Vec3::UnitX());
  return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
}

}  // namespace

RewardBreakdown total_reward(const SrbdState& state, const Vec12& joint_positions,
                             const MotionReference& ref, const Vec12& action,
                             const Vec12& prev_action, const Vec12& joint_accel) {
  RewardBreakdown r;
  const Eigen::Vector4d q_meas = roll_pitch_quat(state.euler_ypr[2], state.euler_ypr[1]);
  const Eigen::Vector4d q_ref =
      roll_pitch_quat(ref.base.euler_ypr[2], ref.base.euler_ypr[1]);
  r.rotation = 0.5 * tracking_reward(q_meas, q_ref, 0.02, TrackKind::PoseQuat);
  r.linear_velocity =
      1.0 * tracking_reward(state.linear_velocity, ref.base.linear_velocity, 0.25,
                            TrackKind::Vector);
  r.angular_velocity =
      0.5 * tracking_reward(state.angular_velocity, ref.base.angular_velocity, 0.25,
                            TrackKind::Vector);
  r.joint_position =
      1.0 * tracking_reward(joint_positions, ref.joint_positions, 0.5, TrackKind::Vector);
  r.action_rate = -5e-3 * (action - prev_action).squaredNorm();
  r.joint_accel = -1.25e-7 * joint_accel.squaredNorm();
  r.total = r.rotation + r.linear_velocity + r.angular_velocity + r.joint_position +
            r.action_rate + r.joint_accel;
  return r;
}

}  // namespace quad
