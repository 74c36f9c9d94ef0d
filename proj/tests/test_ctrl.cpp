#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>

#include "quad/ctrl.hpp"

using namespace quad;

TEST_CASE("llc torque formula and clamp") {
  LlcGains gains;
  Vec12 action = Vec12::Constant(0.2);
  Vec12 q = Vec12::Constant(0.1);
  Vec12 qd = Vec12::Constant(0.5);
  Vec12 ff = Vec12::Constant(1.0);
  const Vec12 tau = llc_torque(action, q, qd, ff, gains, 23.7);
  for (int i = 0; i < 12; ++i)
    CHECK(tau(i) == doctest::Approx(28.0 * 0.1 - 1.0 * 0.5 + 1.0).epsilon(1e-12));
  // saturation
  const Vec12 sat = llc_torque(Vec12::Constant(10.0), q, qd, ff, gains, 23.7);
  for (int i = 0; i < 12; ++i) CHECK(sat(i) == 23.7);
  const Vec12 satn = llc_torque(Vec12::Constant(-10.0), q, qd, ff, gains, 23.7);
  for (int i = 0; i < 12; ++i) CHECK(satn(i) == -23.7);
}

TEST_CASE("stance feedforward matches the per-leg jacobian oracle") {
  RobotModel m;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    Vec12 q;
    for (int i = 0; i < 12; ++i) q(i) = u(rng);
    Eigen::Matrix<double, 12, 1> grf;
    for (int i = 0; i < 12; ++i) grf(i) = 50.0 * u(rng);
    const Eigen::Quaterniond orient(Eigen::AngleAxisd(0.3 * u(rng), Vec3::UnitZ()) *
                                    Eigen::AngleAxisd(0.1 * u(rng), Vec3::UnitY()));
    const std::array<bool, 4> stance{true, false, true, true};
    const Vec12 tau = stance_feedforward(m, q, grf, stance, orient);
    const Mat3 r = orient.toRotationMatrix();
    for (int k = 0; k < 4; ++k) {
      if (!stance[k]) {
        CHECK(tau.segment<3>(3 * k).norm() == 0.0);
        continue;
      }
      const Mat3 jac = leg_jacobian(m, k, q.segment<3>(3 * k));
      const Vec3 expect = -jac.transpose() * (r.transpose() * grf.segment<3>(3 * k));
      CHECK((tau.segment<3>(3 * k) - expect).norm() < 1e-12);
    }
  }
}

TEST_CASE("action clamp is a symmetric box") {
  Vec12 a;
  for (int i = 0; i < 12; ++i) a(i) = (i - 6) * 1.0;
  const Vec12 c = clamp_action(a, 2.8);
  for (int i = 0; i < 12; ++i) CHECK(c(i) == std::clamp(a(i), -2.8, 2.8));
}

TEST_CASE("tracking reward closed forms") {
  // vector kind: r = 1 at zero error, e^-1 at error = sigma
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3), xs = Eigen::VectorXd::Zero(3);
  CHECK(tracking_reward(x, xs, 0.25, TrackKind::Vector) == doctest::Approx(1.0).epsilon(1e-12));
  xs(0) = 0.25;
  CHECK(tracking_reward(x, xs, 0.25, TrackKind::Vector) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // quaternion kind: q and -q are the same rotation
  Eigen::VectorXd qa(4), qb(4);
  qa << 1, 0, 0, 0;
  qb << -1, 0, 0, 0;
  CHECK(tracking_reward(qa, qb, 0.02, TrackKind::PoseQuat) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // rotation by angle sigma about x: r = e^-1
  const double sigma = 0.02;
  const Eigen::Quaterniond rot(Eigen::AngleAxisd(sigma, Vec3::UnitX()));
  Eigen::VectorXd qr(4);
  qr << rot.w(), rot.x(), rot.y(), rot.z();
  CHECK(tracking_reward(qa, qr, sigma, TrackKind::PoseQuat) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK_THROWS_AS(tracking_reward(x, xs, 0.0, TrackKind::Vector), std::domain_error);
}

TEST_CASE("total reward is exactly 3 at perfect tracking") {
  SrbdState state;
  MotionReference ref;
  state.euler_ypr = Vec3(0.4, 0.0, 0.0);  // yaw does not enter the rotation term
  ref.base.euler_ypr = Vec3(-0.2, 0.0, 0.0);
  const Vec12 zero = Vec12::Zero();
  const RewardBreakdown r = total_reward(state, zero, ref, zero, zero, zero);
  CHECK(std::abs(r.total - 3.0) < 1e-12);
  CHECK(std::abs(r.rotation - 0.5) < 1e-12);
  CHECK(std::abs(r.linear_velocity - 1.0) < 1e-12);
  CHECK(std::abs(r.angular_velocity - 0.5) < 1e-12);
  CHECK(std::abs(r.joint_position - 1.0) < 1e-12);
  CHECK(r.action_rate == 0.0);
  CHECK(r.joint_accel == 0.0);
}

TEST_CASE("reward penalties are quadratic with the documented weights") {
  SrbdState state;
  MotionReference ref;
  const Vec12 zero = Vec12::Zero();
  Vec12 action = Vec12::Zero();
  action(0) = 0.1;
  const RewardBreakdown r = total_reward(state, zero, ref, action, zero, zero);
  CHECK(r.action_rate == doctest::Approx(-5e-3 * 0.01).epsilon(1e-12));
  Vec12 accel = Vec12::Zero();
  accel(3) = 100.0;
  const RewardBreakdown r2 = total_reward(state, zero, ref, zero, zero, accel);
  CHECK(r2.joint_accel == doctest::Approx(-1.25e-7 * 1e4).epsilon(1e-12));
}

TEST_CASE("observation vector layout is the documented 65-entry order") {
  SensorSample s;
  s.body_angular_velocity = Vec3(1, 2, 3);
  for (int i = 0; i < 12; ++i) {
    s.joint_positions(i) = 10 + i;
    s.joint_velocities(i) = 30 + i;
  }
  CommandTwist cmd{0.5, -0.1, 0.2};
  MotionReference ref;
  for (int i = 0; i < 12; ++i) ref.joint_positions(i) = 70 + i;
  ref.contact_states = {true, false, true, false};
  Vec12 prev;
  for (int i = 0; i < 12; ++i) prev(i) = 50 + i;
  Eigen::Vector4d phase(0.1, 0.2, 0.3, 0.4);
  const Observation o = assemble_observation(s, cmd, ref, prev, phase);
  const ObsVec v = o.to_vector();
  REQUIRE(v.size() == 65);
  CHECK(v(0) == 1.0);
  CHECK((v.segment<3>(3) - Vec3(0, 0, -1)).norm() < 1e-12);  // identity orientation
  CHECK(v(6) == 0.5);
  CHECK(v(8) == 0.2);
  CHECK(v(9) == 10.0);
  CHECK(v(21) == 30.0);
  CHECK(v(33) == 50.0);
  CHECK(v(45) == 70.0);
  CHECK(v(57) == 1.0);
  CHECK(v(58) == 0.0);
  CHECK(v(61) == 0.1);
  CHECK(v(64) == 0.4);
}

TEST_CASE("affine policy loads the binary format and evaluates tanh layers") {
  // two layers: 65 -> 8 (tanh) -> 12
  const std::string path = "/tmp/quad_test_policy.bin";
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd W1(8, 65), W2(12, 8);
  Eigen::VectorXd b1(8), b2(12);
  for (int i = 0; i < W1.size(); ++i) W1.data()[i] = 0.1 * nd(rng);
  for (int i = 0; i < W2.size(); ++i) W2.data()[i] = 0.1 * nd(rng);
  for (int i = 0; i < 8; ++i) b1(i) = 0.1 * nd(rng);
  for (int i = 0; i < 12; ++i) b2(i) = 0.1 * nd(rng);
  {
    std::ofstream out(path, std::ios::binary);
    out.write("QPOL", 4);
    auto w32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
    w32(2);
    auto write_layer = [&](const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
      w32(static_cast<std::uint32_t>(W.cols()));
      w32(static_cast<std::uint32_t>(W.rows()));
      for (int r = 0; r < W.rows(); ++r)
        for (int c = 0; c < W.cols(); ++c) {
          const double v = W(r, c);
          out.write(reinterpret_cast<const char*>(&v), 8);
        }
      out.write(reinterpret_cast<const char*>(b.data()), 8 * b.size());
    };
    write_layer(W1, b1);
    write_layer(W2, b2);
  }
  auto policy = AffinePolicy::load(path);
  Observation o;
  o.body_angular_velocity = Vec3(0.1, 0.2, 0.3);
  o.projected_gravity = Vec3(0, 0, -1);
  o.command = Vec3(0.5, 0, 0);
  o.joint_positions.setConstant(0.1);
  o.joint_velocities.setConstant(-0.1);
  o.previous_action.setConstant(0.05);
  o.reference_joint_positions.setConstant(0.2);
  o.reference_contact_states.setOnes();
  o.phase_left_time.setConstant(0.1);
  const Vec12 got = policy->act(o);
  const Eigen::VectorXd h = (W1 * o.to_vector() + b1).array().tanh();
  const Eigen::VectorXd expect = W2 * h + b2;
  CHECK((got - Vec12(expect)).norm() < 1e-12);
  std::remove(path.c_str());
  CHECK_THROWS_AS(AffinePolicy::load("/tmp/does_not_exist.bin"), std::runtime_error);
}
