#include <doctest.h>

#include <random>

#include "quad/srbd.hpp"

using namespace quad;

namespace {

StateVec xdot(const RobotModel& m, double yaw, const std::array<Vec3, 4>& rel,
              const std::array<bool, 4>& stance, const StateVec& x,
              const Eigen::Matrix<double, 12, 1>& u) {
  StateMat A;
  InputMat B;
  continuous_matrices(m, yaw, rel, stance, A, B);
  return A * x + B * u;
}

}  // namespace

TEST_CASE("static equilibrium: even weight split gives zero acceleration") {
  RobotModel m;
  const std::array<bool, 4> all{true, true, true, true};
  std::array<Vec3, 4> rel;
  for (int k = 0; k < 4; ++k)
    rel[k] = m.hip_offsets[k] + Vec3(0, m.side_sign(k) * m.abduction_offset,
                                     -m.nominal_height);
  SrbdState s;
  s.position = Vec3(0, 0, m.nominal_height);
  Eigen::Matrix<double, 12, 1> u = Eigen::Matrix<double, 12, 1>::Zero();
  for (int k = 0; k < 4; ++k) u(3 * k + 2) = m.mass * kGravity / 4.0;
  const StateVec d = xdot(m, 0.0, rel, all, s.to_vector(), u);
  CHECK(d.segment<3>(6).norm() < 1e-9);   // angular acceleration
  CHECK(d.segment<3>(9).norm() < 1e-9);   // linear acceleration
  CHECK(d(12) == 0.0);                    // gravity augmentation is constant
}

TEST_CASE("unloaded body accelerates at -g vertically") {
  RobotModel m;
  const std::array<bool, 4> none{false, false, false, false};
  std::array<Vec3, 4> rel{};
  SrbdState s;
  const StateVec d = xdot(m, 0.3, rel, none, s.to_vector(),
                          Eigen::Matrix<double, 12, 1>::Zero());
  CHECK(d(9) == 0.0);
  CHECK(d(10) == 0.0);
  CHECK(d(11) == doctest::Approx(-kGravity));
}

TEST_CASE("linear force produces f/m acceleration and r x f torque") {
  RobotModel m;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  const std::array<bool, 4> all{true, true, true, true};
  for (int trial = 0; trial < 50; ++trial) {
    std::array<Vec3, 4> rel;
    for (int k = 0; k < 4; ++k) rel[k] = Vec3(un(rng), un(rng), -0.3);
    const double yaw = un(rng);
    StateMat A;
    InputMat B;
    continuous_matrices(m, yaw, rel, all, A, B);
    Eigen::Matrix<double, 12, 1> u;
    for (int i = 0; i < 12; ++i) u(i) = 30.0 * un(rng);
    const StateVec d = B * u;
    // oracle: Newton/Euler about the CoM with the yaw-rotated inertia
    Vec3 f_sum = Vec3::Zero(), tau_sum = Vec3::Zero();
    for (int k = 0; k < 4; ++k) {
      const Vec3 f = u.segment<3>(3 * k);
      f_sum += f;
      tau_sum += rel[k].cross(f);
    }
    const Mat3 rz = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    const Mat3 iw = rz * m.inertia_diag.asDiagonal() * rz.transpose();
    CHECK((d.segment<3>(9) - f_sum / m.mass).norm() < 1e-10);
    CHECK((d.segment<3>(6) - iw.inverse() * tau_sum).norm() < 1e-8);
  }
}

TEST_CASE("swing feet have structurally zero input columns") {
  RobotModel m;
  const std::array<bool, 4> stance{true, false, false, true};
  std::array<Vec3, 4> rel;
  for (int k = 0; k < 4; ++k) rel[k] = Vec3(0.1 * k, -0.05, -0.3);
  StateMat A;
  InputMat B;
  continuous_matrices(m, 0.2, rel, stance, A, B);
  CHECK(B.middleCols<3>(3).norm() == 0.0);
  CHECK(B.middleCols<3>(6).norm() == 0.0);
  CHECK(B.middleCols<3>(0).norm() > 0.0);
  CHECK(B.middleCols<3>(9).norm() > 0.0);
}

TEST_CASE("euler rates are the yaw-rotated angular velocity") {
  RobotModel m;
  const std::array<bool, 4> all{true, true, true, true};
  std::array<Vec3, 4> rel;
  for (int k = 0; k < 4; ++k) rel[k] = m.hip_offsets[k] + Vec3(0, 0, -0.3);
  const double yaw = 0.7;
  StateMat A;
  InputMat B;
  continuous_matrices(m, yaw, rel, all, A, B);
  StateVec x = StateVec::Zero();
  x.segment<3>(6) = Vec3(0.1, -0.2, 0.3);  // world omega
  const StateVec d = A * x;
  const Mat3 rz = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  CHECK((d.segment<3>(0) - rz.transpose() * x.segment<3>(6)).norm() < 1e-12);
  CHECK((d.segment<3>(3) - x.segment<3>(9)).norm() < 1e-12);
}

TEST_CASE("forward-Euler discretization is exact in form") {
  RobotModel m;
  const std::array<bool, 4> all{true, true, true, true};
  std::array<Vec3, 4> rel;
  for (int k = 0; k < 4; ++k) rel[k] = m.hip_offsets[k] + Vec3(0, 0, -0.3);
  StateMat A_c, A_d;
  InputMat B_c, B_d;
  continuous_matrices(m, 0.0, rel, all, A_c, B_c);
  discretize(A_c, B_c, 0.02, A_d, B_d);
  CHECK((A_d - (StateMat::Identity() + 0.02 * A_c)).norm() < 1e-15);
  CHECK((B_d - 0.02 * B_c).norm() < 1e-15);
  CHECK_THROWS_AS(discretize(A_c, B_c, 0.0, A_d, B_d), std::invalid_argument);
}

TEST_CASE("reference rollout integrates the commanded twist") {
  CommandTwist cmd{0.5, 0.1, 0.3};
  SrbdState x0;
  x0.euler_ypr = Vec3(0.2, 0.05, -0.03);
  x0.position = Vec3(1.0, 2.0, 0.27);
  const int N = 10;
  const double dt = 0.02;
  const auto refs = reference_rollout(cmd, x0, N, dt, 0.30);
  REQUIRE(refs.size() == N + 1);
  double yaw = x0.euler_ypr[0];
  Eigen::Vector2d pos = x0.position.head<2>();
  for (int i = 0; i <= N; ++i) {
    CHECK(refs[i].euler_ypr[0] == doctest::Approx(yaw).epsilon(1e-12));
    CHECK(refs[i].euler_ypr[1] == 0.0);
    CHECK(refs[i].euler_ypr[2] == 0.0);
    CHECK(refs[i].position.z() == 0.30);
    CHECK((refs[i].position.head<2>() - pos).norm() < 1e-12);
    const double c = std::cos(yaw), s = std::sin(yaw);
    CHECK(refs[i].linear_velocity.x() == doctest::Approx(c * cmd.vx - s * cmd.vy));
    CHECK(refs[i].angular_velocity.z() == cmd.wz);
    pos += refs[i].linear_velocity.head<2>() * dt;
    yaw += cmd.wz * dt;
  }
}

TEST_CASE("state vector round trip") {
  SrbdState s;
  s.euler_ypr = Vec3(0.1, 0.2, 0.3);
  s.position = Vec3(1, 2, 3);
  s.angular_velocity = Vec3(-1, 0.5, 2);
  s.linear_velocity = Vec3(0.4, -0.6, 0.1);
  const SrbdState r = SrbdState::from_vector(s.to_vector());
  CHECK((r.to_vector() - s.to_vector()).norm() == 0.0);
}

TEST_CASE("uncertainty parameter packing and validation") {
  RobotModel m;
  std::array<Vec3, 4> feet;
  for (int k = 0; k < 4; ++k) feet[k] = Vec3(0.1 * k, 0.0, 0.0);
  UncertaintyConfig c;
  const auto u = uncertainty_params(m, feet, c);
  CHECK(u.delta_mean(0) == m.mass);
  CHECK(u.sigma_delta(0, 0) == c.mass_var);
  CHECK((u.sigma_w - c.state_noise_var * StateMat::Identity()).norm() == 0.0);
  UncertaintyConfig bad;
  bad.mass_var = -1.0;
  CHECK_THROWS_AS(uncertainty_params(m, feet, bad), std::invalid_argument);
}
