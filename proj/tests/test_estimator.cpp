#include <doctest.h>

#include <cmath>

#include "quad/estimator.hpp"

using namespace quad;

namespace {

struct SyntheticWorld {
  // base oscillates horizontally and bobs vertically; feet are fixed
  Vec3 position(double t) const {
    return Vec3(0.4 * t + 0.03 * std::sin(4.0 * t), 0.02 * std::sin(3.0 * t),
                0.30 + 0.01 * std::sin(6.0 * t));
  }
  Vec3 velocity(double t) const {
    return Vec3(0.4 + 0.12 * std::cos(4.0 * t), 0.06 * std::cos(3.0 * t),
                0.06 * std::cos(6.0 * t));
  }
  Vec3 acceleration(double t) const {
    return Vec3(-0.48 * std::sin(4.0 * t), -0.18 * std::sin(3.0 * t),
                -0.36 * std::sin(6.0 * t));
  }
};

}  // namespace

TEST_CASE("estimator tracks the simulated base against ground truth") {
  SyntheticWorld w;
  std::array<Vec3, 4> feet{Vec3(0.2, 0.15, 0.0), Vec3(0.2, -0.15, 0.0),
                           Vec3(-0.2, 0.15, 0.0), Vec3(-0.2, -0.15, 0.0)};
  StateEstimator est;
  est.state().position = w.position(0.0);
  est.state().velocity = w.velocity(0.0);
  for (int k = 0; k < 4; ++k) est.state().foot_positions[k] = feet[k];
  const std::array<bool, 4> all{true, true, true, true};
  const Eigen::Quaterniond ident = Eigen::Quaterniond::Identity();
  const double dt = 2e-3;
  double sum2 = 0.0;
  int n = 0;
  for (int i = 0; i < 2500; ++i) {
    const double t = i * dt;
    est.predict(w.acceleration(t), dt);
    std::array<Vec3, 4> fk;
    for (int k = 0; k < 4; ++k) fk[k] = feet[k] - w.position(t + dt);
    est.update(fk, all, ident);
    if (t > 0.5) {
      sum2 += (est.state().velocity - w.velocity(t + dt)).squaredNorm();
      ++n;
    }
  }
  CHECK(std::sqrt(sum2 / n) < 0.02);
  CHECK((est.state().position - w.position(2500 * dt)).norm() < 0.01);
}

TEST_CASE("touchdown displacement re-seats the foot, not the base") {
  // foot 0 is in swing while its true position jumps 0.2 m forward; after it
  // lands the base estimate must not absorb the displacement
  std::array<Vec3, 4> feet{Vec3(0.2, 0.15, 0.0), Vec3(0.2, -0.15, 0.0),
                           Vec3(-0.2, 0.15, 0.0), Vec3(-0.2, -0.15, 0.0)};
  StateEstimator est;
  const Vec3 base(0.0, 0.0, 0.30);
  est.state().position = base;
  for (int k = 0; k < 4; ++k) est.state().foot_positions[k] = feet[k];
  const Eigen::Quaterniond ident = Eigen::Quaterniond::Identity();
  const double dt = 2e-3;
  std::array<bool, 4> stance{false, true, true, true};
  std::array<Vec3, 4> true_feet = feet;
  // swing for 150 ms, the foot relocates
  for (int i = 0; i < 75; ++i) {
    est.predict(Vec3::Zero(), dt);
    true_feet[0] = feet[0] + Vec3(0.2 * (i + 1) / 75.0, 0, 0.0);
    std::array<Vec3, 4> fk;
    for (int k = 0; k < 4; ++k) fk[k] = true_feet[k] - base;
    est.update(fk, stance, ident);
  }
  // touchdown
  stance[0] = true;
  for (int i = 0; i < 50; ++i) {
    est.predict(Vec3::Zero(), dt);
    std::array<Vec3, 4> fk;
    for (int k = 0; k < 4; ++k) fk[k] = true_feet[k] - base;
    est.update(fk, stance, ident);
  }
  CHECK((est.state().position - base).norm() < 0.01);
  CHECK(est.state().velocity.norm() < 0.05);
  CHECK((est.state().foot_positions[0] - true_feet[0]).norm() < 0.01);
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
  StateEstimator est;
  const std::array<bool, 4> stance{true, false, true, false};
  const Eigen::Quaterniond ident = Eigen::Quaterniond::Identity();
  std::array<Vec3, 4> fk{Vec3(0.2, 0.2, -0.3), Vec3(0.2, -0.2, -0.3),
                         Vec3(-0.2, 0.2, -0.3), Vec3(-0.2, -0.2, -0.3)};
  for (int i = 0; i < 200; ++i) {
    est.predict(Vec3(0.1, -0.2, 9.81 - 9.81), 1e-3);
    est.update(fk, stance, ident);
    const auto& P = est.state().covariance;
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    const auto eig =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 18, 18>>(P).eigenvalues();
    CHECK(eig.minCoeff() > -1e-10);
  }
}

TEST_CASE("estimator rejects invalid inputs") {
  StateEstimator est;
  CHECK_THROWS_AS(est.predict(Vec3::Zero(), 0.0), std::invalid_argument);
  std::array<Vec3, 4> fk{};
  Eigen::Quaterniond bad(2.0, 0.0, 0.0, 0.0);  // not unit
  CHECK_THROWS_AS(est.update(fk, {true, true, true, true}, bad), std::invalid_argument);
}
