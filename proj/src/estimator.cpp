#include "quad/estimator.hpp"

#include <stdexcept>

namespace quad {

namespace {
using Mat18 = Eigen::Matrix<double, 18, 18>;
using Vec18 = Eigen::Matrix<double, 18, 1>;
}  // namespace

void StateEstimator::predict(const Vec3& body_acceleration_world, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("StateEstimator::predict: dt must be > 0");
  state_.position += state_.velocity * dt + 0.5 * dt * dt * body_acceleration_world;
  state_.velocity += body_acceleration_world * dt;

  Mat18 F = Mat18::Identity();
  F.block<3, 3>(0, 3) = dt * Mat3::Identity();
  Mat18 Q = Mat18::Zero();
  Q.block<3, 3>(0, 0) = noise_.process_position * dt * Mat3::Identity();
  Q.block<3, 3>(3, 3) = noise_.process_velocity * dt * Mat3::Identity();
  for (int k = 0; k < 4; ++k)
    Q.block<3, 3>(6 + 3 * k, 6 + 3 * k) = noise_.process_foot * dt * Mat3::Identity();
  Mat18 P = F * state_.covariance * F.transpose() + Q;
  state_.covariance = 0.5 * (P + P.transpose());
}

void StateEstimator::update(const std::array<Vec3, 4>& leg_fk_body,
                            const std::array<bool, 4>& stance,
                            const Eigen::Quaterniond& orientation) {
  if (std::abs(orientation.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("StateEstimator::update: orientation must be unit");
  const Mat3 r_wb = orientation.toRotationMatrix();

  // a swing foot can land anywhere: grow its state covariance so the
  // touchdown residual re-seats the foot instead of dragging the base
  for (int k = 0; k < 4; ++k)
    if (!stance[k])
      state_.covariance.block<3, 3>(6 + 3 * k, 6 + 3 * k) +=
          noise_.process_foot_swing * Mat3::Identity();

  Eigen::Matrix<double, 12, 18> H = Eigen::Matrix<double, 12, 18>::Zero();
  Eigen::Matrix<double, 12, 1> residual;
  Eigen::Matrix<double, 12, 12> R = Eigen::Matrix<double, 12, 12>::Zero();
  for (int k = 0; k < 4; ++k) {
    const Vec3 z = r_wb * leg_fk_body[k];
    const Vec3 h = state_.foot_positions[k] - state_.position;
    residual.segment<3>(3 * k) = z - h;
    H.block<3, 3>(3 * k, 0) = -Mat3::Identity();
    H.block<3, 3>(3 * k, 6 + 3 * k) = Mat3::Identity();
    const double var = stance[k] ? noise_.meas_stance : noise_.meas_swing_inflation;
    R.block<3, 3>(3 * k, 3 * k) = var * Mat3::Identity();
  }

  const Eigen::Matrix<double, 12, 12> S =
      H * state_.covariance * H.transpose() + R;
  Eigen::LLT<Eigen::Matrix<double, 12, 12>> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("StateEstimator::update: innovation covariance not PSD");
  const Eigen::Matrix<double, 18, 12> K =
      state_.covariance * H.transpose() * llt.solve(Eigen::Matrix<double, 12, 12>::Identity());

  const Vec18 dx = K * residual;
  state_.position += dx.segment<3>(0);
  state_.velocity += dx.segment<3>(3);
  for (int k = 0; k < 4; ++k) state_.foot_positions[k] += dx.segment<3>(6 + 3 * k);

  // Joseph form keeps the posterior PSD
  const Mat18 IKH = Mat18::Identity() - K * H;
  Mat18 P = IKH * state_.covariance * IKH.transpose() + K * R * K.transpose();
  state_.covariance = 0.5 * (P + P.transpose());
}

}  // namespace quad
