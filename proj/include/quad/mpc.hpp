#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "quad/gait.hpp"
#include "quad/qp.hpp"
#include "quad/srbd.hpp"

namespace quad {

struct MpcWeights {
  Eigen::Matrix<double, 13, 1> Q =
      (Eigen::Matrix<double, 13, 1>() << 50, 50, 10, 100, 100, 150, 1, 1, 1, 10, 10, 20, 0)
          .finished();
  Eigen::Matrix<double, 12, 1> R = Eigen::Matrix<double, 12, 1>::Constant(1e-5);
  int horizon = 10;
  double dt = 0.02;
  double f_max = 500.0;  // N, per-foot vertical force cap
};

struct ChanceParams {
  double epsilon = 0.90;                 // per-row satisfaction probability
  InputCov input_covariance = InputCov::Zero();  // Sigma_u, per step
};

struct GrfPlan {
  std::vector<Eigen::Matrix<double, 12, 1>> forces;  // world frame, FL FR RL RR x/y/z
  QpStatus solve_status = QpStatus::MaxIterations;
  bool feasible = false;
  int iterations = 0;
  double solve_time = 0.0;  // s
  std::vector<StateMat> state_covariance;  // propagated Sigma_x, horizon+1 entries

  Eigen::Vector3d foot_force(int step, int leg) const {
    return forces[step].segment<3>(3 * leg);
  }
};

struct ConeRows {
  Eigen::Matrix<double, 20, 12> C;
  Eigen::Matrix<double, 20, 1> lower;
  Eigen::Matrix<double, 20, 1> upper;
};

/// Pyramid friction rows: per foot +-fx <= mu fz, +-fy <= mu fz and
/// 0 <= fz <= f_max. Swing feet get equality-to-zero bounds on all axes.
ConeRows friction_cone_rows(double mu, const std::array<bool, 4>& stance, double f_max);

/// Selection matrix picking the force components of swing feet.
Eigen::MatrixXd swing_selection(const std::array<bool, 4>& stance);

/// Inverse standard normal CDF, |Phi(z) - epsilon| < 1e-10.
double normal_quantile(double epsilon);

/// Gaussian backoff for an individual chance constraint row c'u <= rhs:
/// returns rhs - z_eps * sqrt(c' Sigma_u c).
double chance_tighten(const Eigen::Matrix<double, 12, 1>& row, double rhs,
                      const InputCov& sigma_u, double epsilon);

/// First-order covariance step Sigma+ = A Sigma A' + Sigma_B + Sigma_w,
/// resymmetrized. Throws on symmetry drift beyond 1e-9 in the inputs.
StateMat propagate_covariance(const StateMat& A_d, const InputMat& B_d,
                              const StateMat& sigma_x, const StateMat& sigma_b_effect,
                              const StateMat& sigma_w);

/// Diagonal Sigma_u induced from the parametric uncertainty: the mass spread
/// scales the nominal per-foot load, plus a configured floor variance.
InputCov default_input_covariance(const RobotModel& model, const UncertaintyConfig& config,
                                  double floor_var = 0.0);

/// Chance-constrained GRF planner. Owns warm-start state and the
/// infeasibility fallback; one instance per control loop.
class GrfMpc {
 public:
  GrfMpc(MpcWeights weights, ChanceParams chance, QpSettings qp_settings = {});

  /// Build the condensed QP over stance forces and solve it. On QP failure
  /// the previous plan is returned with feasible = false. `ref_anchor`
  /// (x, y, yaw), when given, starts the reference trajectory at a
  /// world-frame anchor instead of the current state so constant
  /// disturbances produce a restoring position error rather than drift.
  GrfPlan plan(const RobotModel& model, const SrbdState& x0, const CommandTwist& cmd,
               const ContactSchedule& schedule, const std::array<Vec3, 4>& foot_positions,
               const UncertaintyParams& uncertainty,
               const std::optional<Vec3>& ref_anchor = std::nullopt);

  const MpcWeights& weights() const { return weights_; }
  ChanceParams& chance() { return chance_; }

 private:
  MpcWeights weights_;
  ChanceParams chance_;
  QpSettings qp_settings_;
  std::optional<QpSolution> last_solution_;
  std::optional<GrfPlan> last_plan_;
  std::vector<int> last_active_;  // active decision indices for warm-start reuse
};

}  // namespace quad
