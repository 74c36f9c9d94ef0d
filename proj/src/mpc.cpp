#include "quad/mpc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quad {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ConeRows friction_cone_rows(double mu, const std::array<bool, 4>& stance, double f_max) {
  if (!(mu > 0.0)) throw std::invalid_argument("friction_cone_rows: mu must be > 0");
  ConeRows r;
  r.C.setZero();
  for (int k = 0; k < 4; ++k) {
    const int row = 5 * k;
    const int col = 3 * k;
    if (stance[k]) {
      r.C(row + 0, col + 0) = 1.0;  r.C(row + 0, col + 2) = -mu;
      r.C(row + 1, col + 0) = -1.0; r.C(row + 1, col + 2) = -mu;
      r.C(row + 2, col + 1) = 1.0;  r.C(row + 2, col + 2) = -mu;
      r.C(row + 3, col + 1) = -1.0; r.C(row + 3, col + 2) = -mu;
      r.C(row + 4, col + 2) = 1.0;
      r.lower.segment<4>(row).setConstant(-kInf);
      r.upper.segment<4>(row).setZero();
      r.lower(row + 4) = 0.0;
      r.upper(row + 4) = f_max;
    } else {
      // swing foot: force pinned to zero on each axis, fifth row inert
      r.C(row + 0, col + 0) = 1.0;
      r.C(row + 1, col + 1) = 1.0;
      r.C(row + 2, col + 2) = 1.0;
      r.lower.segment<3>(row).setZero();
      r.upper.segment<3>(row).setZero();
      r.lower(row + 3) = -kInf; r.upper(row + 3) = kInf;
      r.lower(row + 4) = -kInf; r.upper(row + 4) = kInf;
    }
  }
  return r;
}

Eigen::MatrixXd swing_selection(const std::array<bool, 4>& stance) {
  int n_swing = 0;
  for (bool s : stance)
    if (!s) ++n_swing;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3 * n_swing, 12);
  int row = 0;
  for (int k = 0; k < 4; ++k) {
    if (stance[k]) continue;
    for (int a = 0; a < 3; ++a) D(row++, 3 * k + a) = 1.0;
  }
  return D;
}

double normal_quantile(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("normal_quantile: epsilon must be in (0, 1)");
  // Newton on Phi(z) - epsilon with a bisection safeguard
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  double lo = -10.0, hi = 10.0;
  double z = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double f = phi(z) - epsilon;
    if (std::abs(f) < 1e-14) break;
    if (f > 0.0) hi = z; else lo = z;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    double step = pdf > 1e-300 ? f / pdf : 0.0;
    double z_new = z - step;
    if (!(z_new > lo && z_new < hi)) z_new = 0.5 * (lo + hi);
    z = z_new;
  }
  return z;
}

double chance_tighten(const Eigen::Matrix<double, 12, 1>& row, double rhs,
                      const InputCov& sigma_u, double epsilon) {
  if (!(epsilon >= 0.5)) throw std::domain_error("chance_tighten: epsilon must be >= 0.5");
  const double quad = row.dot(sigma_u * row);
  if (quad < -1e-12) throw std::runtime_error("chance_tighten: Sigma_u is not PSD");
  const double z = normal_quantile(epsilon);
  return rhs - z * std::sqrt(std::max(0.0, quad));
}

StateMat propagate_covariance(const StateMat& A_d, const InputMat& B_d,
                              const StateMat& sigma_x, const StateMat& sigma_b_effect,
                              const StateMat& sigma_w) {
  (void)B_d;  // effect of input uncertainty arrives pre-mapped in sigma_b_effect
  auto check_sym = [](const StateMat& m, const char* name) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw std::runtime_error(std::string("propagate_covariance: asymmetric ") + name);
  };
  check_sym(sigma_x, "sigma_x");
  check_sym(sigma_b_effect, "sigma_b_effect");
  check_sym(sigma_w, "sigma_w");
  StateMat next = A_d * sigma_x * A_d.transpose() + sigma_b_effect + sigma_w;
  return 0.5 * (next + next.transpose());
}

InputCov default_input_covariance(const RobotModel& model, const UncertaintyConfig& config,
                                  double floor_var) {
  if (floor_var < 0.0)
    throw std::invalid_argument("default_input_covariance: floor must be >= 0");
  // relative mass spread scales the nominal quarter-weight load; foot
  // placement spread leaks into the tangential channels through the lever arm
  const double f_nom = model.mass * kGravity / 4.0;
  const double rel_mass_var = config.mass_var / (model.mass * model.mass);
  const double var_z = floor_var + rel_mass_var * f_nom * f_nom;
  const double lever = std::max(0.05, model.nominal_height);
  const double var_xy = floor_var + config.foot_pos_var / (lever * lever) * f_nom * f_nom;
  InputCov sigma = InputCov::Zero();
  for (int k = 0; k < 4; ++k) {
    sigma(3 * k + 0, 3 * k + 0) = var_xy;
    sigma(3 * k + 1, 3 * k + 1) = var_xy;
    sigma(3 * k + 2, 3 * k + 2) = var_z;
  }
  return sigma;
}

GrfMpc::GrfMpc(MpcWeights weights, ChanceParams chance, QpSettings qp_settings)
    : weights_(std::move(weights)), chance_(chance), qp_settings_(qp_settings) {}

GrfPlan GrfMpc::plan(const RobotModel& model, const SrbdState& x0, const CommandTwist& cmd,
                     const ContactSchedule& schedule, const std::array<Vec3, 4>& foot_positions,
                     const UncertaintyParams& uncertainty,
                     const std::optional<Vec3>& ref_anchor) {
  const auto t_start = std::chrono::steady_clock::now();
  const int N = weights_.horizon;
  if (static_cast<int>(schedule.stance.size()) != N)
    throw std::invalid_argument("GrfMpc::plan: schedule horizon mismatch");
  const double dt = weights_.dt;

  SrbdState ref0 = x0;
  if (ref_anchor) {
    ref0.position.x() = (*ref_anchor)(0);
    ref0.position.y() = (*ref_anchor)(1);
    ref0.euler_ypr[0] = (*ref_anchor)(2);
  }
  const auto refs = reference_rollout(cmd, ref0, N, dt, model.nominal_height);

  // per-step discrete dynamics about the reference yaw
  std::vector<StateMat> A(N);
  std::vector<InputMat> B(N);
  for (int i = 0; i < N; ++i) {
    std::array<Vec3, 4> rel;
    for (int k = 0; k < 4; ++k) rel[k] = foot_positions[k] - refs[i].position;
    StateMat A_c;
    InputMat B_c;
    continuous_matrices(model, refs[i].euler_ypr[0], rel, schedule.stance[i], A_c, B_c);
    discretize(A_c, B_c, dt, A[i], B[i]);
  }

  // active decision components: stance feet only (swing forces eliminated)
  std::vector<int> active;  // global input index = 12*i + 3*k + axis
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < 4; ++k)
      if (schedule.stance[i][k])
        for (int a = 0; a < 3; ++a) active.push_back(12 * i + 3 * k + a);
  const int n = static_cast<int>(active.size());

  GrfPlan out;
  out.forces.assign(N, Eigen::Matrix<double, 12, 1>::Zero());

  if (n > 0) {
    // condensed prediction: x_i = Phi_i x0 + sum_j G_{i,j} u_j, i = 1..N
    Eigen::MatrixXd Su = Eigen::MatrixXd::Zero(13 * N, n);
    Eigen::VectorXd d(13 * N);  // Sx x0 - Xref
    StateVec xbar = x0.to_vector();
    // running products: column blocks mapped through subsequent dynamics
    std::vector<Eigen::MatrixXd> col(N);  // 13 x 12 effect of u_j on current x
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < i; ++j) col[j] = A[i] * col[j];
      col[i] = B[i];
      xbar = A[i] * xbar;
      d.segment<13>(13 * i) = xbar - refs[i + 1].to_vector();
      for (int c = 0; c < n; ++c) {
        const int gi = active[c];
        const int j = gi / 12;
        if (j <= i) Su.block<13, 1>(13 * i, c) = col[j].col(gi % 12);
      }
    }

    Eigen::VectorXd q_diag(13 * N), r_diag(n);
    for (int i = 0; i < N; ++i) q_diag.segment<13>(13 * i) = weights_.Q;
    for (int c = 0; c < n; ++c) r_diag(c) = weights_.R(active[c] % 12);

    Eigen::MatrixXd H = 2.0 * (Su.transpose() * q_diag.asDiagonal() * Su);
    H.diagonal() += 2.0 * r_diag;
    Eigen::VectorXd g = 2.0 * Su.transpose() * (q_diag.cwiseProduct(d));

    // tightened pyramid rows per stance foot per step
    int n_stance = n / 3;
    Eigen::MatrixXd Acon = Eigen::MatrixXd::Zero(5 * n_stance, n);
    Eigen::VectorXd lower(5 * n_stance), upper(5 * n_stance);
    const double mu = model.friction_mu;
    int row = 0;
    for (int c = 0; c < n; c += 3) {
      const int gi = active[c];
      const int foot = (gi % 12) / 3;
      // embed the foot's rows into 12-dim input space for the tightening
      Eigen::Matrix<double, 12, 1> crow;
      auto tighten = [&](double cx, double cy, double cz, double rhs) {
        crow.setZero();
        crow(3 * foot + 0) = cx;
        crow(3 * foot + 1) = cy;
        crow(3 * foot + 2) = cz;
        return chance_tighten(crow, rhs, chance_.input_covariance, chance_.epsilon);
      };
      Acon(row + 0, c + 0) = 1.0;  Acon(row + 0, c + 2) = -mu;
      Acon(row + 1, c + 0) = -1.0; Acon(row + 1, c + 2) = -mu;
      Acon(row + 2, c + 1) = 1.0;  Acon(row + 2, c + 2) = -mu;
      Acon(row + 3, c + 1) = -1.0; Acon(row + 3, c + 2) = -mu;
      Acon(row + 4, c + 2) = 1.0;
      lower.segment<4>(row).setConstant(-kInf);
      upper(row + 0) = tighten(1, 0, -mu, 0.0);
      upper(row + 1) = tighten(-1, 0, -mu, 0.0);
      upper(row + 2) = tighten(0, 1, -mu, 0.0);
      upper(row + 3) = tighten(0, -1, -mu, 0.0);
      lower(row + 4) = -tighten(0, 0, -1, 0.0);  // fz >= backoff
      upper(row + 4) = weights_.f_max;
      row += 5;
    }

    QpProblem problem{std::move(H), std::move(g), std::move(Acon), std::move(lower),
                      std::move(upper)};
    QpSolution sol;
    const bool can_warm = last_solution_ && last_active_.size() == active.size() &&
                          last_solution_->x.size() == n;
    try {
      sol = can_warm ? qp_warm_start(problem, *last_solution_, qp_settings_)
                     : qp_solve(problem, qp_settings_);
    } catch (const NonconvexProblemError&) {
      sol.status = QpStatus::PrimalInfeasible;
    }

    out.solve_status = sol.status;
    out.iterations = sol.iterations;
    if (sol.status == QpStatus::Solved) {
      out.feasible = true;
      for (int c = 0; c < n; ++c) {
        const int gi = active[c];
        out.forces[gi / 12](gi % 12) = sol.x(c);
      }
      last_solution_ = sol;
      last_active_ = active;
    } else if (last_plan_) {
      // fall back to the previous plan rather than handing garbage to the LLC
      out.forces = last_plan_->forces;
      out.feasible = false;
    }

    // propagated state covariance for telemetry
    out.state_covariance.resize(N + 1);
    out.state_covariance[0] = StateMat::Zero();
    for (int i = 0; i < N; ++i) {
      const StateMat sigma_b =
          B[i] * chance_.input_covariance * B[i].transpose();
      out.state_covariance[i + 1] = propagate_covariance(
          A[i], B[i], out.state_covariance[i], sigma_b, uncertainty.sigma_w);
    }
  } else {
    // flight phase: nothing to optimize
    out.solve_status = QpStatus::Solved;
    out.feasible = true;
    out.state_covariance.assign(N + 1, StateMat::Zero());
  }

  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  last_plan_ = out;
  return out;
}

}  // namespace quad
