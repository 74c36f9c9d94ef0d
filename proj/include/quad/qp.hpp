#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace quad {

/// Dense convex QP: minimize 0.5 x'Hx + g'x  subject to  lower <= Ax <= upper.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_constraints() const { return static_cast<int>(A.rows()); }
  void validate() const;
};

enum class QpStatus { Solved, MaxIterations, PrimalInfeasible };

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // constraint multipliers
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  bool polish = true;
};

class NonconvexProblemError : public std::runtime_error {
 public:
  explicit NonconvexProblemError(const std::string& what) : std::runtime_error(what) {}
};

/// Operator-splitting (ADMM) solve with a single KKT factorization reused
/// across iterations, plus an active-set polish step on convergence.
QpSolution qp_solve(const QpProblem& p, const QpSettings& settings = {});

/// Same fixed point as qp_solve, started from a previous solution.
QpSolution qp_warm_start(const QpProblem& p, const QpSolution& previous,
                         const QpSettings& settings = {});

}  // namespace quad
