#include "quad/qp.hpp"

#include <cmath>
#include <limits>

namespace quad {

void QpProblem::validate() const {
  const int n = num_vars();
  const int m = num_constraints();
  if (H.cols() != n || g.size() != n)
    throw std::invalid_argument("QpProblem: H/g dimension mismatch");
  if (A.cols() != n && m > 0) throw std::invalid_argument("QpProblem: A column mismatch");
  if (lower.size() != m || upper.size() != m)
    throw std::invalid_argument("QpProblem: bound dimension mismatch");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("QpProblem: H must be symmetric");
  for (int i = 0; i < m; ++i)
    if (lower(i) > upper(i)) throw std::invalid_argument("QpProblem: lower > upper");
}

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

void check_convexity(const Eigen::MatrixXd& H) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-8 * scale)
    throw NonconvexProblemError("qp_solve: H has a negative eigenvalue");
}

// Equality-constrained resolve on the active set detected by ADMM. Accepts
// the polished point when it beats eps_prim/eps_dual with consistent
// multiplier signs.
bool polish_solution(const QpProblem& p, double eps_prim_tol, double eps_dual_tol,
                     const std::vector<bool>& seed_low, const std::vector<bool>& seed_up,
                     QpSolution& sol) {
  const int n = p.num_vars();
  const int m = p.num_constraints();
  // mini active-set refinement seeded by the splitting's bound masks: solve
  // the equality-constrained KKT, add the most violated rows, drop rows whose
  // multiplier sign contradicts the bound they claim, repeat
  std::vector<int> state(m, 0);  // -1 active at lower, +1 active at upper
  for (int i = 0; i < m; ++i) {
    if (seed_low[i]) state[i] = -1;
    else if (seed_up[i]) state[i] = 1;
  }

  Eigen::VectorXd x, y;
  double prim = 0.0, dual = 0.0;
  for (int round = 0; round < 12; ++round) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
      if (state[i] != 0) active.push_back(i);
    const int ma = static_cast<int>(active.size());

    Eigen::MatrixXd kkt(n + ma, n + ma);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = p.H;
    Eigen::VectorXd rhs(n + ma);
    rhs.head(n) = -p.g;
    for (int r = 0; r < ma; ++r) {
      const int i = active[r];
      kkt.block(n + r, 0, 1, n) = p.A.row(i);
      kkt.block(0, n + r, n, 1) = p.A.row(i).transpose();
      rhs(n + r) = state[i] < 0 ? p.lower(i) : p.upper(i);
    }
    // light regularization keeps the saddle system factorizable
    for (int i = 0; i < n; ++i) kkt(i, i) += 1e-12;
    for (int i = n; i < n + ma; ++i) kkt(i, i) -= 1e-12;
    const Eigen::VectorXd z = Eigen::PartialPivLU<Eigen::MatrixXd>(kkt).solve(rhs);
    if (!z.allFinite()) return false;

    x = z.head(n);
    y = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < ma; ++r) y(active[r]) = z(n + r);

    const Eigen::VectorXd ax = m > 0 ? Eigen::VectorXd(p.A * x) : Eigen::VectorXd();
    prim = 0.0;
    int worst = -1, worst_side = 0;
    for (int i = 0; i < m; ++i) {
      const double v_low = p.lower(i) - ax(i);
      const double v_up = ax(i) - p.upper(i);
      if (v_low > prim) { prim = v_low; worst = i; worst_side = -1; }
      if (v_up > prim) { prim = v_up; worst = i; worst_side = 1; }
    }
    Eigen::VectorXd dual_vec = p.H * x + p.g;
    if (m > 0) dual_vec += p.A.transpose() * y;
    dual = inf_norm(dual_vec);

    bool changed = false;
    // drop rows holding the wrong-sign multiplier
    for (int i : active) {
      if ((state[i] < 0 && y(i) > 1e-9) || (state[i] > 0 && y(i) < -1e-9)) {
        if (p.lower(i) != p.upper(i)) {
          state[i] = 0;
          changed = true;
        }
      }
    }
    if (worst >= 0 && prim > eps_prim_tol) {
      state[worst] = worst_side;
      changed = true;
    }
    if (!changed) break;
  }

  if (prim <= eps_prim_tol && dual <= eps_dual_tol) {
    for (int i = 0; i < m; ++i) {
      if (state[i] < 0 && p.lower(i) != p.upper(i) && y(i) > 1e-7) return false;
      if (state[i] > 0 && y(i) < -1e-7) return false;
    }
    sol.x = x;
    sol.y = y;
    sol.primal_residual = std::max(0.0, prim);
    sol.dual_residual = dual;
    return true;
  }
  return false;
}

// Modified Ruiz equilibration of the stacked KKT matrix [H A'; A 0] plus a
// cost scaling, so the fixed-rho splitting converges on badly scaled data.
struct Scaling {
  Eigen::VectorXd d;  // variable scaling, n
  Eigen::VectorXd e;  // constraint scaling, m
  double c = 1.0;     // cost scaling
};

Scaling ruiz_equilibrate(Eigen::MatrixXd& H, Eigen::VectorXd& g, Eigen::MatrixXd& A,
                         Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(A.rows());
  Scaling s;
  s.d = Eigen::VectorXd::Ones(n);
  s.e = Eigen::VectorXd::Ones(m);
  const double inf = std::numeric_limits<double>::infinity();

  for (int pass = 0; pass < 10; ++pass) {
    for (int j = 0; j < n; ++j) {
      double norm = H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
      const double delta = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
      H.col(j) *= delta;
      H.row(j) *= delta;
      if (m > 0) A.col(j) *= delta;
      g(j) *= delta;
      s.d(j) *= delta;
    }
    for (int i = 0; i < m; ++i) {
      const double norm = A.row(i).cwiseAbs().maxCoeff();
      const double delta = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
      A.row(i) *= delta;
      if (lower(i) != -inf) lower(i) *= delta;
      if (upper(i) != inf) upper(i) *= delta;
      s.e(i) *= delta;
    }
    // cost scaling toward unit mean column norm
    double mean_col = 0.0;
    for (int j = 0; j < n; ++j) mean_col += H.col(j).cwiseAbs().maxCoeff();
    mean_col /= std::max(1, n);
    const double gamma = 1.0 / std::max({mean_col, inf_norm(g), 1e-6});
    H *= gamma;
    g *= gamma;
    s.c *= gamma;
  }
  return s;
}

QpSolution admm_solve(const QpProblem& p, const QpSettings& s,
                      const Eigen::VectorXd& x0, const Eigen::VectorXd& y0) {
  p.validate();
  check_convexity(p.H);
  const int n = p.num_vars();
  const int m = p.num_constraints();

  QpSolution sol;
  sol.x = x0;
  sol.y = y0;

  if (m == 0) {
    // unconstrained minimum directly
    Eigen::LDLT<Eigen::MatrixXd> ldlt(p.H + s.sigma * Eigen::MatrixXd::Identity(n, n));
    sol.x = ldlt.solve(-p.g);
    sol.y.resize(0);
    sol.status = QpStatus::Solved;
    sol.iterations = 1;
    sol.dual_residual = inf_norm(p.H * sol.x + p.g);
    return sol;
  }

  // scaled copy: Hs = c D H D, gs = c D g, As = E A D, bounds E-scaled
  Eigen::MatrixXd Hs = p.H;
  Eigen::VectorXd gs = p.g;
  Eigen::MatrixXd As = p.A;
  Eigen::VectorXd lo = p.lower, up = p.upper;
  const Scaling sc = ruiz_equilibrate(Hs, gs, As, lo, up);

  const Eigen::MatrixXd kkt = Hs + s.sigma * Eigen::MatrixXd::Identity(n, n) +
                              s.rho * As.transpose() * As;
  Eigen::LLT<Eigen::MatrixXd> llt(kkt);
  if (llt.info() != Eigen::Success)
    throw NonconvexProblemError("qp_solve: KKT factorization failed");

  // scaled iterates from the unscaled warm start
  Eigen::VectorXd x = sol.x.cwiseQuotient(sc.d);
  Eigen::VectorXd y = sc.c * sol.y.cwiseProduct(sc.e);
  Eigen::VectorXd z = (As * x).cwiseMax(lo).cwiseMin(up);

  const double inf = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= s.max_iter; ++iter) {
    const Eigen::VectorXd rhs = s.sigma * x - gs + As.transpose() * (s.rho * z - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = As * x_tilde;
    const Eigen::VectorXd x_next = s.alpha * x_tilde + (1.0 - s.alpha) * x;
    const Eigen::VectorXd z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * z;
    const Eigen::VectorXd z_next = (z_relaxed + y / s.rho).cwiseMax(lo).cwiseMin(up);
    const Eigen::VectorXd y_next = y + s.rho * (z_relaxed - z_next);
    const Eigen::VectorXd dy = y_next - y;

    x = x_next;
    z = z_next;
    y = y_next;

    {
      // termination on the unscaled problem
      const Eigen::VectorXd xu = x.cwiseProduct(sc.d);
      const Eigen::VectorXd yu = y.cwiseQuotient(sc.e) / sc.c;
      const Eigen::VectorXd zu = z.cwiseQuotient(sc.e);
      const Eigen::VectorXd ax = p.A * xu;
      const double r_prim = inf_norm(ax - zu);
      const Eigen::VectorXd hx = p.H * xu;
      const Eigen::VectorXd aty = p.A.transpose() * yu;
      const double r_dual = inf_norm(hx + p.g + aty);
      const double eps_prim =
          s.eps_abs + s.eps_rel * std::max(inf_norm(ax), inf_norm(zu));
      const double eps_dual =
          s.eps_abs + s.eps_rel * std::max({inf_norm(hx), inf_norm(p.g), inf_norm(aty)});
      sol.iterations = iter;
      sol.primal_residual = r_prim;
      sol.dual_residual = r_dual;

      auto bound_masks = [&](std::vector<bool>& at_low, std::vector<bool>& at_up) {
        at_low.assign(m, false);
        at_up.assign(m, false);
        for (int i = 0; i < m; ++i) {
          if (std::isfinite(lo(i)) && z(i) - lo(i) <= 1e-9 * (1.0 + std::abs(lo(i))))
            at_low[i] = true;
          else if (std::isfinite(up(i)) && up(i) - z(i) <= 1e-9 * (1.0 + std::abs(up(i))))
            at_up[i] = true;
        }
      };

      if (r_prim <= eps_prim && r_dual <= eps_dual) {
        sol.x = xu;
        sol.y = yu;
        sol.status = QpStatus::Solved;
        if (s.polish) {
          std::vector<bool> at_low, at_up;
          bound_masks(at_low, at_up);
          polish_solution(p, std::max(r_prim, s.eps_abs), std::max(r_dual, s.eps_abs),
                          at_low, at_up, sol);
        }
        return sol;
      }

      // once loosely converged, an active-set polish usually lands the exact
      // solution; accept it only when it meets the strict tolerances
      if (s.polish && iter % 25 == 0) {
        QpSolution candidate = sol;
        candidate.x = xu;
        candidate.y = yu;
        std::vector<bool> at_low, at_up;
        bound_masks(at_low, at_up);
        if (polish_solution(p, eps_prim, eps_dual, at_low, at_up, candidate)) {
          candidate.status = QpStatus::Solved;
          candidate.iterations = iter;
          return candidate;
        }
      }

      // primal infeasibility certificate on the multiplier increment
      const Eigen::VectorXd dyu = dy.cwiseQuotient(sc.e) / sc.c;
      const double dy_norm = inf_norm(dyu);
      if (dy_norm > 1e-12) {
        const Eigen::VectorXd dyn = dyu / dy_norm;
        double support = 0.0;
        bool bounded = true;
        for (int i = 0; i < m; ++i) {
          if (dyn(i) > 0.0) {
            if (p.upper(i) == inf) { bounded = false; break; }
            support += p.upper(i) * dyn(i);
          } else if (dyn(i) < 0.0) {
            if (p.lower(i) == -inf) { bounded = false; break; }
            support += p.lower(i) * dyn(i);
          }
        }
        if (bounded && inf_norm(p.A.transpose() * dyn) <= 1e-8 && support <= -1e-8) {
          sol.x = x.cwiseProduct(sc.d);
          sol.y = dyn;
          sol.status = QpStatus::PrimalInfeasible;
          return sol;
        }
      }
    }
  }
  sol.x = x.cwiseProduct(sc.d);
  sol.y = y.cwiseQuotient(sc.e) / sc.c;
  sol.iterations = s.max_iter;
  sol.status = QpStatus::MaxIterations;
  return sol;
}

}  // namespace

QpSolution qp_solve(const QpProblem& p, const QpSettings& settings) {
  const int n = static_cast<int>(p.H.rows());
  const int m = static_cast<int>(p.A.rows());
  return admm_solve(p, settings, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m));
}

QpSolution qp_warm_start(const QpProblem& p, const QpSolution& previous,
                         const QpSettings& settings) {
  if (previous.x.size() != p.H.rows() || previous.y.size() != p.A.rows())
    throw std::invalid_argument("qp_warm_start: dimension mismatch with previous solution");
  return admm_solve(p, settings, previous.x, previous.y);
}

}  // namespace quad
