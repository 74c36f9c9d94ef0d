#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "quad/harness.hpp"

namespace py = pybind11;
using namespace quad;

namespace {

std::array<bool, 4> to_stance(const std::vector<bool>& v) {
  if (v.size() != 4) throw std::invalid_argument("stance must have 4 entries");
  return {v[0], v[1], v[2], v[3]};
}

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["rmse_vx"] = m.rmse_vx;
  d["rmse_vy"] = m.rmse_vy;
  d["rmse_wz"] = m.rmse_wz;
  d["rmse_combined"] = m.rmse_combined;
  d["success"] = m.success;
  d["fall_time"] = m.fall_time;
  d["mean_calf_tau_ff"] = m.mean_calf_tau_ff;
  d["lateral_drift"] = m.lateral_drift;
  d["mean_reward"] = m.mean_reward;
  d["mean_solve_time"] = m.mean_solve_time;
  d["ticks"] = m.ticks;
  return d;
}

}  // namespace

PYBIND11_MODULE(_quadloco, mod) {
  mod.doc() = "chance-constrained quadruped locomotion stack";

  py::register_exception<OutOfWorkspaceError>(mod, "OutOfWorkspaceError");
  py::register_exception<NonconvexProblemError>(mod, "NonconvexProblemError");

  py::class_<RobotModel>(mod, "RobotModel")
      .def(py::init<>())
      .def_readwrite("mass", &RobotModel::mass)
      .def_readwrite("friction_mu", &RobotModel::friction_mu)
      .def_readwrite("torque_limit", &RobotModel::torque_limit)
      .def_readwrite("nominal_height", &RobotModel::nominal_height)
      .def_static("from_json_file", &RobotModel::from_json_file)
      .def_static("from_json_string", &RobotModel::from_json_string)
      .def("to_json_string", &RobotModel::to_json_string)
      .def("validate", &RobotModel::validate);

  mod.def("forward_kinematics", &forward_kinematics, py::arg("model"), py::arg("leg"),
          py::arg("q"));
  mod.def("inverse_kinematics", &inverse_kinematics, py::arg("model"), py::arg("leg"),
          py::arg("p"));
  mod.def("leg_jacobian", &leg_jacobian, py::arg("model"), py::arg("leg"), py::arg("q"));

  mod.def("normal_quantile", &normal_quantile, py::arg("epsilon"));
  mod.def(
      "chance_tighten",
      [](const Eigen::VectorXd& row, double rhs, const Eigen::MatrixXd& sigma_u,
         double epsilon) {
        if (row.size() != 12 || sigma_u.rows() != 12 || sigma_u.cols() != 12)
          throw std::invalid_argument("row must be 12-dim and sigma_u 12x12");
        return chance_tighten(Eigen::Matrix<double, 12, 1>(row), rhs, InputCov(sigma_u),
                              epsilon);
      },
      py::arg("row"), py::arg("rhs"), py::arg("sigma_u"), py::arg("epsilon"));

  mod.def(
      "solve_qp",
      [](const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
        QpProblem p{H, g, A, lower, upper};
        const QpSolution sol = qp_solve(p);
        py::dict d;
        d["x"] = sol.x;
        d["y"] = sol.y;
        d["solved"] = sol.status == QpStatus::Solved;
        d["iterations"] = sol.iterations;
        d["primal_residual"] = sol.primal_residual;
        d["dual_residual"] = sol.dual_residual;
        return d;
      },
      py::arg("H"), py::arg("g"), py::arg("A"), py::arg("lower"), py::arg("upper"));

  mod.def(
      "plan_grf",
      [](const RobotModel& model, const Eigen::VectorXd& x0, double vx, double vy, double wz,
         double t, const std::vector<bool>& _ignored, double epsilon) {
        (void)_ignored;
        if (x0.size() != 13) throw std::invalid_argument("x0 must be 13-dim");
        MpcWeights w;
        ChanceParams ch;
        ch.epsilon = epsilon;
        ch.input_covariance = default_input_covariance(model, UncertaintyConfig{}, 1.0);
        GrfMpc mpc(w, ch);
        GaitParams trot;
        const auto sched = contact_schedule(trot, t, w.horizon, w.dt);
        std::array<Vec3, 4> feet;
        for (int k = 0; k < 4; ++k)
          feet[k] = model.hip_offsets[k] +
                    Vec3(0, model.side_sign(k) * model.abduction_offset, 0);
        const auto unc = uncertainty_params(model, feet, UncertaintyConfig{});
        const GrfPlan plan = mpc.plan(model, SrbdState::from_vector(x0),
                                      CommandTwist{vx, vy, wz}, sched, feet, unc);
        py::dict d;
        d["feasible"] = plan.feasible;
        d["iterations"] = plan.iterations;
        Eigen::MatrixXd F(plan.forces.size(), 12);
        for (size_t i = 0; i < plan.forces.size(); ++i) F.row(i) = plan.forces[i];
        d["forces"] = F;
        py::list stance;
        for (int k = 0; k < 4; ++k) stance.append(sched.stance[0][k]);
        d["stance"] = stance;
        return d;
      },
      py::arg("model"), py::arg("x0"), py::arg("vx"), py::arg("vy"), py::arg("wz"),
      py::arg("t") = 0.0, py::arg("stance") = std::vector<bool>{}, py::arg("epsilon") = 0.9);

  mod.def(
      "stance_feedforward",
      [](const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& grf,
         const std::vector<bool>& stance) {
        if (q.size() != 12 || grf.size() != 12)
          throw std::invalid_argument("q and grf must be 12-dim");
        return Eigen::VectorXd(stance_feedforward(model, Vec12(q),
                                                  Eigen::Matrix<double, 12, 1>(grf),
                                                  to_stance(stance),
                                                  Eigen::Quaterniond::Identity()));
      },
      py::arg("model"), py::arg("q"), py::arg("grf"), py::arg("stance"));

  mod.def(
      "run_scenario",
      [](const std::string& config_json, const std::string& out_csv) {
        const ScenarioConfig c = ScenarioConfig::from_json_string(config_json);
        return metrics_dict(run_scenario(c, out_csv));
      },
      py::arg("config_json"), py::arg("out_csv") = std::string());

  mod.def(
      "run_scenario_file",
      [](const std::string& config_path, const std::string& out_csv) {
        const ScenarioConfig c = ScenarioConfig::from_json_file(config_path);
        return metrics_dict(run_scenario(c, out_csv));
      },
      py::arg("config_path"), py::arg("out_csv") = std::string());

  mod.def("terrain_height",
          [](const std::string& kind, double arg, double x, double y) {
            Terrain t;
            if (kind == "flat")
              t = Terrain::flat();
            else if (kind == "slope")
              t = Terrain::slope(arg, 0);
            else
              throw std::invalid_argument("terrain kind must be flat or slope");
            return t.height(x, y);
          },
          py::arg("kind"), py::arg("arg"), py::arg("x"), py::arg("y"));
}
