#include "quad/robot_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace quad {

void RobotModel::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("RobotModel: mass must be > 0");
  if (!(inertia_diag.minCoeff() > 0.0))
    throw std::invalid_argument("RobotModel: inertia_diag must be > 0 componentwise");
  if (!(abduction_offset > 0.0 && thigh_length > 0.0 && calf_length > 0.0))
    throw std::invalid_argument("RobotModel: link lengths must be > 0");
  if (!(friction_mu > 0.0 && friction_mu <= 2.0))
    throw std::invalid_argument("RobotModel: friction_mu must be in (0, 2]");
  if (!(torque_limit > 0.0)) throw std::invalid_argument("RobotModel: torque_limit must be > 0");
  if (!(nominal_height > 0.0)) throw std::invalid_argument("RobotModel: nominal_height must be > 0");
}

namespace {

Vec3 vec3_from(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

RobotModel RobotModel::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RobotModel m;
  m.mass = j.at("mass_kg").get<double>();
  m.inertia_diag = vec3_from(j.at("inertia_diag_kgm2"));
  const auto& hips = j.at("hip_offsets_m");
  for (int k = 0; k < kNumLegs; ++k) m.hip_offsets[k] = vec3_from(hips.at(k));
  const auto& links = j.at("link_lengths_m");
  m.abduction_offset = links.at("abduction").get<double>();
  m.thigh_length = links.at("thigh").get<double>();
  m.calf_length = links.at("calf").get<double>();
  m.friction_mu = j.at("friction_mu").get<double>();
  m.torque_limit = j.at("torque_limit_Nm").get<double>();
  m.nominal_height = j.at("nominal_height_m").get<double>();
  m.validate();
  return m;
}

RobotModel RobotModel::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("RobotModel: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

std::string RobotModel::to_json_string() const {
  nlohmann::json j;
  j["mass_kg"] = mass;
  j["inertia_diag_kgm2"] = {inertia_diag.x(), inertia_diag.y(), inertia_diag.z()};
  for (int k = 0; k < kNumLegs; ++k)
    j["hip_offsets_m"].push_back({hip_offsets[k].x(), hip_offsets[k].y(), hip_offsets[k].z()});
  j["link_lengths_m"] = {{"abduction", abduction_offset},
                         {"thigh", thigh_length},
                         {"calf", calf_length}};
  j["friction_mu"] = friction_mu;
  j["torque_limit_Nm"] = torque_limit;
  j["nominal_height_m"] = nominal_height;
  return j.dump(2);
}

// Leg chain: abduction roll about body x at the hip, then hip and knee pitch
// about y. Zero configuration points the leg straight down.
Vec3 forward_kinematics(const RobotModel& model, int leg, const Vec3& q) {
  const double s = model.side_sign(leg);
  const double l1 = model.abduction_offset;
  const double l2 = model.thigh_length;
  const double l3 = model.calf_length;
  const Vec3 v(-l2 * std::sin(q[1]) - l3 * std::sin(q[1] + q[2]),
               s * l1,
               -l2 * std::cos(q[1]) - l3 * std::cos(q[1] + q[2]));
  Mat3 rx;
  const double c0 = std::cos(q[0]), s0 = std::sin(q[0]);
  rx << 1, 0, 0, 0, c0, -s0, 0, s0, c0;
  return model.hip_offsets[leg] + rx * v;
}

Mat3 leg_jacobian(const RobotModel& model, int leg, const Vec3& q) {
  const double s = model.side_sign(leg);
  const double l1 = model.abduction_offset;
  const double l2 = model.thigh_length;
  const double l3 = model.calf_length;
  const double s1 = std::sin(q[1]), c1 = std::cos(q[1]);
  const double s12 = std::sin(q[1] + q[2]), c12 = std::cos(q[1] + q[2]);
  const Vec3 v(-l2 * s1 - l3 * s12, s * l1, -l2 * c1 - l3 * c12);
  const Vec3 dv1(-l2 * c1 - l3 * c12, 0.0, l2 * s1 + l3 * s12);
  const Vec3 dv2(-l3 * c12, 0.0, l3 * s12);
  Mat3 rx;
  const double c0 = std::cos(q[0]), s0 = std::sin(q[0]);
  rx << 1, 0, 0, 0, c0, -s0, 0, s0, c0;
  Mat3 jac;
  jac.col(0) = Vec3::UnitX().cross(rx * v);
  jac.col(1) = rx * dv1;
  jac.col(2) = rx * dv2;
  return jac;
}

Vec3 inverse_kinematics(const RobotModel& model, int leg, const Vec3& p) {
  const double s = model.side_sign(leg);
  const double l1 = model.abduction_offset;
  const double l2 = model.thigh_length;
  const double l3 = model.calf_length;
  const Vec3 w = p - model.hip_offsets[leg];
  const double r2 = w.y() * w.y() + w.z() * w.z();
  if (r2 < l1 * l1)
    throw OutOfWorkspaceError("inverse_kinematics: target inside abduction cylinder");
  const double d = std::sqrt(r2 - l1 * l1);  // leg-plane reach below the abduction link
  const double q0 = std::atan2(w.z(), w.y()) - std::atan2(-d, s * l1);

  const double x = w.x(), z = -d;
  const double L2 = x * x + z * z;
  const double reach = l2 + l3;
  if (L2 > reach * reach + 1e-12)
    throw OutOfWorkspaceError("inverse_kinematics: target beyond leg reach");
  if (L2 < (l2 - l3) * (l2 - l3) - 1e-12)
    throw OutOfWorkspaceError("inverse_kinematics: target inside minimum reach");
  double ck = (L2 - l2 * l2 - l3 * l3) / (2.0 * l2 * l3);
  ck = std::min(1.0, std::max(-1.0, ck));
  const double q2 = -std::acos(ck);  // knee-bent-backward branch
  const double a = l3 * std::sin(q2);
  const double b = l2 + l3 * std::cos(q2);
  double q1 = std::atan2(b, a) - std::atan2(-z, -x);
  if (q1 > M_PI) q1 -= 2.0 * M_PI;
  if (q1 < -M_PI) q1 += 2.0 * M_PI;
  double q0w = q0;
  if (q0w > M_PI) q0w -= 2.0 * M_PI;
  if (q0w < -M_PI) q0w += 2.0 * M_PI;
  return Vec3(q0w, q1, q2);
}

Vec3 feedforward_torque(const Mat3& jacobian, const Vec3& f_grf) {
  return -jacobian.transpose() * f_grf;
}

}  // namespace quad
