#include "quad/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace quad {

namespace {

Vec3 vec3_from(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

Terrain terrain_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "flat");
  if (kind == "flat") return Terrain::flat();
  if (kind == "slope")
    return Terrain::slope(j.at("angle_deg").get<double>(), j.value("axis", 0));
  if (kind == "heightfield") {
    if (j.contains("file"))
      return Terrain::heightfield_from_file(j.at("file").get<std::string>(),
                                            j.value("cell_m", 0.1));
    const auto rows = j.at("heights_m");
    std::vector<double> h;
    int nr = static_cast<int>(rows.size());
    int nc = static_cast<int>(rows.at(0).size());
    for (const auto& row : rows)
      for (const auto& v : row) h.push_back(v.get<double>());
    return Terrain::heightfield(j.value("cell_m", 0.1), nr, nc, std::move(h));
  }
  throw std::invalid_argument("ScenarioConfig: unknown terrain kind " + kind);
}

}  // namespace

Terrain Terrain::heightfield_from_file(const std::string& path, double cell) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Terrain: cannot open " + path);
  std::vector<double> h;
  std::string line;
  int cols = -1, rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double v;
    int c = 0;
    while (ss >> v) {
      h.push_back(v);
      ++c;
    }
    if (cols < 0) cols = c;
    else if (c != cols)
      throw std::runtime_error("Terrain: ragged heightfield row in " + path);
    ++rows;
  }
  return Terrain::heightfield(cell, rows, cols, std::move(h));
}

ScenarioConfig ScenarioConfig::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ScenarioConfig c;
  if (j.contains("model")) {
    if (j.at("model").is_string())
      c.model = RobotModel::from_json_file(j.at("model").get<std::string>());
    else
      c.model = RobotModel::from_json_string(j.at("model").dump());
  }
  if (j.contains("terrain")) c.terrain = terrain_from_json(j.at("terrain"));
  if (j.contains("gait")) {
    const auto& g = j.at("gait");
    c.gait.cycle_time = g.value("cycle_time_s", c.gait.cycle_time);
    c.gait.duty_factor = g.value("duty_factor", c.gait.duty_factor);
    c.gait.apex_height = g.value("apex_height_m", c.gait.apex_height);
    if (g.contains("phase_offsets"))
      for (int k = 0; k < 4; ++k) c.gait.phase_offsets[k] = g.at("phase_offsets").at(k);
    const std::string mode = g.value("mode", "trot");
    c.gait_mode = mode == "stand" ? GaitMode::Stand : GaitMode::Trot;
  }
  if (j.contains("mpc")) {
    const auto& m = j.at("mpc");
    c.weights.horizon = m.value("horizon", c.weights.horizon);
    c.weights.dt = m.value("dt_s", c.weights.dt);
    c.weights.f_max = m.value("f_max_n", c.weights.f_max);
    if (m.contains("Q"))
      for (int i = 0; i < 13; ++i) c.weights.Q(i) = m.at("Q").at(i);
    if (m.contains("R")) c.weights.R.setConstant(m.at("R").get<double>());
    c.epsilon = m.value("epsilon", c.epsilon);
    c.sigma_u_floor = m.value("sigma_u_floor", c.sigma_u_floor);
  }
  if (j.contains("uncertainty")) {
    const auto& u = j.at("uncertainty");
    c.uncertainty.mass_var = u.value("mass_var", c.uncertainty.mass_var);
    c.uncertainty.inertia_var = u.value("inertia_var", c.uncertainty.inertia_var);
    c.uncertainty.foot_pos_var = u.value("foot_pos_var", c.uncertainty.foot_pos_var);
    c.uncertainty.state_noise_var = u.value("state_noise_var", c.uncertainty.state_noise_var);
  }
  if (j.contains("gains")) {
    c.gains.kp.setConstant(j.at("gains").value("kp", 28.0));
    c.gains.kd.setConstant(j.at("gains").value("kd", 1.0));
  }
  c.raibert_gain = j.value("raibert_gain_s", c.raibert_gain);
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    c.sim.contact_stiffness = s.value("contact_stiffness", c.sim.contact_stiffness);
    c.sim.contact_damping = s.value("contact_damping", c.sim.contact_damping);
    c.sim.friction_mu = s.value("friction_mu", c.sim.friction_mu);
  }
  if (j.contains("command")) {
    c.command.vx = j.at("command").value("vx", 0.0);
    c.command.vy = j.at("command").value("vy", 0.0);
    c.command.wz = j.at("command").value("wz", 0.0);
  }
  c.duration = j.value("duration_s", c.duration);
  c.warmup = j.value("warmup_s", c.warmup);
  c.feedforward_enabled = j.value("feedforward", true);
  const std::string pol = j.value("policy", "standin");
  if (pol == "standin") c.policy = PolicyKind::Standin;
  else {
    c.policy = PolicyKind::File;
    c.policy_path = pol;
  }
  const std::string refsrc = j.value("reference_source", "online");
  if (refsrc == "online") c.reference_source = ReferenceSource::Online;
  else {
    c.reference_source = ReferenceSource::Dataset;
    c.dataset_path = j.value("dataset_path", "");
  }
  if (j.contains("payload")) {
    c.payload_mass = j.at("payload").value("mass_kg", 0.0);
    if (j.at("payload").contains("offset_m"))
      c.payload_offset = vec3_from(j.at("payload").at("offset_m"));
  }
  if (j.contains("pushes"))
    for (const auto& p : j.at("pushes"))
      c.pushes.push_back(PushEvent{p.at("start_s").get<double>(),
                                   p.at("duration_s").get<double>(),
                                   vec3_from(p.at("force_n"))});
  c.seed = j.value("seed", 0UL);
  c.trials = j.value("trials", 10);
  return c;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ScenarioConfig: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("ScenarioConfig: parse error in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// control loop

ControlLoop::ControlLoop(const ScenarioConfig& config)
    : config_(config),
      sim_(config.model, config.sim),
      mpc_(config.weights,
           ChanceParams{config.epsilon,
                        default_input_covariance(config.model, config.uncertainty,
                                                 config.sigma_u_floor)},
           config.qp),
      estimator_(config.estimator_noise) {
  if (config_.policy == PolicyKind::File)
    policy_ = AffinePolicy::load(config_.policy_path);
  else
    policy_ = std::make_unique<ReferenceTrackingPolicy>();
  if (config_.reference_source == ReferenceSource::Dataset) {
    if (!std::filesystem::exists(config_.dataset_path))
      throw std::runtime_error("ControlLoop: reference dataset not found: " +
                               config_.dataset_path);
    dataset_owned_ =
        std::make_shared<ReferenceDataset>(ReferenceDataset::load(config_.dataset_path));
  }
  init_standing_pose();
}

void ControlLoop::init_standing_pose() {
  const RobotModel& m = config_.model;
  const double h0 = config_.terrain.height(0.0, 0.0);
  const double settle =
      (m.mass + config_.payload_mass) * kGravity / (4.0 * config_.sim.contact_stiffness);
  world_.position = Vec3(0.0, 0.0, h0 + m.nominal_height - settle);
  world_.orientation = Eigen::Quaterniond::Identity();

  for (int k = 0; k < 4; ++k) {
    // nominal stance: foot below the abduction link at nominal height
    Vec3 foot_body = m.hip_offsets[k];
    foot_body.y() += m.side_sign(k) * m.abduction_offset;
    const Vec3 foot_xy_world = world_.position + foot_body;
    foot_body.z() =
        config_.terrain.height(foot_xy_world.x(), foot_xy_world.y()) - world_.position.z();
    world_.q.segment<3>(3 * k) = inverse_kinematics(m, k, foot_body);
    foothold_[k] = world_.position + foot_body;
    liftoff_[k] = foothold_[k];
  }
  set_payload(world_, config_.payload_mass, config_.payload_offset);

  if (config_.seed != 0) {
    // reproducible initial-state jitter: +-1 cm base xy, +-0.02 rad joints
    std::mt19937_64 rng(config_.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    world_.position.x() += 0.01 * u(rng);
    world_.position.y() += 0.01 * u(rng);
    for (int a = 0; a < 12; ++a) world_.q(a) += 0.02 * u(rng);
  }

  ref_anchor_ = Vec3(world_.position.x(), world_.position.y(), 0.0);

  estimator_.state().position = world_.position;
  estimator_.state().velocity = Vec3::Zero();
  for (int k = 0; k < 4; ++k) estimator_.state().foot_positions[k] = foothold_[k];
  estimator_.state().covariance = Eigen::Matrix<double, 18, 18>::Identity() * 1e-4;

  ref_.joint_positions = world_.q;
  ref_.base.position = Vec3(0.0, 0.0, h0 + m.nominal_height);
  ref_.base.euler_ypr.setZero();
  ref_.contact_states = {true, true, true, true};
  action_ = prev_action_ = world_.q;
}

namespace {

std::array<bool, 4> stance_now(const ScenarioConfig& c, double t) {
  if (c.gait_mode == GaitMode::Stand) return {true, true, true, true};
  const auto st = contact_state(c.gait, t);
  return {st[0].stance, st[1].stance, st[2].stance, st[3].stance};
}

}  // namespace

void ControlLoop::refgen_tick(double t) {
  const RobotModel& m = config_.model;
  const auto stance = stance_now(config_, t);
  const Eigen::Quaterniond orient = world_.orientation;
  const double yaw = quat_to_ypr(orient)[0];
  const Mat3 rz = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();

  const Vec3 est_p = estimator_.state().position;
  const Vec3 est_v = estimator_.state().velocity;
  const double ground = config_.terrain.height(est_p.x(), est_p.y());

  ref_.base.position = Vec3(est_p.x(), est_p.y(), ground + m.nominal_height);
  ref_.base.euler_ypr = Vec3(yaw, 0.0, 0.0);
  ref_.base.linear_velocity =
      rz * Vec3(cmd_slew_.vx, cmd_slew_.vy, 0.0);
  ref_.base.angular_velocity = Vec3(0.0, 0.0, cmd_slew_.wz);
  ref_.contact_states = stance;

  const double stance_duration = config_.gait.duty_factor * config_.gait.cycle_time;
  const auto phases = contact_state(config_.gait, t);

  if (config_.gait_mode == GaitMode::Trot) {
    for (int k = 0; k < 4; ++k) {
      // lateral abduction offset included so footholds keep the full stance width
      Vec3 hip_body = m.hip_offsets[k];
      hip_body.y() += m.side_sign(k) * m.abduction_offset;
      const Vec3 hip_world = est_p + orient * hip_body;
      if (!stance[k]) {
        if (prev_stance_[k]) liftoff_[k] = estimator_.state().foot_positions[k];
        foothold_[k] = raibert_foothold(hip_world, est_v, ref_.base.linear_velocity,
                                        stance_duration, config_.raibert_gain,
                                        config_.terrain);
      } else if (!prev_stance_[k]) {
        // anchor the stance reference at the actual landing point so the
        // position loop holds the foot instead of dragging it to the target
        foothold_[k] = estimator_.state().foot_positions[k];
      }
      prev_stance_[k] = stance[k];
    }
  }

  // reference joint positions: IK of the planned foot point about the
  // reference base pose
  for (int k = 0; k < 4; ++k) {
    Vec3 p_foot_world;
    if (stance[k] || config_.gait_mode == GaitMode::Stand) {
      p_foot_world = foothold_[k];
    } else {
      const auto sw = swing_trajectory(liftoff_[k], foothold_[k],
                                       config_.gait.apex_height, phases[k].phase_fraction);
      p_foot_world = sw.position;
    }
    Vec3 p_body = rz.transpose() * (p_foot_world - ref_.base.position);
    try {
      ref_.joint_positions.segment<3>(3 * k) = inverse_kinematics(m, k, p_body);
    } catch (const OutOfWorkspaceError&) {
      // pull an unreachable target toward the hip and retry once
      Vec3 rel = p_body - m.hip_offsets[k];
      rel *= 0.95 * (m.thigh_length + m.calf_length) / std::max(1e-9, rel.norm());
      try {
        ref_.joint_positions.segment<3>(3 * k) =
            inverse_kinematics(m, k, m.hip_offsets[k] + rel);
      } catch (const OutOfWorkspaceError&) {
        // keep the previous reference for this leg
      }
    }
  }

  if (dataset_owned_) {
    const auto& entry =
        dataset_owned_->nearest(config_.command.vx, config_.command.vy, config_.command.wz);
    if (!entry.ticks.empty()) {
      const double cycle_phase = std::fmod(t / config_.gait.cycle_time, 1.0);
      const int idx = std::min<int>(static_cast<int>(cycle_phase * entry.ticks.size()),
                                    static_cast<int>(entry.ticks.size()) - 1);
      ref_.joint_positions = entry.ticks[idx].joint_positions;
      ref_.contact_states = entry.ticks[idx].contacts;
    }
  }
}

RunMetrics ControlLoop::run(RunLog* log) {
  RunMetrics metrics;
  const double dt = config_.sim_dt;
  const long steps = static_cast<long>(std::llround(config_.duration / dt));
  const RobotModel& m = config_.model;

  double sum_vx2 = 0.0, sum_vy2 = 0.0, sum_wz2 = 0.0;
  double sum_vx2_est = 0.0, sum_vy2_est = 0.0;
  double sum_calf = 0.0, sum_gxy = 0.0, sum_reward = 0.0, sum_solve = 0.0;
  long n_track = 0, n_reward = 0, n_solve = 0;
  const double y0 = world_.position.y();

  Vec12 qd_prev_policy = world_.qd;
  RewardBreakdown reward;
  size_t next_push = 0;
  const auto wall_start = std::chrono::steady_clock::now();

  for (long i = 0; i < steps; ++i) {
    const double t = i * dt;

    if (config_.realtime && i % 10 == 0) {
      const auto target = wall_start + std::chrono::duration_cast<
          std::chrono::steady_clock::duration>(std::chrono::duration<double>(t));
      std::this_thread::sleep_until(target);
    }

    while (next_push < config_.pushes.size() && t >= config_.pushes[next_push].start) {
      apply_push(world_, config_.pushes[next_push].force, config_.pushes[next_push].duration);
      ++next_push;
    }

    const auto stance = stance_now(config_, t);
    const Eigen::Quaterniond orient = world_.orientation;

    // slew the commanded twist so the planner never demands a step change
    // in momentum inside one stance pair
    const double dv = 2.0 * dt, dw = 4.0 * dt;
    auto slew = [](double current, double target, double step) {
      return current + std::clamp(target - current, -step, step);
    };
    cmd_slew_.vx = slew(cmd_slew_.vx, config_.command.vx, dv);
    cmd_slew_.vy = slew(cmd_slew_.vy, config_.command.vy, dv);
    cmd_slew_.wz = slew(cmd_slew_.wz, config_.command.wz, dw);

    // integrate the command into the world-frame reference anchor
    {
      const double cy = std::cos(ref_anchor_(2)), sy = std::sin(ref_anchor_(2));
      ref_anchor_(0) += (cy * cmd_slew_.vx - sy * cmd_slew_.vy) * dt;
      ref_anchor_(1) += (sy * cmd_slew_.vx + cy * cmd_slew_.vy) * dt;
      ref_anchor_(2) += cmd_slew_.wz * dt;
    }

    if (i % config_.mpc_every == 0) {
      // estimator at the main-loop rate
      estimator_.predict(sim_.last_com_acceleration(), dt * config_.mpc_every);
      std::array<Vec3, 4> fk;
      for (int k = 0; k < 4; ++k) fk[k] = sim_.foot_position_body(world_, k);
      estimator_.update(fk, stance, orient);

      // MPC in the terrain-local vertical frame
      const Vec3 est_p = estimator_.state().position;
      const double ground = config_.terrain.height(est_p.x(), est_p.y());
      SrbdState x0;
      x0.euler_ypr = quat_to_ypr(orient);
      x0.position = est_p - Vec3(0.0, 0.0, ground);
      x0.angular_velocity = world_.angular_velocity;
      x0.linear_velocity = estimator_.state().velocity;

      ContactSchedule schedule;
      if (config_.gait_mode == GaitMode::Stand) {
        schedule.horizon = config_.weights.horizon;
        schedule.dt = config_.weights.dt;
        schedule.stance.assign(config_.weights.horizon, {true, true, true, true});
        schedule.phase_left_time = {1.0, 1.0, 1.0, 1.0};
      } else {
        schedule = contact_schedule(config_.gait, t, config_.weights.horizon,
                                    config_.weights.dt);
      }

      std::array<Vec3, 4> foot_positions;
      for (int k = 0; k < 4; ++k) {
        const Vec3 f = stance[k] ? estimator_.state().foot_positions[k] : foothold_[k];
        foot_positions[k] = f - Vec3(0.0, 0.0, ground);
      }

      // hold position only on axes with zero commanded velocity; a commanded
      // axis tracks velocity, and regulating its position would fight the
      // robot's natural phase lag
      const double cy0 = std::cos(x0.euler_ypr[0]), sy0 = std::sin(x0.euler_ypr[0]);
      const double vref_x = cy0 * config_.command.vx - sy0 * config_.command.vy;
      const double vref_y = sy0 * config_.command.vx + cy0 * config_.command.vy;
      if (std::abs(vref_x) > 0.01) ref_anchor_(0) = est_p.x();
      if (std::abs(vref_y) > 0.01) ref_anchor_(1) = est_p.y();
      if (std::abs(config_.command.wz) > 0.01) ref_anchor_(2) = x0.euler_ypr[0];

      // pull the anchor back inside a trust region around the estimate so a
      // large sustained displacement never demands unbounded restoring force
      const double lim_xy = 0.10, lim_yaw = 0.25;
      ref_anchor_(0) = std::clamp(ref_anchor_(0), est_p.x() - lim_xy, est_p.x() + lim_xy);
      ref_anchor_(1) = std::clamp(ref_anchor_(1), est_p.y() - lim_xy, est_p.y() + lim_xy);
      ref_anchor_(2) = std::clamp(ref_anchor_(2), x0.euler_ypr[0] - lim_yaw,
                                  x0.euler_ypr[0] + lim_yaw);
      const Vec3 anchor(ref_anchor_(0), ref_anchor_(1), ref_anchor_(2));

      const auto uncertainty = uncertainty_params(m, foot_positions, config_.uncertainty);
      plan_ = mpc_.plan(m, x0, cmd_slew_, schedule, foot_positions, uncertainty, anchor);
      sum_solve += plan_.solve_time;
      ++n_solve;

      tau_ff_ = plan_.forces.empty()
                    ? Vec12::Zero().eval()
                    : stance_feedforward(m, world_.q, plan_.forces.front(), stance, orient);
    }

    if (i % config_.policy_every == 0) {
      refgen_tick(t);
      SensorSample sensors;
      sensors.orientation = orient;
      sensors.body_angular_velocity =
          orient.toRotationMatrix().transpose() * world_.angular_velocity;
      sensors.joint_positions = world_.q;
      sensors.joint_velocities = world_.qd;
      Eigen::Vector4d phase_left;
      if (config_.gait_mode == GaitMode::Stand) {
        phase_left.setConstant(config_.gait.cycle_time);
      } else {
        const auto ph = contact_state(config_.gait, t);
        for (int k = 0; k < 4; ++k) phase_left(k) = ph[k].phase_left_time;
      }
      if (first_policy_tick_) {
        prev_action_ = ref_.joint_positions;
        first_policy_tick_ = false;
      } else {
        prev_action_ = action_;
      }
      const Observation obs = assemble_observation(sensors, cmd_slew_, ref_,
                                                   prev_action_, phase_left);
      action_ = clamp_action(policy_->act(obs));

      const Vec12 joint_accel =
          (world_.qd - qd_prev_policy) / (config_.policy_every * dt);
      qd_prev_policy = world_.qd;
      SrbdState truth;
      truth.euler_ypr = quat_to_ypr(orient);
      truth.position = world_.position;
      truth.angular_velocity = world_.angular_velocity;
      truth.linear_velocity = world_.linear_velocity;
      reward = total_reward(truth, world_.q, ref_, action_, prev_action_, joint_accel);
      sum_reward += reward.total;
      ++n_reward;
    }

    const Vec12 tau_ff_cmd = config_.feedforward_enabled ? tau_ff_ : Vec12::Zero();
    const Vec12 tau =
        llc_torque(action_, world_.q, world_.qd, tau_ff_cmd, config_.gains, m.torque_limit);

    sim_.step(world_, tau, config_.terrain, dt);

    // tracking metrics in the yaw frame, ground truth and estimated
    const Vec3 ypr = quat_to_ypr(world_.orientation);
    const Mat3 rz = Eigen::AngleAxisd(ypr[0], Vec3::UnitZ()).toRotationMatrix();
    const Vec3 v_yaw = rz.transpose() * world_.linear_velocity;
    const Vec3 v_yaw_est = rz.transpose() * estimator_.state().velocity;
    if (t >= config_.warmup) {
      sum_vx2 += (v_yaw.x() - config_.command.vx) * (v_yaw.x() - config_.command.vx);
      sum_vy2 += (v_yaw.y() - config_.command.vy) * (v_yaw.y() - config_.command.vy);
      sum_wz2 += (world_.angular_velocity.z() - config_.command.wz) *
                 (world_.angular_velocity.z() - config_.command.wz);
      sum_vx2_est +=
          (v_yaw_est.x() - config_.command.vx) * (v_yaw_est.x() - config_.command.vx);
      sum_vy2_est +=
          (v_yaw_est.y() - config_.command.vy) * (v_yaw_est.y() - config_.command.vy);
      ++n_track;
      sum_calf += (std::abs(tau_ff_cmd(2)) + std::abs(tau_ff_cmd(5)) +
                   std::abs(tau_ff_cmd(8)) + std::abs(tau_ff_cmd(11))) / 4.0;
      const Vec3 g_proj =
          world_.orientation.toRotationMatrix().transpose() * Vec3(0, 0, -1);
      sum_gxy += g_proj.head<2>().norm();
    }

    if (log) {
      std::string row;
      row.reserve(1024);
      auto add = [&row](double v) {
        row += fmt::format("{}", v);
        row += ',';
      };
      add(world_.time);
      for (int a = 0; a < 3; ++a) add(world_.position(a));
      for (int a = 0; a < 3; ++a) add(ypr(a));
      for (int a = 0; a < 3; ++a) add(world_.linear_velocity(a));
      for (int a = 0; a < 3; ++a) add(world_.angular_velocity(a));
      add(v_yaw.x());
      add(v_yaw.y());
      for (int a = 0; a < 3; ++a) add(estimator_.state().position(a));
      for (int a = 0; a < 3; ++a) add(estimator_.state().velocity(a));
      add(config_.command.vx);
      add(config_.command.vy);
      add(config_.command.wz);
      for (int k = 0; k < 4; ++k) add(world_.foot_contact[k] ? 1.0 : 0.0);
      for (int k = 0; k < 4; ++k) add(stance[k] ? 1.0 : 0.0);
      const Vec3 g_proj =
          world_.orientation.toRotationMatrix().transpose() * Vec3(0, 0, -1);
      for (int a = 0; a < 3; ++a) add(g_proj(a));
      add(world_.payload.mass);
      for (int a = 0; a < 3; ++a) add(world_.push.remaining > 0 ? world_.push.force(a) : 0.0);
      for (int a = 0; a < 12; ++a) add(action_(a));
      for (int a = 0; a < 12; ++a) add(world_.q(a));
      for (int a = 0; a < 12; ++a) add(tau_ff_cmd(a));
      for (int a = 0; a < 12; ++a) add(tau(a));
      double fz_sim = 0.0, fz_cmd = 0.0;
      for (int k = 0; k < 4; ++k) {
        fz_sim += world_.contact_force[k].z();
        if (!plan_.forces.empty()) fz_cmd += plan_.forces.front()(3 * k + 2);
      }
      add(fz_sim);
      add(fz_cmd);
      add(reward.total);
      add(reward.rotation);
      add(reward.linear_velocity);
      add(reward.angular_velocity);
      add(reward.joint_position);
      add(reward.action_rate);
      add(reward.joint_accel);
      add(static_cast<double>(static_cast<int>(plan_.solve_status)));
      add(static_cast<double>(plan_.iterations));
      row += fall_detected(world_, config_.terrain) ? '1' : '0';
      log->rows.push_back(std::move(row));
    }

    if (fall_detected(world_, config_.terrain)) {
      metrics.success = false;
      metrics.fall_time = world_.time;
      break;
    }
  }

  metrics.ticks = world_.tick;
  if (n_track > 0) {
    metrics.rmse_vx = std::sqrt(sum_vx2 / n_track);
    metrics.rmse_vy = std::sqrt(sum_vy2 / n_track);
    metrics.rmse_wz = std::sqrt(sum_wz2 / n_track);
    metrics.rmse_combined = std::sqrt((sum_vx2 + sum_vy2) / n_track);
    metrics.rmse_vx_est = std::sqrt(sum_vx2_est / n_track);
    metrics.rmse_vy_est = std::sqrt(sum_vy2_est / n_track);
    metrics.mean_calf_tau_ff = sum_calf / n_track;
    metrics.mean_gravity_proj_xy = sum_gxy / n_track;
  }
  if (n_reward > 0) metrics.mean_reward = sum_reward / n_reward;
  if (n_solve > 0) metrics.mean_solve_time = sum_solve / n_solve;
  metrics.lateral_drift = std::abs(world_.position.y() - y0);
  return metrics;
}

// ---------------------------------------------------------------------------
// run log

std::string RunLog::csv_header() {
  std::string h =
      "t,px,py,pz,yaw,pitch,roll,vx,vy,vz,wx,wy,wz,vx_yaw,vy_yaw,"
      "est_px,est_py,est_pz,est_vx,est_vy,est_vz,cmd_vx,cmd_vy,cmd_wz,"
      "contact_fl,contact_fr,contact_rl,contact_rr,"
      "sched_fl,sched_fr,sched_rl,sched_rr,gx,gy,gz,payload_kg,"
      "push_fx,push_fy,push_fz";
  for (int a = 0; a < 12; ++a) h += fmt::format(",action{}", a);
  for (int a = 0; a < 12; ++a) h += fmt::format(",q{}", a);
  for (int a = 0; a < 12; ++a) h += fmt::format(",tau_ff{}", a);
  for (int a = 0; a < 12; ++a) h += fmt::format(",tau{}", a);
  h += ",fz_sim,fz_cmd";
  h += ",reward,r_rot,r_linvel,r_angvel,r_jointpos,r_actrate,r_jointacc,"
       "mpc_status,mpc_iters,fall";
  return h;
}

void RunLog::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("RunLog: cannot open " + path);
  out << csv_header() << '\n';
  for (const auto& r : rows) out << r << '\n';
}

// ---------------------------------------------------------------------------
// dataset

const ReferenceDataset::Entry& ReferenceDataset::nearest(double vx, double vy,
                                                         double wz) const {
  if (entries.empty()) throw std::runtime_error("ReferenceDataset: empty dataset");
  const Entry* best = &entries.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    const double d = (e.vx - vx) * (e.vx - vx) + (e.vy - vy) * (e.vy - vy) +
                     (e.wz - wz) * (e.wz - wz);
    if (d < best_d) {
      best_d = d;
      best = &e;
    }
  }
  return *best;
}

void ReferenceDataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ReferenceDataset: cannot open " + path);
  out.write("QDS1", 4);
  auto w64 = [&out](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto w32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  w64(dt);
  w32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w64(e.vx);
    w64(e.vy);
    w64(e.wz);
    w32(e.feasible ? 1u : 0u);
    w32(static_cast<std::uint32_t>(e.ticks.size()));
    for (const auto& t : e.ticks) {
      for (int a = 0; a < 12; ++a) w64(t.joint_positions(a));
      for (int a = 0; a < 12; ++a) w64(t.tau_ff(a));
      const StateVec x = t.base.to_vector();
      for (int a = 0; a < 13; ++a) w64(x(a));
      for (int k = 0; k < 4; ++k) w32(t.contacts[k] ? 1u : 0u);
    }
  }
}

ReferenceDataset ReferenceDataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ReferenceDataset: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "QDS1", 4) != 0)
    throw std::runtime_error("ReferenceDataset: bad magic in " + path);
  auto r64 = [&in]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto r32 = [&in]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  ReferenceDataset d;
  d.dt = r64();
  const std::uint32_t n = r32();
  d.entries.resize(n);
  for (auto& e : d.entries) {
    e.vx = r64();
    e.vy = r64();
    e.wz = r64();
    e.feasible = r32() != 0;
    e.ticks.resize(r32());
    for (auto& t : e.ticks) {
      for (int a = 0; a < 12; ++a) t.joint_positions(a) = r64();
      for (int a = 0; a < 12; ++a) t.tau_ff(a) = r64();
      StateVec x;
      for (int a = 0; a < 13; ++a) x(a) = r64();
      t.base = SrbdState::from_vector(x);
      for (int k = 0; k < 4; ++k) t.contacts[k] = r32() != 0;
    }
    if (!in) throw std::runtime_error("ReferenceDataset: truncated file " + path);
  }
  return d;
}

ReferenceDataset generate_dataset(const ScenarioConfig& config, const GridSpec& grid) {
  const RobotModel& m = config.model;
  ReferenceDataset out;
  out.dt = config.weights.dt;
  const int ticks_per_cycle =
      std::max(1, static_cast<int>(std::llround(config.gait.cycle_time / out.dt)));

  auto grid_points = [](double lo, double hi, double step) {
    std::vector<double> v;
    for (int i = 0;; ++i) {
      const double x = lo + i * step;
      if (x > hi + 1e-9) break;
      v.push_back(std::abs(x) < 1e-12 ? 0.0 : x);
    }
    return v;
  };

  const auto vxs = grid_points(grid.vx_min, grid.vx_max, grid.step);
  const auto vys = grid_points(grid.vy_min, grid.vy_max, grid.step);
  const auto wzs = grid_points(grid.wz_min, grid.wz_max, grid.step);

  const double stance_duration = config.gait.duty_factor * config.gait.cycle_time;
  const Terrain flat = Terrain::flat();

  for (double vx : vxs)
    for (double vy : vys)
      for (double wz : wzs) {
        ReferenceDataset::Entry entry;
        entry.vx = vx;
        entry.vy = vy;
        entry.wz = wz;
        const CommandTwist cmd{vx, vy, wz};

        GrfMpc mpc(config.weights,
                   ChanceParams{config.epsilon,
                                default_input_covariance(m, config.uncertainty,
                                                         config.sigma_u_floor)},
                   config.qp);

        // reference state rolls exactly along the command
        const auto refs = reference_rollout(cmd, SrbdState{}, ticks_per_cycle, out.dt,
                                            m.nominal_height);
        std::array<Vec3, 4> foothold;
        std::array<Vec3, 4> liftoff;
        for (int k = 0; k < 4; ++k) {
          Vec3 f = m.hip_offsets[k];
          f.y() += m.side_sign(k) * m.abduction_offset;
          f.z() = 0.0;
          foothold[k] = f;
          liftoff[k] = f;
        }
        std::array<bool, 4> prev = {true, true, true, true};

        for (int i = 0; i < ticks_per_cycle; ++i) {
          const double t = i * out.dt;
          const SrbdState& xr = refs[i];
          const Mat3 rz =
              Eigen::AngleAxisd(xr.euler_ypr[0], Vec3::UnitZ()).toRotationMatrix();
          const auto phases = contact_state(config.gait, t);
          std::array<bool, 4> stance;
          for (int k = 0; k < 4; ++k) stance[k] = phases[k].stance;
          if (config.gait_mode == GaitMode::Stand) stance = {true, true, true, true};

          ReferenceDataset::Tick tick;
          tick.base = xr;
          tick.contacts = stance;

          std::array<Vec3, 4> foot_pos;
          for (int k = 0; k < 4; ++k) {
            Vec3 hip_body = m.hip_offsets[k];
            hip_body.y() += m.side_sign(k) * m.abduction_offset;
            const Vec3 hip_world = xr.position + rz * hip_body;
            if (!stance[k]) {
              if (prev[k]) liftoff[k] = foothold[k];
              foothold[k] = raibert_foothold(hip_world, xr.linear_velocity,
                                             xr.linear_velocity, stance_duration,
                                             config.raibert_gain, flat);
              const auto sw = swing_trajectory(liftoff[k], foothold[k],
                                               config.gait.apex_height,
                                               phases[k].phase_fraction);
              foot_pos[k] = sw.position;
            } else {
              foot_pos[k] = foothold[k];
            }
            prev[k] = stance[k];
          }

          ContactSchedule schedule;
          if (config.gait_mode == GaitMode::Stand) {
            schedule.horizon = config.weights.horizon;
            schedule.dt = config.weights.dt;
            schedule.stance.assign(config.weights.horizon, {true, true, true, true});
          } else {
            schedule =
                contact_schedule(config.gait, t, config.weights.horizon, config.weights.dt);
          }

          const auto uncertainty = uncertainty_params(m, foot_pos, config.uncertainty);
          const auto plan = mpc.plan(m, xr, cmd, schedule, foot_pos, uncertainty);
          if (!plan.feasible) entry.feasible = false;

          for (int k = 0; k < 4; ++k) {
            const Vec3 p_body = rz.transpose() * (foot_pos[k] - xr.position);
            try {
              tick.joint_positions.segment<3>(3 * k) = inverse_kinematics(m, k, p_body);
            } catch (const OutOfWorkspaceError&) {
              entry.feasible = false;
              tick.joint_positions.segment<3>(3 * k).setZero();
            }
          }
          tick.tau_ff = plan.forces.empty()
                            ? Vec12::Zero().eval()
                            : stance_feedforward(m, tick.joint_positions, plan.forces.front(),
                                                 stance, Eigen::Quaterniond(rz));
          entry.ticks.push_back(tick);
        }
        out.entries.push_back(std::move(entry));
      }
  return out;
}

// ---------------------------------------------------------------------------
// scenarios

RunMetrics run_scenario(const ScenarioConfig& config, const std::string& out_csv) {
  ControlLoop loop(config);
  RunLog log;
  RunMetrics metrics = loop.run(out_csv.empty() ? nullptr : &log);
  if (!out_csv.empty()) log.write(out_csv);
  return metrics;
}

ScenarioConfig jittered(const ScenarioConfig& config, int trial) {
  ScenarioConfig c = config;
  c.seed = config.seed + static_cast<unsigned long>(trial) * 7919UL;
  return c;
}

PushSweepResult push_sweep(const ScenarioConfig& config, const Vec3& direction,
                           double start_n, double step_n, double hold_s, double max_n) {
  PushSweepResult result;
  ScenarioConfig c = config;
  c.pushes.clear();
  const Vec3 dir = direction.normalized();
  int levels = 0;
  for (double f = start_n; f <= max_n + 1e-9; f += step_n) ++levels;
  // let the gait settle before the first push so the sweep measures
  // steady-state robustness, not the startup transient
  const double settle_s = 2.0;
  for (int i = 0; i < levels; ++i)
    c.pushes.push_back(PushEvent{settle_s + i * hold_s, hold_s, (start_n + i * step_n) * dir});
  c.duration = settle_s + levels * hold_s;

  const RunMetrics m = run_scenario(c);
  result.rmse_vx = m.rmse_vx;
  if (m.success) {
    result.max_sustained = start_n + (levels - 1) * step_n;
    result.capped = true;
  } else {
    const int fallen_level =
        static_cast<int>(std::max(0.0, m.fall_time - settle_s) / hold_s);
    result.max_sustained = fallen_level > 0 ? start_n + (fallen_level - 1) * step_n : 0.0;
  }
  return result;
}

std::vector<PayloadPoint> payload_sweep(const ScenarioConfig& config,
                                        const std::vector<double>& masses, int trials) {
  std::vector<PayloadPoint> out;
  for (double mass : masses) {
    PayloadPoint p;
    p.mass = mass;
    int successes = 0;
    double sum_tau = 0.0, sum_rmse = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      ScenarioConfig c = jittered(config, trial);
      c.payload_mass = mass;
      const RunMetrics m = run_scenario(c);
      if (m.success) ++successes;
      sum_tau += m.mean_calf_tau_ff;
      sum_rmse += m.rmse_vx;
    }
    p.success_rate = trials > 0 ? static_cast<double>(successes) / trials : 0.0;
    p.mean_calf_tau_ff = trials > 0 ? sum_tau / trials : 0.0;
    p.rmse_vx = trials > 0 ? sum_rmse / trials : 0.0;
    out.push_back(p);
  }
  return out;
}

std::vector<ComparisonRow> compare_controllers(const ScenarioConfig& config) {
  ScenarioConfig ours = config;
  ours.feedforward_enabled = true;
  ScenarioConfig baseline = config;
  baseline.feedforward_enabled = false;
  const RunMetrics a = run_scenario(ours);
  const RunMetrics b = run_scenario(baseline);
  return {
      {"rmse_vx_mps", a.rmse_vx, b.rmse_vx},
      {"rmse_combined_mps", a.rmse_combined, b.rmse_combined},
      {"lateral_drift_m", a.lateral_drift, b.lateral_drift},
      {"success", a.success ? 1.0 : 0.0, b.success ? 1.0 : 0.0},
      {"mean_reward", a.mean_reward, b.mean_reward},
  };
}

// ---------------------------------------------------------------------------
// plots

std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need at least two matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12)
    throw std::invalid_argument("linear_fit: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    const double fit = slope * x[i] + intercept;
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  const double r2 = ss_tot > 1e-15 ? 1.0 - ss_res / ss_tot : 1.0;
  return {slope, intercept, r2};
}

namespace {

struct ParsedLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // column-major

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw std::runtime_error("emit_plots: missing column " + name);
  }
};

ParsedLog parse_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("emit_plots: cannot open " + path);
  ParsedLog log;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error("emit_plots: empty log " + path);
  ++lineno;
  std::stringstream hs(line);
  std::string name;
  while (std::getline(hs, name, ',')) log.columns.push_back(name);
  log.data.resize(log.columns.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= log.columns.size())
        throw std::runtime_error(fmt::format("emit_plots: too many cells at {}:{}", path, lineno));
      try {
        log.data[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(fmt::format("emit_plots: bad number at {}:{}", path, lineno));
      }
      ++c;
    }
    if (c != log.columns.size())
      throw std::runtime_error(fmt::format("emit_plots: short row at {}:{}", path, lineno));
  }
  return log;
}

}  // namespace

void emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<double> payloads, calf_tau;
  for (size_t li = 0; li < csv_paths.size(); ++li) {
    const ParsedLog log = parse_log(csv_paths[li]);
    const std::string stem = fs::path(csv_paths[li]).stem().string();

    // per-leg stance intervals from the contact flags
    {
      std::ofstream out(fs::path(out_dir) / (stem + "_gait_sequence.txt"));
      out << "# leg start_s end_s\n";
      const char* names[4] = {"contact_fl", "contact_fr", "contact_rl", "contact_rr"};
      const auto& t = log.data[log.col("t")];
      for (int k = 0; k < 4; ++k) {
        const auto& c = log.data[log.col(names[k])];
        bool in_contact = false;
        double start = 0.0;
        for (size_t i = 0; i < c.size(); ++i) {
          if (c[i] > 0.5 && !in_contact) {
            in_contact = true;
            start = t[i];
          } else if (c[i] < 0.5 && in_contact) {
            in_contact = false;
            out << k << ' ' << start << ' ' << t[i] << '\n';
          }
        }
        if (in_contact && !t.empty()) out << k << ' ' << start << ' ' << t.back() << '\n';
      }
    }

    // gravity-projection scatter
    {
      std::ofstream out(fs::path(out_dir) / (stem + "_gravity_projection.txt"));
      out << "# gx gy\n";
      const auto& gx = log.data[log.col("gx")];
      const auto& gy = log.data[log.col("gy")];
      for (size_t i = 0; i < gx.size(); ++i) out << gx[i] << ' ' << gy[i] << '\n';
    }

    // mean calf |tau_ff| for the payload series
    double sum = 0.0;
    size_t n = 0;
    for (int joint : {2, 5, 8, 11}) {
      const auto& col = log.data[log.col(fmt::format("tau_ff{}", joint))];
      for (double v : col) {
        sum += std::abs(v);
        ++n;
      }
    }
    const auto& payload_col = log.data[log.col("payload_kg")];
    payloads.push_back(payload_col.empty() ? 0.0 : payload_col.back());
    calf_tau.push_back(n > 0 ? sum / n : 0.0);
  }

  {
    std::ofstream out(fs::path(out_dir) / "tau_ff_vs_payload.txt");
    out << "# payload_kg mean_calf_tau_ff_nm\n";
    for (size_t i = 0; i < payloads.size(); ++i)
      out << payloads[i] << ' ' << calf_tau[i] << '\n';
    if (payloads.size() >= 2) {
      const auto fit = linear_fit(payloads, calf_tau);
      out << fmt::format("# fit slope={} intercept={} r2={}\n", fit[0], fit[1], fit[2]);
    }
  }

  std::ofstream script(fs::path(out_dir) / "plot.py");
  script << R"(#!/usr/bin/env python3
"""Render the plot data emitted next to this script."""
import glob
import os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

for path in glob.glob(os.path.join(here, "*_gait_sequence.txt")):
    rows = [l.split() for l in open(path) if not l.startswith("#") and l.strip()]
    fig, ax = plt.subplots(figsize=(8, 2.5))
    for leg, start, end in rows:
        ax.barh(int(leg), float(end) - float(start), left=float(start), height=0.6)
    ax.set_yticks(range(4), ["FL", "FR", "RL", "RR"])
    ax.set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path.replace(".txt", ".png"), dpi=150)
    plt.close(fig)

for path in glob.glob(os.path.join(here, "*_gravity_projection.txt")):
    pts = [list(map(float, l.split())) for l in open(path) if not l.startswith("#") and l.strip()]
    if not pts:
        continue
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=2, alpha=0.3)
    ax.set_xlabel("gx")
    ax.set_ylabel("gy")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path.replace(".txt", ".png"), dpi=150)
    plt.close(fig)

tau_path = os.path.join(here, "tau_ff_vs_payload.txt")
if os.path.exists(tau_path):
    pts = [list(map(float, l.split())) for l in open(tau_path) if not l.startswith("#") and l.strip()]
    if len(pts) >= 2:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-")
        ax.set_xlabel("payload [kg]")
        ax.set_ylabel("mean calf |tau_ff| [N m]")
        fig.tight_layout()
        fig.savefig(tau_path.replace(".txt", ".png"), dpi=150)
        plt.close(fig)
)";
}

}  // namespace quad
