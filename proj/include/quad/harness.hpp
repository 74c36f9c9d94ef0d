#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "quad/ctrl.hpp"
#include "quad/estimator.hpp"
#include "quad/gait.hpp"
#include "quad/mpc.hpp"
#include "quad/sim.hpp"
#include "quad/terrain.hpp"

namespace quad {

enum class GaitMode { Stand, Trot };
enum class PolicyKind { Standin, File };
enum class ReferenceSource { Online, Dataset };

struct PushEvent {
  double start = 0.0;     // s
  double duration = 0.0;  // s
  Vec3 force = Vec3::Zero();
};

struct ScenarioConfig {
  RobotModel model;
  Terrain terrain;
  GaitParams gait;
  GaitMode gait_mode = GaitMode::Trot;
  MpcWeights weights;
  double epsilon = 0.90;
  UncertaintyConfig uncertainty;
  double sigma_u_floor = 1.0;  // N^2, floor variance for Sigma_u
  LlcGains gains;
  double raibert_gain = 0.03;  // s
  QpSettings qp;
  EstimatorNoise estimator_noise;
  SimParams sim;

  CommandTwist command;
  double duration = 10.0;      // s
  double warmup = 1.0;         // s excluded from tracking metrics
  double sim_dt = 1e-3;        // s
  int mpc_every = 2;           // sim steps between MPC solves (500 Hz)
  int policy_every = 20;       // sim steps between policy ticks (50 Hz)

  bool feedforward_enabled = true;
  PolicyKind policy = PolicyKind::Standin;
  std::string policy_path;
  ReferenceSource reference_source = ReferenceSource::Online;
  std::string dataset_path;

  double payload_mass = 0.0;
  Vec3 payload_offset = Vec3::Zero();
  std::vector<PushEvent> pushes;

  unsigned long seed = 0;
  int trials = 10;

  // pace the deterministic loop to wall-clock time; results are identical to
  // a non-realtime run with the same seed
  bool realtime = false;

  static ScenarioConfig from_json_file(const std::string& path);
  static ScenarioConfig from_json_string(const std::string& text);
};

struct RunMetrics {
  double rmse_vx = 0.0, rmse_vy = 0.0, rmse_wz = 0.0, rmse_combined = 0.0;
  double rmse_vx_est = 0.0, rmse_vy_est = 0.0;  // from the estimator's velocity
  bool success = true;
  double fall_time = -1.0;          // s, -1 when no fall
  double max_sustained_push = 0.0;  // N, filled by push sweeps
  double mean_calf_tau_ff = 0.0;    // N m, mean |tau_ff| of the calf joints
  double lateral_drift = 0.0;       // m, |final y - initial y| corrected for cmd
  double mean_gravity_proj_xy = 0.0;
  double mean_reward = 0.0;
  double mean_solve_time = 0.0;     // s
  long ticks = 0;
};

/// One row per LLC tick; fixed column order (see csv_header()).
struct RunLog {
  std::vector<std::string> rows;
  static std::string csv_header();
  void write(const std::string& path) const;
};

/// Deterministic single-loop closed-loop runner: simulator at sim_dt, LLC
/// every step, MPC every mpc_every steps, policy every policy_every steps.
class ControlLoop {
 public:
  explicit ControlLoop(const ScenarioConfig& config);

  /// Run for config.duration seconds (or until a fall). Returns metrics;
  /// appends per-tick rows to `log` when given.
  RunMetrics run(RunLog* log = nullptr);

  const WorldState& world() const { return world_; }
  WorldState& world() { return world_; }
  const GrfPlan& latest_plan() const { return plan_; }

 private:
  void init_standing_pose();
  void refgen_tick(double t);

  ScenarioConfig config_;
  Simulator sim_;
  GrfMpc mpc_;
  StateEstimator estimator_;
  std::unique_ptr<Policy> policy_;
  WorldState world_;
  GrfPlan plan_;
  Vec12 action_ = Vec12::Zero();
  Vec12 prev_action_ = Vec12::Zero();
  Vec12 tau_ff_ = Vec12::Zero();
  CommandTwist cmd_slew_;  // rate-limited command handed to the MPC/refgen
  Vec3 ref_anchor_ = Vec3::Zero();  // world x, y, yaw integrated from the command
  MotionReference ref_;
  std::array<bool, 4> prev_stance_{true, true, true, true};
  std::array<Vec3, 4> foothold_{};   // stance anchors / swing targets, world
  std::array<Vec3, 4> liftoff_{};
  std::shared_ptr<class ReferenceDataset> dataset_owned_;
  bool first_policy_tick_ = true;
};

/// Reference dataset over the command grid: one gait cycle per command.
class ReferenceDataset {
 public:
  struct Tick {
    Vec12 joint_positions;
    Vec12 tau_ff;
    SrbdState base;
    std::array<bool, 4> contacts;
  };
  struct Entry {
    double vx, vy, wz;
    bool feasible = true;
    std::vector<Tick> ticks;  // one gait cycle at the MPC dt
  };

  std::vector<Entry> entries;
  double dt = 0.02;

  const Entry& nearest(double vx, double vy, double wz) const;

  void save(const std::string& path) const;
  static ReferenceDataset load(const std::string& path);
};

struct GridSpec {
  double vx_min = -0.5, vx_max = 1.0;
  double vy_min = -0.5, vy_max = 0.5;
  double wz_min = -1.0, wz_max = 1.0;
  double step = 0.1;
};

/// Open-loop MPC + gait + IK rollout for every command on the grid.
ReferenceDataset generate_dataset(const ScenarioConfig& config, const GridSpec& grid);

/// Run one scenario (trials handled by the caller); writes CSV when out_csv
/// is non-empty.
RunMetrics run_scenario(const ScenarioConfig& config, const std::string& out_csv = "");

/// Seeded initial-state jitter for trial k (deterministic per seed).
ScenarioConfig jittered(const ScenarioConfig& config, int trial);

/// Forward/lateral/backward push sweep: force grows from start_n by step_n
/// every hold_s seconds until the robot falls or force exceeds max_n.
struct PushSweepResult {
  double max_sustained = 0.0;  // N
  double rmse_vx = 0.0;
  bool capped = false;
};
PushSweepResult push_sweep(const ScenarioConfig& config, const Vec3& direction,
                           double start_n = 10.0, double step_n = 5.0, double hold_s = 5.0,
                           double max_n = 300.0);

struct PayloadPoint {
  double mass = 0.0;
  double success_rate = 0.0;
  double mean_calf_tau_ff = 0.0;
  double rmse_vx = 0.0;
};
std::vector<PayloadPoint> payload_sweep(const ScenarioConfig& config,
                                        const std::vector<double>& masses, int trials);

struct ComparisonRow {
  std::string condition;
  double ours = 0.0;
  double baseline = 0.0;
};

/// Matched ours vs tau_ff = 0 runs; metric selected by the scenario.
std::vector<ComparisonRow> compare_controllers(const ScenarioConfig& config);

/// Plot-ready series + a generated plotting script from run CSV logs.
void emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir);

/// Least-squares line fit returning {slope, intercept, r_squared}.
std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace quad
