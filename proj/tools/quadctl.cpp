// quadctl: scenario runner and dataset/plot utility.
//
// Exit codes: 0 success, 1 scenario failure (fall), 2 configuration error,
// 3 numerical error.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "quad/harness.hpp"
#include "quad/qp.hpp"

namespace fs = std::filesystem;
using namespace quad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFall = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

nlohmann::json metrics_json(const RunMetrics& m) {
  return {
      {"success", m.success},
      {"fall_time_s", m.fall_time},
      {"rmse_vx_mps", m.rmse_vx},
      {"rmse_vy_mps", m.rmse_vy},
      {"rmse_wz_radps", m.rmse_wz},
      {"rmse_combined_mps", m.rmse_combined},
      {"rmse_vx_est_mps", m.rmse_vx_est},
      {"lateral_drift_m", m.lateral_drift},
      {"mean_calf_tau_ff_nm", m.mean_calf_tau_ff},
      {"mean_gravity_proj_xy", m.mean_gravity_proj_xy},
      {"mean_reward", m.mean_reward},
      {"mean_solve_time_s", m.mean_solve_time},
      {"ticks", m.ticks},
  };
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            unsigned long seed, bool seed_set, int trials, bool trials_set,
            bool realtime) {
  ScenarioConfig config = ScenarioConfig::from_json_file(config_path);
  if (seed_set) config.seed = seed;
  if (trials_set) config.trials = trials;
  config.realtime = realtime;
  fs::create_directories(out_dir);

  nlohmann::json all = nlohmann::json::array();
  bool any_fall = false;
  const int n = std::max(1, trials_set ? config.trials : 1);
  for (int trial = 0; trial < n; ++trial) {
    const ScenarioConfig c = n > 1 ? jittered(config, trial) : config;
    const std::string csv = n > 1 ? fmt::format("{}/run_{}.csv", out_dir, trial)
                                  : out_dir + "/run.csv";
    const RunMetrics m = run_scenario(c, csv);
    if (!m.success) any_fall = true;
    auto j = metrics_json(m);
    j["trial"] = trial;
    j["csv"] = csv;
    all.push_back(j);
    std::cout << fmt::format(
        "trial {}: {} rmse_vx={:.4f} drift={:.4f} reward={:.3f}\n", trial,
        m.success ? "ok" : fmt::format("fall@{:.2f}s", m.fall_time), m.rmse_vx,
        m.lateral_drift, m.mean_reward);
  }
  std::ofstream(out_dir + "/metrics.json") << all.dump(2) << '\n';
  return any_fall ? kExitFall : kExitOk;
}

int cmd_gen_dataset(const std::string& config_path, const std::string& out_dir) {
  ScenarioConfig config = ScenarioConfig::from_json_file(config_path);
  fs::create_directories(out_dir);
  const ReferenceDataset ds = generate_dataset(config, GridSpec{});
  const std::string path = out_dir + "/reference.qds";
  ds.save(path);
  int infeasible = 0;
  for (const auto& e : ds.entries)
    if (!e.feasible) ++infeasible;
  std::cout << fmt::format("wrote {} ({} entries, {} infeasible)\n", path,
                           ds.entries.size(), infeasible);
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                unsigned long seed, bool seed_set) {
  ScenarioConfig config = ScenarioConfig::from_json_file(config_path);
  if (seed_set) config.seed = seed;
  fs::create_directories(out_dir);
  const auto rows = compare_controllers(config);
  std::ofstream out(out_dir + "/compare.csv");
  out << "condition,ours,baseline\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{}\n", r.condition, r.ours, r.baseline);
    std::cout << fmt::format("{:24s} ours={:10.4f} baseline={:10.4f}\n", r.condition,
                             r.ours, r.baseline);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadruped locomotion scenario runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  unsigned long seed = 0;
  int trials = 10;
  bool realtime = false;
  std::vector<std::string> csv_paths;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", config_path, "scenario JSON file");
    if (need_config) c->required();
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* run = app.add_subcommand("run", "run one scenario (closed loop)");
  add_common(run, true);
  auto* run_seed = run->add_option("--seed", seed, "jitter seed override");
  auto* run_trials = run->add_option("--trials", trials, "number of jittered trials");
  run->add_flag("--realtime", realtime,
                "pace the deterministic loop to wall-clock time");

  auto* gen = app.add_subcommand("gen-dataset", "generate the command-grid reference dataset");
  add_common(gen, true);

  auto* cmp = app.add_subcommand("compare", "matched run with and without force feedforward");
  add_common(cmp, true);
  auto* cmp_seed = cmp->add_option("--seed", seed, "jitter seed override");

  auto* plots = app.add_subcommand("plots", "emit plot data and a plotting script from run CSVs");
  plots->add_option("csv", csv_paths, "run CSV logs")->required();
  plots->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, out_dir, seed, !run_seed->empty(), trials,
                     !run_trials->empty(), realtime);
    if (gen->parsed()) return cmd_gen_dataset(config_path, out_dir);
    if (cmp->parsed()) return cmd_compare(config_path, out_dir, seed, !cmp_seed->empty());
    if (plots->parsed()) {
      emit_plots(csv_paths, out_dir);
      std::cout << "wrote plot data to " << out_dir << '\n';
      return kExitOk;
    }
  } catch (const SimulationBlowupError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonconvexProblemError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
