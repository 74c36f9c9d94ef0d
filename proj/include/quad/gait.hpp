#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "quad/terrain.hpp"

namespace quad {

using Vec3g = Eigen::Vector3d;

struct GaitParams {
  double cycle_time = 0.4;                       // s
  double duty_factor = 0.5;                      // stance fraction of the cycle
  std::array<double, 4> phase_offsets{0.0, 0.5, 0.5, 0.0};  // FL, FR, RL, RR
  double apex_height = 0.08;                     // m, swing apex above ground
};

struct LegPhase {
  bool stance = false;
  double phase = 0.0;        // wrapped leg phase in [0,1)
  double phase_fraction = 0.0;  // progress through the current stance/swing phase
  double phase_left_time = 0.0; // s until the current phase ends
};

struct ContactSchedule {
  int horizon = 0;
  double dt = 0.0;
  std::vector<std::array<bool, 4>> stance;  // horizon rows
  std::array<double, 4> phase_fraction{};
  std::array<double, 4> phase_left_time{};
};

/// Instantaneous stance flags and phase bookkeeping for all four legs.
std::array<LegPhase, 4> contact_state(const GaitParams& g, double t);

/// Horizon of stance flags at steps t, t+dt, ..., t+(N-1)dt.
ContactSchedule contact_schedule(const GaitParams& g, double t, int horizon, double dt);

/// Raibert foothold: ground projection of the hip plus a half-stance velocity
/// lead and a velocity-error feedback offset; z snapped to the terrain.
Eigen::Vector3d raibert_foothold(const Eigen::Vector3d& hip_world,
                                 const Eigen::Vector3d& velocity,
                                 const Eigen::Vector3d& velocity_cmd,
                                 double stance_duration, double k_gain,
                                 const Terrain& terrain);

struct SwingPoint {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;  // d(position)/d(phase) scaled by 1/swing_duration if given
};

/// C1 swing trajectory from liftoff to target with an apex above the higher
/// endpoint at phase 0.5. Endpoint velocities are zero. swing_duration scales
/// the returned velocity to physical units (pass 1.0 for per-unit-phase).
SwingPoint swing_trajectory(const Eigen::Vector3d& p_liftoff,
                            const Eigen::Vector3d& p_target, double apex,
                            double phase, double swing_duration = 1.0);

}  // namespace quad
