#include "quad/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace quad {

namespace {

double wrap01(double x) {
  double w = std::fmod(x, 1.0);
  return w < 0.0 ? w + 1.0 : w;
}

}  // namespace

std::array<LegPhase, 4> contact_state(const GaitParams& g, double t) {
  if (!(g.cycle_time > 0.0)) throw std::invalid_argument("GaitParams: cycle_time must be > 0");
  std::array<LegPhase, 4> out;
  const double cycle_phase = t / g.cycle_time;
  for (int k = 0; k < 4; ++k) {
    LegPhase& lp = out[k];
    lp.phase = wrap01(cycle_phase + g.phase_offsets[k]);
    lp.stance = lp.phase < g.duty_factor;
    if (lp.stance) {
      lp.phase_fraction = lp.phase / g.duty_factor;
      lp.phase_left_time = (g.duty_factor - lp.phase) * g.cycle_time;
    } else {
      lp.phase_fraction = (lp.phase - g.duty_factor) / (1.0 - g.duty_factor);
      lp.phase_left_time = (1.0 - lp.phase) * g.cycle_time;
    }
  }
  return out;
}

ContactSchedule contact_schedule(const GaitParams& g, double t, int horizon, double dt) {
  if (horizon < 1) throw std::invalid_argument("contact_schedule: horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("contact_schedule: dt must be > 0");
  ContactSchedule s;
  s.horizon = horizon;
  s.dt = dt;
  s.stance.resize(horizon);
  const auto now = contact_state(g, t);
  for (int k = 0; k < 4; ++k) {
    s.phase_fraction[k] = now[k].phase_fraction;
    s.phase_left_time[k] = now[k].phase_left_time;
  }
  for (int i = 0; i < horizon; ++i) {
    const auto st = contact_state(g, t + i * dt);
    for (int k = 0; k < 4; ++k) s.stance[i][k] = st[k].stance;
  }
  return s;
}

Eigen::Vector3d raibert_foothold(const Eigen::Vector3d& hip_world,
                                 const Eigen::Vector3d& velocity,
                                 const Eigen::Vector3d& velocity_cmd,
                                 double stance_duration, double k_gain,
                                 const Terrain& terrain) {
  Eigen::Vector3d p = hip_world;
  p.head<2>() += 0.5 * stance_duration * velocity.head<2>() +
                 k_gain * (velocity.head<2>() - velocity_cmd.head<2>());
  p.z() = terrain.height(p.x(), p.y());
  return p;
}

// xy: cubic Hermite with zero endpoint slopes. z: two cubic segments meeting
// at the apex with zero slope, so the peak height is exact at phase 0.5.
SwingPoint swing_trajectory(const Eigen::Vector3d& p_liftoff,
                            const Eigen::Vector3d& p_target, double apex,
                            double phase, double swing_duration) {
  phase = std::min(1.0, std::max(0.0, phase));
  const double s = phase;
  const double h = s * s * (3.0 - 2.0 * s);         // smoothstep
  const double dh = 6.0 * s * (1.0 - s);            // d(h)/d(phase)

  SwingPoint out;
  out.position.head<2>() =
      p_liftoff.head<2>() + h * (p_target.head<2>() - p_liftoff.head<2>());
  out.velocity.head<2>() = dh * (p_target.head<2>() - p_liftoff.head<2>());

  const double z_apex = std::max(p_liftoff.z(), p_target.z()) + apex;
  double z, dz;
  if (s < 0.5) {
    const double u = s / 0.5;
    const double hu = u * u * (3.0 - 2.0 * u);
    z = p_liftoff.z() + hu * (z_apex - p_liftoff.z());
    dz = (6.0 * u * (1.0 - u) / 0.5) * (z_apex - p_liftoff.z());
  } else {
    const double u = (s - 0.5) / 0.5;
    const double hu = u * u * (3.0 - 2.0 * u);
    z = z_apex + hu * (p_target.z() - z_apex);
    dz = (6.0 * u * (1.0 - u) / 0.5) * (p_target.z() - z_apex);
  }
  out.position.z() = z;
  out.velocity.z() = dz;
  out.velocity /= (swing_duration > 0.0 ? swing_duration : 1.0);
  return out;
}

}  // namespace quad
