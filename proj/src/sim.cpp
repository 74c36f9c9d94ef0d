#include "quad/sim.hpp"

#include <cmath>

namespace quad {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Vec3 terrain_normal(const Terrain& terrain, double x, double y) {
  const double h = 1e-4;
  const double dzdx = (terrain.height(x + h, y) - terrain.height(x - h, y)) / (2 * h);
  const double dzdy = (terrain.height(x, y + h) - terrain.height(x, y - h)) / (2 * h);
  return Vec3(-dzdx, -dzdy, 1.0).normalized();
}

}  // namespace

Vec3 Simulator::foot_position_world(const WorldState& world, int leg) const {
  return world.position + world.orientation * foot_position_body(world, leg);
}

void Simulator::step(WorldState& world, const Vec12& joint_torques, const Terrain& terrain,
                     double dt) const {
  if (!(dt > 0.0 && dt <= 5e-3))
    throw std::invalid_argument("Simulator::step: dt must be in (0, 5e-3]");
  if (!joint_torques.allFinite())
    throw SimulationBlowupError("Simulator::step: non-finite torques", world.tick);

  const Mat3 r_wb = world.orientation.toRotationMatrix();
  const double total_m = model_.mass + world.payload.mass;

  // combined CoM, treating the base CoM as the base origin
  const Vec3 com_body = world.payload.mass / total_m * world.payload.offset;
  const Vec3 com_world = world.position + r_wb * com_body;
  Vec3 v_com = world.linear_velocity + world.angular_velocity.cross(r_wb * com_body);

  // inertia about the combined CoM (parallel axis for base and payload)
  const Vec3 d_base = -com_body;
  const Vec3 d_pay = world.payload.offset - com_body;
  Mat3 inertia_body = model_.inertia_diag.asDiagonal();
  inertia_body += model_.mass * (skew(d_base).transpose() * skew(d_base));
  inertia_body += world.payload.mass * (skew(d_pay).transpose() * skew(d_pay));
  const Mat3 inertia_world = r_wb * inertia_body * r_wb.transpose();

  Vec3 force = Vec3(0.0, 0.0, -total_m * kGravity);
  Vec3 torque = Vec3::Zero();
  if (world.push.remaining > 0.0) {
    force += world.push.force;
    world.push.remaining = std::max(0.0, world.push.remaining - dt);
  }

  Vec12 tau_contact = Vec12::Zero();
  for (int k = 0; k < 4; ++k) {
    const Vec3 q_leg = world.q.segment<3>(3 * k);
    const Vec3 qd_leg = world.qd.segment<3>(3 * k);
    const Vec3 p_body = forward_kinematics(model_, k, q_leg);
    const Mat3 jac = leg_jacobian(model_, k, q_leg);
    const Vec3 p_foot = world.position + r_wb * p_body;
    const Vec3 v_foot = world.linear_velocity +
                        world.angular_velocity.cross(r_wb * p_body) +
                        r_wb * (jac * qd_leg);

    const double ground = terrain.height(p_foot.x(), p_foot.y());
    const Vec3 normal = terrain_normal(terrain, p_foot.x(), p_foot.y());
    const double penetration = (ground - p_foot.z()) * normal.z();

    Vec3 f_world = Vec3::Zero();
    if (penetration > 0.0) {
      const double pen_rate = -v_foot.dot(normal);
      double fn = params_.contact_stiffness * penetration +
                  params_.contact_damping * pen_rate;
      fn = std::max(0.0, fn);

      if (!world.foot_contact[k]) world.contact_anchor[k] = p_foot;
      // stick-slip: anchored spring-damper in the tangent plane, Coulomb cap
      Vec3 offset = p_foot - world.contact_anchor[k];
      offset -= normal * normal.dot(offset);
      Vec3 v_t = v_foot - normal * normal.dot(v_foot);
      Vec3 ft = -params_.tangential_stiffness * offset - params_.tangential_damping * v_t;
      const double cap = params_.friction_mu * fn;
      if (ft.norm() > cap && ft.norm() > 1e-12) {
        ft *= cap / ft.norm();
        // slide the anchor so the spring alone reproduces the capped force
        world.contact_anchor[k] =
            p_foot + (ft + params_.tangential_damping * v_t) / params_.tangential_stiffness;
        world.contact_anchor[k].z() =
            terrain.height(world.contact_anchor[k].x(), world.contact_anchor[k].y());
      }
      f_world = fn * normal + ft;
      world.foot_contact[k] = true;
    } else {
      world.foot_contact[k] = false;
    }
    world.contact_force[k] = f_world;

    force += f_world;
    torque += (p_foot - com_world).cross(f_world);
    tau_contact.segment<3>(3 * k) = jac.transpose() * (r_wb.transpose() * f_world);
  }

  // base, about the combined CoM
  last_accel_ = force / total_m;
  v_com += last_accel_ * dt;
  const Vec3 omega_dot = inertia_world.ldlt().solve(
      torque - world.angular_velocity.cross(inertia_world * world.angular_velocity));
  world.angular_velocity += omega_dot * dt;

  Eigen::Quaterniond q = world.orientation;
  const Vec3 rot = world.angular_velocity * dt;
  const double angle = rot.norm();
  if (angle > 1e-12) q = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle)) * q;
  q.normalize();
  world.orientation = q;

  const Vec3 com_next = com_world + v_com * dt;
  const Mat3 r_next = q.toRotationMatrix();
  world.position = com_next - r_next * com_body;
  world.linear_velocity = v_com - world.angular_velocity.cross(r_next * com_body);

  // massless legs with small virtual inertia
  const Vec12 tau = joint_torques.cwiseMax(-model_.torque_limit).cwiseMin(model_.torque_limit);
  const Vec12 qdd =
      (tau + tau_contact - params_.joint_damping * world.qd) / params_.joint_inertia;
  world.qd += qdd * dt;
  world.q += world.qd * dt;

  world.time += dt;
  world.tick += 1;

  if (!world.position.allFinite() || !world.q.allFinite() ||
      !world.linear_velocity.allFinite() || !world.qd.allFinite())
    throw SimulationBlowupError("Simulator::step: state diverged", world.tick);
}

double Simulator::mechanical_energy(const WorldState& world, const Terrain& terrain) const {
  const Mat3 r_wb = world.orientation.toRotationMatrix();
  const double total_m = model_.mass + world.payload.mass;
  const Vec3 com_body = world.payload.mass / total_m * world.payload.offset;
  const Vec3 com_world = world.position + r_wb * com_body;
  const Vec3 v_com = world.linear_velocity + world.angular_velocity.cross(r_wb * com_body);

  const Vec3 d_base = -com_body;
  const Vec3 d_pay = world.payload.offset - com_body;
  Mat3 inertia_body = model_.inertia_diag.asDiagonal();
  inertia_body += model_.mass * (skew(d_base).transpose() * skew(d_base));
  inertia_body += world.payload.mass * (skew(d_pay).transpose() * skew(d_pay));
  const Mat3 inertia_world = r_wb * inertia_body * r_wb.transpose();

  double e = 0.5 * total_m * v_com.squaredNorm() +
             0.5 * world.angular_velocity.dot(inertia_world * world.angular_velocity) +
             total_m * kGravity * com_world.z();
  for (int k = 0; k < 4; ++k) {
    e += 0.5 * params_.joint_inertia * world.qd.segment<3>(3 * k).squaredNorm();
    const Vec3 p_foot = world.position + r_wb * foot_position_body(world, k);
    const double pen = terrain.height(p_foot.x(), p_foot.y()) - p_foot.z();
    if (pen > 0.0) {
      e += 0.5 * params_.contact_stiffness * pen * pen;
      if (world.foot_contact[k]) {
        Vec3 off = p_foot - world.contact_anchor[k];
        off.z() = 0.0;
        e += 0.5 * params_.tangential_stiffness * off.squaredNorm();
      }
    }
  }
  return e;
}

void apply_push(WorldState& world, const Vec3& force, double duration) {
  if (!(duration > 0.0)) throw std::invalid_argument("apply_push: duration must be > 0");
  // simultaneous pushes superpose; the longer duration wins the clock
  if (world.push.remaining > 0.0) {
    world.push.force += force;
    world.push.remaining = std::max(world.push.remaining, duration);
  } else {
    world.push.force = force;
    world.push.remaining = duration;
  }
}

void set_payload(WorldState& world, double mass, const Vec3& offset) {
  if (mass < 0.0) throw std::invalid_argument("set_payload: mass must be >= 0");
  world.payload.mass = mass;
  world.payload.offset = offset;
}

Vec3 quat_to_ypr(const Eigen::Quaterniond& q) {
  const Mat3 r = q.toRotationMatrix();
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double pitch = std::asin(std::min(1.0, std::max(-1.0, -r(2, 0))));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return Vec3(yaw, pitch, roll);
}

bool fall_detected(const WorldState& world, const Terrain& terrain) {
  const Vec3 ypr = quat_to_ypr(world.orientation);
  if (std::abs(ypr[2]) > 0.6 || std::abs(ypr[1]) > 0.6) return true;
  const double ground = terrain.height(world.position.x(), world.position.y());
  return world.position.z() - ground < 0.12;
}

}  // namespace quad
