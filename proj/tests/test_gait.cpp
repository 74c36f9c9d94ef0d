#include <doctest.h>

#include "quad/gait.hpp"

using namespace quad;

TEST_CASE("stance time fraction integrates to the duty factor") {
  GaitParams g;
  g.duty_factor = 0.5;
  const int n = 40000;
  for (int k = 0; k < 4; ++k) {
    long stance_ticks = 0;
    for (int i = 0; i < n; ++i) {
      const double t = g.cycle_time * static_cast<double>(i) / n;
      if (contact_state(g, t)[k].stance) ++stance_ticks;
    }
    CHECK(static_cast<double>(stance_ticks) / n == doctest::Approx(g.duty_factor).epsilon(1e-3));
  }
  g.duty_factor = 0.65;
  long stance_ticks = 0;
  for (int i = 0; i < n; ++i)
    if (contact_state(g, g.cycle_time * static_cast<double>(i) / n)[0].stance) ++stance_ticks;
  CHECK(static_cast<double>(stance_ticks) / n == doctest::Approx(0.65).epsilon(1e-3));
}

TEST_CASE("trot pairs are synchronized and complementary") {
  GaitParams g;  // trot offsets, duty 0.5
  for (int i = 0; i < 997; ++i) {
    const double t = 0.013 * i;
    const auto s = contact_state(g, t);
    CHECK(s[0].stance == s[3].stance);  // FL with RR
    CHECK(s[1].stance == s[2].stance);  // FR with RL
    CHECK(s[0].stance != s[1].stance);  // diagonals alternate at duty 0.5
  }
}

TEST_CASE("contact state is periodic in the cycle time") {
  GaitParams g;
  for (int i = 0; i < 100; ++i) {
    const double t = 0.0137 * i;
    const auto a = contact_state(g, t);
    const auto b = contact_state(g, t + 5.0 * g.cycle_time);
    for (int k = 0; k < 4; ++k) {
      CHECK(a[k].stance == b[k].stance);
      CHECK(a[k].phase == doctest::Approx(b[k].phase).epsilon(1e-9));
    }
  }
}

TEST_CASE("phase_left_time predicts the next transition") {
  GaitParams g;
  for (int i = 0; i < 200; ++i) {
    const double t = 0.00731 * i + 0.001;
    const auto s = contact_state(g, t);
    for (int k = 0; k < 4; ++k) {
      const auto before = contact_state(g, t + s[k].phase_left_time - 1e-6);
      const auto after = contact_state(g, t + s[k].phase_left_time + 1e-6);
      CHECK(before[k].stance == s[k].stance);
      CHECK(after[k].stance != s[k].stance);
    }
  }
}

TEST_CASE("contact schedule rows sample the instantaneous state") {
  GaitParams g;
  const auto sched = contact_schedule(g, 0.123, 10, 0.02);
  REQUIRE(sched.stance.size() == 10);
  for (int i = 0; i < 10; ++i) {
    const auto s = contact_state(g, 0.123 + i * 0.02);
    for (int k = 0; k < 4; ++k) CHECK(sched.stance[i][k] == s[k].stance);
  }
  CHECK_THROWS_AS(contact_schedule(g, 0.0, 0, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(contact_schedule(g, 0.0, 10, 0.0), std::invalid_argument);
}

TEST_CASE("raibert foothold closed form on flat ground") {
  const Terrain flat = Terrain::flat();
  const Eigen::Vector3d hip(0.2, 0.1, 0.3);
  const Eigen::Vector3d v(0.6, -0.1, 0.0);
  const Eigen::Vector3d v_cmd(0.5, 0.0, 0.0);
  const double ts = 0.2, k = 0.03;
  const Eigen::Vector3d p = raibert_foothold(hip, v, v_cmd, ts, k, flat);
  CHECK(p.x() == doctest::Approx(hip.x() + 0.5 * ts * v.x() + k * (v.x() - v_cmd.x())));
  CHECK(p.y() == doctest::Approx(hip.y() + 0.5 * ts * v.y() + k * (v.y() - v_cmd.y())));
  CHECK(p.z() == 0.0);
}

TEST_CASE("raibert foothold snaps to sloped terrain") {
  const Terrain slope = Terrain::slope(10.0, 0);
  const Eigen::Vector3d p = raibert_foothold({1.0, 0.0, 0.5}, {0, 0, 0}, {0, 0, 0}, 0.2,
                                             0.03, slope);
  CHECK(p.z() == doctest::Approx(std::tan(10.0 * M_PI / 180.0) * p.x()));
}

TEST_CASE("swing trajectory endpoints, apex, and endpoint velocities") {
  const Eigen::Vector3d a(0.0, 0.0, 0.0), b(0.2, 0.05, 0.03);
  const double apex = 0.08;
  const auto p0 = swing_trajectory(a, b, apex, 0.0);
  const auto p1 = swing_trajectory(a, b, apex, 1.0);
  CHECK((p0.position - a).norm() < 1e-12);
  CHECK((p1.position - b).norm() < 1e-12);
  CHECK(p0.velocity.norm() < 1e-12);
  CHECK(p1.velocity.norm() < 1e-12);
  const auto mid = swing_trajectory(a, b, apex, 0.5);
  CHECK(mid.position.z() == doctest::Approx(std::max(a.z(), b.z()) + apex));
  // apex is the max over the whole phase
  double zmax = -1.0;
  for (int i = 0; i <= 100; ++i)
    zmax = std::max(zmax, swing_trajectory(a, b, apex, i / 100.0).position.z());
  CHECK(zmax == doctest::Approx(mid.position.z()));
}

TEST_CASE("swing velocity is consistent with finite differences") {
  const Eigen::Vector3d a(0.0, 0.0, 0.0), b(0.15, -0.02, 0.0);
  const double dur = 0.2, h = 1e-6;
  for (int i = 1; i < 10; ++i) {
    const double s = i / 10.0;
    const auto mid = swing_trajectory(a, b, 0.08, s, dur);
    const auto pp = swing_trajectory(a, b, 0.08, s + h, dur);
    const auto pm = swing_trajectory(a, b, 0.08, s - h, dur);
    const Eigen::Vector3d fd = (pp.position - pm.position) / (2.0 * h * dur);
    CHECK((mid.velocity - fd).norm() < 1e-5);
  }
}
