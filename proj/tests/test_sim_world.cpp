#include <random>

#include "doctest.h"
#include "st2/sim_world.hpp"
#include "support.hpp"

using namespace st2;
using namespace st2::testing;

namespace {

ArmModel unit_arm() {
  ArmModel a;
  a.link_lengths = {1, 1, 1};
  a.base = {0, 0};
  return a;
}

Eigen::Vector3d random_joints(std::mt19937_64& rng, const ArmModel& arm) {
  Eigen::Vector3d q;
  for (int k = 0; k < 3; ++k) {
    std::uniform_real_distribution<double> u(arm.joint_limits[k][0] + 1e-3, arm.joint_limits[k][1] - 1e-3);
    q[k] = u(rng);
  }
  return q;
}

}  // namespace

TEST_CASE("forward_kinematics examples") {
  const EndEffectorPose a = forward_kinematics(Eigen::Vector3d::Zero(), unit_arm());
  CHECK(a.x == doctest::Approx(3.0));
  CHECK(a.z == doctest::Approx(0.0));
  CHECK(a.theta == doctest::Approx(0.0));
  const EndEffectorPose b = forward_kinematics(Eigen::Vector3d(kPi / 2, 0, 0), unit_arm());
  CHECK(b.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.z == doctest::Approx(3.0));
  CHECK(b.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("inverse_kinematics round trip") {
  const ArmModel arm;
  std::mt19937_64 rng(21);
  for (int k = 0; k < 2000; ++k) {
    const Eigen::Vector3d q = random_joints(rng, arm);
    const EndEffectorPose p = forward_kinematics(q, arm);
    Eigen::Vector3d sol;
    try {
      sol = inverse_kinematics_any(p, arm);
    } catch (const KinematicsError&) {
      FAIL("in-limit configuration rejected");
    }
    const EndEffectorPose r = forward_kinematics(sol, arm);
    CHECK(std::hypot(r.x - p.x, r.z - p.z) < 1e-9);
    CHECK(std::abs(angle_diff(r.theta, p.theta)) < 1e-9);
  }
}

TEST_CASE("inverse_kinematics errors") {
  const ArmModel arm;
  const EndEffectorPose far(arm.base.x() + arm.reach() + 0.1, arm.base.y(), 0.0);
  try {
    inverse_kinematics_any(far, arm);
    FAIL("expected an error");
  } catch (const KinematicsError& e) {
    CHECK(e.kind() == KinematicsError::Kind::Unreachable);
  }

  ArmModel tight = arm;
  tight.joint_limits[2] = {-0.05, 0.05};
  try {
    inverse_kinematics_any({0.65, 0.40, -kPi / 2}, tight);
    FAIL("expected an error");
  } catch (const KinematicsError& e) {
    CHECK(e.kind() == KinematicsError::Kind::JointLimit);
  }
}

TEST_CASE("step at rest with no force changes only the tick") {
  SceneLayout layout;
  ControllerGains g;
  const SceneState s = initial_scene(layout);
  const SceneState n = step(s, ControlCommand{}, Eigen::Vector3d::Zero(), 0.05, layout, g);
  SceneState expect = s;
  expect.tick = s.tick + 1;
  CHECK(n == expect);
}

TEST_CASE("constant force from rest") {
  SceneLayout layout;
  ControllerGains g;
  SceneState s = initial_scene(layout);
  const ControlCommand c{Eigen::Vector3d(1.0, -0.5, 0.01)};
  const int n = 5;
  const double dt = 0.05;
  for (int k = 0; k < n; ++k) s = step(s, c, Eigen::Vector3d::Zero(), dt, layout, g);
  CHECK(std::abs(s.ee_velocity.x() - 1.0 * n * dt / layout.inertia.x()) < 1e-6);
  CHECK(std::abs(s.ee_velocity.y() + 0.5 * n * dt / layout.inertia.y()) < 1e-6);
  CHECK(std::abs(s.ee_velocity.z() - 0.01 * n * dt / layout.inertia.z()) < 1e-6);
  CHECK(s.tick == n);
}

TEST_CASE("velocity caps") {
  SceneLayout layout;
  ControllerGains g;
  SceneState s = initial_scene(layout);
  for (int k = 0; k < 20; ++k) s = step(s, {Eigen::Vector3d(40, -40, 40)}, Eigen::Vector3d::Zero(), 0.05, layout, g);
  CHECK(s.ee_velocity.x() == g.v_max);
  CHECK(s.ee_velocity.y() == -g.v_max);
  CHECK(s.ee_velocity.z() == g.w_max);
}

TEST_CASE("step is deterministic") {
  SceneLayout layout;
  ControllerGains g;
  auto run = [&] {
    SceneState s = initial_scene(layout);
    std::vector<SceneState> out;
    for (int k = 0; k < 50; ++k) {
      s = step(s, {Eigen::Vector3d(std::sin(k), std::cos(k), 0.1)}, Eigen::Vector3d(0.3, 0, 0), 0.05, layout, g);
      out.push_back(s);
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("grasping") {
  SceneLayout layout;
  const double dt = 0.05;
  const SceneState start = initial_scene(layout);

  SUBCASE("top grasp in the box") {
    SceneState s = drag_step(start, grasp_target(layout.carton_start, GraspKind::Top, layout), dt, layout);
    s.ee_velocity.setZero();
    s = apply_grip(s, GripState::Closed, layout);
    CHECK(s.carton.status == CartonStatus::Held);
    CHECK(s.grasp == GraspKind::Top);
  }
  SUBCASE("side grasp in the box fails") {
    SceneState s = drag_step(start, grasp_target(layout.carton_start, GraspKind::Side, layout), dt, layout);
    s.ee_velocity.setZero();
    s = apply_grip(s, GripState::Closed, layout);
    CHECK(s.carton.status == CartonStatus::InBox);
    CHECK(s.grip == GripState::Closed);
  }
  SUBCASE("too far away") {
    SceneState s = drag_step(start, {0.85, 0.45, -kPi / 2}, dt, layout);
    s.ee_velocity.setZero();
    s = apply_grip(s, GripState::Closed, layout);
    CHECK(s.carton.status == CartonStatus::InBox);
  }
  SUBCASE("side grasp on the table") {
    SceneState s = start;
    s.carton = {0.70, layout.carton_height / 2, 0.0, CartonStatus::OnTable};
    s = drag_step(s, grasp_target(s.carton, GraspKind::Side, layout), dt, layout);
    s.ee_velocity.setZero();
    s = apply_grip(s, GripState::Closed, layout);
    CHECK(s.grasp == GraspKind::Side);
  }
}

TEST_CASE("held carton stays rigid") {
  SceneLayout layout;
  ControllerGains g;
  SceneState s = drag_step(initial_scene(layout), grasp_target(layout.carton_start, GraspKind::Top, layout), 0.05, layout);
  s.ee_velocity.setZero();
  s = apply_grip(s, GripState::Closed, layout);
  auto relative = [](const SceneState& x) {
    const double c = std::cos(x.ee.theta), sn = std::sin(x.ee.theta);
    const double dx = x.carton.x - x.ee.x, dz = x.carton.z - x.ee.z;
    return Eigen::Vector3d(c * dx + sn * dz, -sn * dx + c * dz, normalize_angle(x.carton.tilt - x.ee.theta));
  };
  const Eigen::Vector3d r0 = relative(s);
  for (int k = 0; k < 40; ++k) {
    s = step(s, {Eigen::Vector3d(0.5, 2.0, 0.05 * std::sin(0.3 * k))}, Eigen::Vector3d::Zero(), 0.05, layout, g);
    CHECK((relative(s) - r0).norm() < 1e-12);
  }
}

TEST_CASE("release settles or topples") {
  SceneLayout layout;
  SceneState s = initial_scene(layout);
  s.carton = {0.70, layout.carton_height / 2, 0.0, CartonStatus::OnTable};
  s = drag_step(s, grasp_target(s.carton, GraspKind::Top, layout), 0.05, layout);
  s.ee_velocity.setZero();
  s = apply_grip(s, GripState::Closed, layout);
  REQUIRE(s.carton.status == CartonStatus::Held);

  SceneState lifted = drag_step(s, {0.70, s.ee.z + 0.02, s.ee.theta}, 0.05, layout);
  lifted.ee_velocity.setZero();
  const SceneState placed = apply_grip(lifted, GripState::Open, layout);
  CHECK(placed.carton.status == CartonStatus::OnTable);
  CHECK(placed.carton.z == doctest::Approx(layout.carton_height / 2));

  SceneState high = drag_step(s, {0.70, s.ee.z + 0.2, s.ee.theta}, 0.05, layout);
  high.ee_velocity.setZero();
  CHECK(apply_grip(high, GripState::Open, layout).carton.status == CartonStatus::Fallen);
}

TEST_CASE("evaluate_success") {
  SceneLayout layout;
  SceneState s = initial_scene(layout);
  const Rect vol = layout.shelf_volume();
  s.ee = {layout.shelf_plate.xmin - 0.16, 0.40, 0.0};
  s.carton = {(vol.xmin + vol.xmax) / 2, layout.shelf_plate.zmax + layout.carton_height / 2, 0.0, CartonStatus::OnShelf};
  CHECK(evaluate_success(s, layout).success);

  SceneState tilted = s;
  tilted.carton.tilt = 20 * kPi / 180;
  CHECK_FALSE(evaluate_success(tilted, layout).success);

  SceneState on_table = s;
  on_table.carton = {0.7, layout.carton_height / 2, 0.0, CartonStatus::OnTable};
  CHECK_FALSE(evaluate_success(on_table, layout).success);

  SceneState inside = s;
  inside.ee = {vol.xmin + 0.05, 0.40, 0.0};
  CHECK_FALSE(evaluate_success(inside, layout).success);

  SceneState closed = s;
  closed.grip = GripState::Closed;
  CHECK_FALSE(evaluate_success(closed, layout).success);
}

TEST_CASE("detector scenarios raise one flag each") {
  for (auto code : kAllErrorCodes) {
    CAPTURE(to_string(code));
    CHECK(flags(detector_scenario(code)) == std::set<ErrorCode>{code});
  }
}

TEST_CASE("detector negatives") {
  SceneLayout layout;
  SceneState s = drag_step(initial_scene(layout), {0.65, 0.40, -kPi / 2}, 0.05, layout);
  s.ee_velocity.setZero();
  CHECK(apply_grip(s, GripState::Closed, layout).report.first_tick.empty());

  // 1 cm from the shelf plate's left edge
  SceneState near = drag_step(initial_scene(layout), {layout.shelf_plate.xmin - 0.01, 0.29, 0.0}, 0.05, layout);
  CHECK(near.report.has(ErrorCode::ET03));
}

TEST_CASE("flags are monotone") {
  SceneLayout layout;
  SceneState s = drag_step(initial_scene(layout), {0.65, 0.01, -kPi / 2}, 0.05, layout);
  REQUIRE(s.report.has(ErrorCode::ET03));
  const long first = s.report.first_tick.at(ErrorCode::ET03);
  for (int k = 0; k < 5; ++k) s = drag_step(s, {0.65, 0.40, -kPi / 2}, 0.05, layout);
  CHECK(s.report.first_tick.at(ErrorCode::ET03) == first);
}

TEST_CASE("mechanical energy does not grow") {
  SceneLayout layout;
  ControllerGains g;
  const EndEffectorPose attractor(0.40, 0.40, -kPi / 2 + 0.1);
  const ImpedanceState imp = active_impedance(0.2, g);
  SceneState s = initial_scene(layout);
  s.ee_velocity = Eigen::Vector3d(0.05, -0.05, 0.2);
  double prev = mechanical_energy(s, attractor, imp.K, layout);
  const ControlLaw law = [&](const SceneState& x) { return control_step(x.ee, x.ee_velocity, attractor, imp.K, imp.D, g); };
  for (int k = 0; k < 100; ++k) {
    s = step(s, law, Eigen::Vector3d::Zero(), 0.05, layout, g);
    const double e = mechanical_energy(s, attractor, imp.K, layout);
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
}

TEST_CASE("string conversions") {
  for (auto code : kAllErrorCodes) CHECK(error_code_from_string(to_string(code)) == code);
  for (auto st : {CartonStatus::InBox, CartonStatus::Held, CartonStatus::OnTable, CartonStatus::OnShelf, CartonStatus::Fallen})
    CHECK(carton_status_from_string(to_string(st)) == st);
  CHECK_THROWS(error_code_from_string("ET99"));
}
