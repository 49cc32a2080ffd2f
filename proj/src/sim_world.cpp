#include "st2/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace st2 {

double clearance(const Rect& a, const Rect& b) {
  const double dx = std::max({0.0, b.xmin - a.xmax, a.xmin - b.xmax});
  const double dz = std::max({0.0, b.zmin - a.zmax, a.zmin - b.zmax});
  return std::hypot(dx, dz);
}

EndEffectorPose forward_kinematics(const Eigen::Vector3d& joints, const ArmModel& arm) {
  double x = arm.base.x();
  double z = arm.base.y();
  double phi = 0.0;
  for (int k = 0; k < 3; ++k) {
    phi += joints[k];
    x += arm.link_lengths[k] * std::cos(phi);
    z += arm.link_lengths[k] * std::sin(phi);
  }
  return {x, z, phi};
}

namespace {

std::optional<Eigen::Vector3d> solve_3r(const EndEffectorPose& target, const ArmModel& arm, IkBranch branch) {
  const double l1 = arm.link_lengths[0], l2 = arm.link_lengths[1], l3 = arm.link_lengths[2];
  const double wx = target.x - l3 * std::cos(target.theta) - arm.base.x();
  const double wz = target.z - l3 * std::sin(target.theta) - arm.base.y();
  const double c2 = (wx * wx + wz * wz - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (!(c2 >= -1.0 - 1e-12 && c2 <= 1.0 + 1e-12)) return std::nullopt;
  const double mag = std::acos(std::clamp(c2, -1.0, 1.0));
  const double q2 = branch == IkBranch::ElbowUp ? -mag : mag;
  const double q1 = normalize_angle(std::atan2(wz, wx) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2)));
  const double q3 = normalize_angle(target.theta - q1 - q2);
  return Eigen::Vector3d(q1, q2, q3);
}

bool within_limits(const Eigen::Vector3d& q, const ArmModel& arm) {
  for (int k = 0; k < 3; ++k)
    if (q[k] < arm.joint_limits[k][0] || q[k] > arm.joint_limits[k][1]) return false;
  return true;
}

bool at_limit(const Eigen::Vector3d& q, const ArmModel& arm, double margin) {
  for (int k = 0; k < 3; ++k)
    if (q[k] <= arm.joint_limits[k][0] + margin || q[k] >= arm.joint_limits[k][1] - margin) return true;
  return false;
}

}  // namespace

Eigen::Vector3d inverse_kinematics(const EndEffectorPose& target, const ArmModel& arm, IkBranch branch) {
  auto q = solve_3r(target, arm, branch);
  if (!q) throw KinematicsError(KinematicsError::Kind::Unreachable, "target outside the reachable workspace");
  if (!within_limits(*q, arm)) throw KinematicsError(KinematicsError::Kind::JointLimit, "IK solution violates joint limits");
  return *q;
}

Eigen::Vector3d inverse_kinematics_any(const EndEffectorPose& target, const ArmModel& arm, IkBranch preferred) {
  const IkBranch other = preferred == IkBranch::ElbowUp ? IkBranch::ElbowDown : IkBranch::ElbowUp;
  auto a = solve_3r(target, arm, preferred);
  if (!a) throw KinematicsError(KinematicsError::Kind::Unreachable, "target outside the reachable workspace");
  if (within_limits(*a, arm)) return *a;
  auto b = solve_3r(target, arm, other);
  if (b && within_limits(*b, arm)) return *b;
  throw KinematicsError(KinematicsError::Kind::JointLimit, "both IK branches violate joint limits");
}

std::string to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ET03: return "ET03";
    case ErrorCode::ET04: return "ET04";
    case ErrorCode::ET05: return "ET05";
    case ErrorCode::ET07: return "ET07";
    case ErrorCode::EP01: return "EP01";
    case ErrorCode::EP02: return "EP02";
  }
  return "?";
}

ErrorCode error_code_from_string(const std::string& s) {
  for (auto c : kAllErrorCodes)
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown error code: " + s);
}

void DetectorReport::merge(const DetectorReport& other) {
  for (const auto& [code, tick] : other.first_tick) raise(code, tick);
}

std::string to_string(CartonStatus s) {
  switch (s) {
    case CartonStatus::InBox: return "in_box";
    case CartonStatus::Held: return "held";
    case CartonStatus::OnTable: return "on_table";
    case CartonStatus::OnShelf: return "on_shelf";
    case CartonStatus::Fallen: return "fallen";
  }
  return "?";
}

CartonStatus carton_status_from_string(const std::string& s) {
  for (auto c : {CartonStatus::InBox, CartonStatus::Held, CartonStatus::OnTable, CartonStatus::OnShelf, CartonStatus::Fallen})
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown carton status: " + s);
}

SceneState initial_scene(const SceneLayout& layout) {
  SceneState s;
  s.ee = layout.home;
  s.carton = layout.carton_start;
  try {
    s.joints = inverse_kinematics_any(layout.home, layout.arm);
  } catch (const KinematicsError& e) {
    s.reachable = e.kind() != KinematicsError::Kind::Unreachable;
    s.within_limits = false;
  }
  return s;
}

namespace {

Rect bounding_box(const std::array<Eigen::Vector2d, 4>& corners) {
  Rect r{corners[0].x(), corners[0].y(), corners[0].x(), corners[0].y()};
  for (const auto& c : corners) {
    r.xmin = std::min(r.xmin, c.x());
    r.xmax = std::max(r.xmax, c.x());
    r.zmin = std::min(r.zmin, c.y());
    r.zmax = std::max(r.zmax, c.y());
  }
  return r;
}

Rect oriented_box(const Eigen::Vector2d& center, double angle, double half_along, double half_across) {
  const Eigen::Vector2d u(std::cos(angle), std::sin(angle));
  const Eigen::Vector2d n(-u.y(), u.x());
  return bounding_box({center + u * half_along + n * half_across, center + u * half_along - n * half_across,
                       center - u * half_along + n * half_across, center - u * half_along - n * half_across});
}

Rect merge(const Rect& a, const Rect& b) {
  return {std::min(a.xmin, b.xmin), std::min(a.zmin, b.zmin), std::max(a.xmax, b.xmax), std::max(a.zmax, b.zmax)};
}

double linear_speed(const SceneState& s) { return std::hypot(s.ee_velocity.x(), s.ee_velocity.y()); }

void follow_gripper(SceneState& s) {
  if (s.carton.status != CartonStatus::Held) return;
  const double c = std::cos(s.ee.theta), sn = std::sin(s.ee.theta);
  const auto& off = s.hold_offset;
  s.carton.x = s.ee.x + c * off.x() - sn * off.y();
  s.carton.z = s.ee.z + sn * off.x() + c * off.y();
  s.carton.tilt = normalize_angle(s.ee.theta + off.z());
}

void update_joints(SceneState& s, const SceneLayout& layout) {
  s.reachable = true;
  s.within_limits = true;
  try {
    s.joints = inverse_kinematics_any(s.ee, layout.arm);
  } catch (const KinematicsError& e) {
    if (e.kind() == KinematicsError::Kind::Unreachable)
      s.reachable = false;
    else
      s.within_limits = false;
  }
}

SceneState finalize(SceneState next, const SceneState& prev, const SceneLayout& layout, long tick) {
  follow_gripper(next);
  update_joints(next, layout);
  next.tick = tick;
  next.report.merge(run_detectors(next, prev, layout));
  return next;
}

}  // namespace

Rect hand_box(const EndEffectorPose& ee, const SceneLayout& layout) {
  const Eigen::Vector2d tip(ee.x, ee.z);
  const Eigen::Vector2d u(std::cos(ee.theta), std::sin(ee.theta));
  return oriented_box(tip - u * (layout.hand_length / 2), ee.theta, layout.hand_length / 2, layout.hand_half_width);
}

Rect carton_box(const Carton& carton, const SceneLayout& layout) {
  return oriented_box({carton.x, carton.z}, carton.tilt + kPi / 2, layout.carton_height / 2, layout.carton_width / 2);
}

EndEffectorPose grasp_target(const Carton& carton, GraspKind kind, const SceneLayout& layout, bool from_left) {
  if (kind == GraspKind::Top) return {carton.x, carton.z + layout.carton_height / 2 - layout.grasp_depth, -kPi / 2};
  const double inset = layout.carton_width / 2 - layout.grasp_depth;
  return from_left ? EndEffectorPose{carton.x - inset, carton.z, 0.0} : EndEffectorPose{carton.x + inset, carton.z, kPi};
}

SceneState step(const SceneState& scene, const ControlLaw& law, const Eigen::Vector3d& external, double dt,
                const SceneLayout& layout, const ControllerGains& gains) {
  const int n = std::max(1, layout.substeps);
  const double h = dt / n;
  SceneState cur = scene;
  for (int k = 0; k < n; ++k) {
    SceneState next = cur;
    const Eigen::Vector3d accel = (law(cur).force + external).cwiseQuotient(layout.inertia);
    Eigen::Vector3d v = cur.ee_velocity + accel * h;
    v.x() = std::clamp(v.x(), -gains.v_max, gains.v_max);
    v.y() = std::clamp(v.y(), -gains.v_max, gains.v_max);
    v.z() = std::clamp(v.z(), -gains.w_max, gains.w_max);
    next.ee_velocity = v;
    next.ee = EndEffectorPose(cur.ee.x + v.x() * h, cur.ee.z + v.y() * h, cur.ee.theta + v.z() * h);
    cur = finalize(std::move(next), cur, layout, scene.tick + 1);
  }
  return cur;
}

SceneState step(const SceneState& scene, const ControlCommand& command, const Eigen::Vector3d& external, double dt,
                const SceneLayout& layout, const ControllerGains& gains) {
  return step(scene, [&](const SceneState&) { return command; }, external, dt, layout, gains);
}

SceneState drag_step(const SceneState& scene, const EndEffectorPose& target, double dt, const SceneLayout& layout) {
  SceneState next = scene;
  next.ee_velocity = Eigen::Vector3d((target.x - scene.ee.x) / dt, (target.z - scene.ee.z) / dt,
                                     angle_diff(target.theta, scene.ee.theta) / dt);
  next.ee = target;
  return finalize(std::move(next), scene, layout, scene.tick + 1);
}

namespace {

bool pose_matches(const EndEffectorPose& ee, const EndEffectorPose& target, const SceneLayout& layout) {
  return std::hypot(ee.x - target.x, ee.z - target.z) <= layout.grasp_tol_pos &&
         std::abs(angle_diff(ee.theta, target.theta)) <= layout.grasp_tol_ang;
}

void release(SceneState& s, const SceneLayout& layout) {
  auto& c = s.carton;
  s.grasp = GraspKind::None;
  s.hold_offset.setZero();
  const double bottom = c.z - layout.carton_height / 2;
  const Rect* support = nullptr;
  for (const auto& r : {&layout.table, &layout.shelf_plate}) {
    if (c.x < r->xmin || c.x > r->xmax || r->zmax > bottom + 0.01) continue;
    if (!support || r->zmax > support->zmax) support = r;
  }
  const bool stable = support && bottom - support->zmax <= layout.max_drop && std::abs(c.tilt) <= layout.topple_tilt;
  if (!stable) {
    c.status = CartonStatus::Fallen;
    const double floor = support ? support->zmax : layout.table.zmax;
    c.tilt = c.tilt >= 0 ? kPi / 2 : -kPi / 2;
    c.z = floor + layout.carton_width / 2;
    return;
  }
  c.z = support->zmax + layout.carton_height / 2;
  if (support == &layout.shelf_plate) {
    c.status = CartonStatus::OnShelf;
  } else {
    const Rect interior = layout.box_interior();
    c.status = c.x > interior.xmin && c.x < interior.xmax ? CartonStatus::InBox : CartonStatus::OnTable;
  }
}

}  // namespace

SceneState apply_grip(const SceneState& scene, GripState new_grip, const SceneLayout& layout) {
  if (new_grip == scene.grip) return scene;
  SceneState next = scene;
  next.grip = new_grip;
  if (new_grip == GripState::Closed) {
    const auto status = scene.carton.status;
    const bool loose = status == CartonStatus::InBox || status == CartonStatus::OnTable || status == CartonStatus::OnShelf;
    GraspKind kind = GraspKind::None;
    if (loose && pose_matches(scene.ee, grasp_target(scene.carton, GraspKind::Top, layout), layout)) {
      kind = GraspKind::Top;
    } else if (loose && status != CartonStatus::InBox &&
               (pose_matches(scene.ee, grasp_target(scene.carton, GraspKind::Side, layout, true), layout) ||
                pose_matches(scene.ee, grasp_target(scene.carton, GraspKind::Side, layout, false), layout))) {
      kind = GraspKind::Side;
    }
    if (kind != GraspKind::None) {
      next.grasp = kind;
      next.carton.status = CartonStatus::Held;
      const double c = std::cos(scene.ee.theta), sn = std::sin(scene.ee.theta);
      const double dx = scene.carton.x - scene.ee.x, dz = scene.carton.z - scene.ee.z;
      next.hold_offset = {c * dx + sn * dz, -sn * dx + c * dz, normalize_angle(scene.carton.tilt - scene.ee.theta)};
    }
  } else if (scene.carton.status == CartonStatus::Held) {
    release(next, layout);
  }
  next.report.merge(run_detectors(next, scene, layout));
  return next;
}

SuccessVerdict evaluate_success(const SceneState& scene, const SceneLayout& layout) {
  SuccessVerdict v;
  v.report = scene.report;
  const auto& c = scene.carton;
  const Rect vol = layout.shelf_volume();
  const double bottom = c.z - layout.carton_height / 2;
  v.success = c.status == CartonStatus::OnShelf && std::abs(c.tilt) <= layout.upright_tol && c.x >= vol.xmin &&
              c.x <= vol.xmax && std::abs(bottom - layout.shelf_plate.zmax) < 1e-6 && scene.grip == GripState::Open &&
              !hand_box(scene.ee, layout).overlaps(vol);
  return v;
}

DetectorReport run_detectors(const SceneState& scene, const SceneState& prev, const SceneLayout& layout) {
  DetectorReport r;
  const long tick = scene.tick;
  if (!scene.reachable) r.raise(ErrorCode::EP02, tick);
  if (scene.reachable && (!scene.within_limits || at_limit(scene.joints, layout.arm, layout.joint_limit_margin)))
    r.raise(ErrorCode::ET07, tick);
  if (scene.grip != prev.grip && std::max(linear_speed(scene), linear_speed(prev)) > layout.v_grasp)
    r.raise(ErrorCode::ET05, tick);

  const Rect hand = hand_box(scene.ee, layout);
  const bool held = scene.carton.status == CartonStatus::Held;
  const Rect carton = carton_box(scene.carton, layout);
  bool panel_is_ep01 = false;
  if (held && scene.grasp == GraspKind::Top && merge(hand, carton).overlaps(layout.shelf_panel)) {
    r.raise(ErrorCode::EP01, tick);
    panel_is_ep01 = true;
  }

  bool touching = false;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& ob : layout.obstacles()) {
    if (panel_is_ep01 && ob == layout.shelf_panel) continue;
    if (hand.overlaps(ob) || (held && carton.overlaps(ob, layout.contact_tol))) touching = true;
    gap = std::min(gap, clearance(hand, ob));
  }
  if (touching)
    r.raise(ErrorCode::ET04, tick);
  else if (gap < layout.d_near)
    r.raise(ErrorCode::ET03, tick);
  return r;
}

double mechanical_energy(const SceneState& scene, const EndEffectorPose& attractor, const Eigen::Vector3d& K,
                         const SceneLayout& layout) {
  const Eigen::Vector3d e(attractor.x - scene.ee.x, attractor.z - scene.ee.z, angle_diff(attractor.theta, scene.ee.theta));
  return 0.5 * scene.ee_velocity.cwiseProduct(layout.inertia).dot(scene.ee_velocity) + 0.5 * e.cwiseProduct(K).dot(e);
}

}  // namespace st2
