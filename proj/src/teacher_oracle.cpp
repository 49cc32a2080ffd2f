#include "st2/teacher_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

namespace st2 {

WaypointPlan canonical_plan(const SceneLayout& layout, int grip_dwell) {
  const double down = -kPi / 2;
  const Carton& c = layout.carton_start;
  const double h = layout.carton_height;
  const double inset = layout.carton_width / 2 - layout.grasp_depth;
  const double top_offset = h / 2 - layout.grasp_depth;  // gripper above carton center in a top grasp
  const double clear_z = layout.home.z;
  const double place_gap = 0.01;

  // intermediate table spot and shelf slot
  const double table_x = 0.70;
  const double table_cz = layout.table.zmax + h / 2;
  const double shelf_x = layout.shelf_plate.xmin + 0.11;
  const double shelf_cz = layout.shelf_plate.zmax + h / 2;

  const EndEffectorPose box_grasp{c.x, c.z + top_offset, down};
  const EndEffectorPose table_place{table_x, table_cz + place_gap + top_offset, down};
  const EndEffectorPose side_grasp{table_x - inset, table_cz, 0.0};
  const EndEffectorPose pre_side{side_grasp.x - 0.075, side_grasp.z, 0.0};
  const EndEffectorPose shelf_place{shelf_x - inset, shelf_cz + place_gap, 0.0};
  const EndEffectorPose shelf_entry{shelf_place.x, shelf_place.z + 0.01, 0.0};

  WaypointPlan plan;
  plan.start = layout.home;
  auto add = [&](EndEffectorPose p, int task, GripAction g = GripAction::None, bool end = false) {
    plan.waypoints.push_back({p, g, end, g == GripAction::None ? 0 : grip_dwell, task});
  };
  add(box_grasp, 1, GripAction::None, true);
  add(box_grasp, 2, GripAction::Close, true);
  add({c.x, clear_z, down}, 3, GripAction::None, true);
  add({table_x, clear_z, down}, 4);
  add(table_place, 4, GripAction::None, true);
  add(table_place, 5, GripAction::Open, true);
  add({table_x, table_place.z + 0.15, down}, 6);
  add({pre_side.x, pre_side.z + 0.14, 0.0}, 6);
  add(pre_side, 6);
  add(side_grasp, 6, GripAction::None, true);
  add(side_grasp, 7, GripAction::Close, true);
  add({side_grasp.x, side_grasp.z + 0.12, 0.0}, 8);
  add({shelf_x - 0.19, shelf_entry.z, 0.0}, 8);
  add(shelf_entry, 8);
  add(shelf_place, 8, GripAction::None, true);
  add(shelf_place, 9, GripAction::Open, true);
  add({layout.shelf_plate.xmin - 0.16, shelf_entry.z, 0.0}, 10, GripAction::None, true);
  return plan;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::EveryWaypoint: return "every_waypoint";
    case Strategy::User03Style: return "user03_style";
    case Strategy::None: return "none";
    case Strategy::RandomK: return "random_k";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  for (auto v : {Strategy::EveryWaypoint, Strategy::User03Style, Strategy::None, Strategy::RandomK})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown strategy: " + s);
}

std::vector<int> keypoint_tasks(Strategy strategy, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::EveryWaypoint: return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    case Strategy::User03Style: return {1, 2, 5, 6, 7, 9, 10};  // T3, T4, T8 boundaries skipped
    case Strategy::None: return {};
    case Strategy::RandomK: {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      std::bernoulli_distribution coin(0.5);
      std::vector<int> out;
      for (int task = 1; task <= 9; ++task)
        if (coin(rng)) out.push_back(task);
      out.push_back(10);
      return out;
    }
  }
  return {};
}

double raised_cosine_bump(double j, double center, double half_width, double peak) {
  const double u = (j - center) / half_width;
  if (std::abs(u) >= 1.0) return 0.0;
  return peak * 0.5 * (1.0 + std::cos(kPi * u));
}

namespace {

int move_ticks(const EndEffectorPose& from, const EndEffectorPose& to, const TeacherConfig& cfg, double dt) {
  const double lin = std::hypot(to.x - from.x, to.z - from.z) / cfg.speed;
  const double ang = std::abs(angle_diff(to.theta, from.theta)) / cfg.angular_speed;
  return std::max(1, static_cast<int>(std::ceil(std::max(lin, ang) / dt - 1e-9)));
}

GripState grip_target(GripAction a) { return a == GripAction::Close ? GripState::Closed : GripState::Open; }

}  // namespace

DemoLog demonstrate(Engine& engine, const WaypointPlan& plan, const TeacherConfig& cfg,
                    const std::optional<DemoFault>& fault) {
  const double dt = engine.world().dt();
  for (const auto& wp : plan.waypoints) inverse_kinematics_any(wp.pose, engine.world().layout.arm);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double a = std::exp(-dt / cfg.noise_tau);
  const double kick = cfg.noise_sigma * std::sqrt(1.0 - a * a);
  Eigen::Vector2d noise = Eigen::Vector2d::Zero();

  const auto kp = keypoint_tasks(cfg.strategy, cfg.seed);
  const std::set<int> kp_tasks(kp.begin(), kp.end());
  const bool can_segment = engine.session().options.framework == Framework::St2;

  // motion ticks spent in the faulty task, for placing the bump
  int fault_ticks = 0;
  if (fault) {
    EndEffectorPose from = plan.start;
    for (const auto& wp : plan.waypoints) {
      if (wp.task == fault->task) fault_ticks += move_ticks(from, wp.pose, cfg, dt);
      from = wp.pose;
    }
  }
  int fault_tick = 0;

  DemoLog out;
  out.task_end_tick.assign(10, -1);
  EndEffectorPose ref = plan.start;
  EndEffectorPose shown = ref;
  auto push = [&](const TeacherInput& in) {
    engine.step(in);
    ++out.ticks;
  };
  auto still = [&](int n) {
    for (int k = 0; k < n; ++k) push({.drag = shown, .grip = std::nullopt, .wrench = Eigen::Vector3d::Zero()});
  };

  still(2);
  for (const auto& wp : plan.waypoints) {
    const int n = move_ticks(ref, wp.pose, cfg, dt);
    const bool moving = std::hypot(wp.pose.x - ref.x, wp.pose.z - ref.z) > 0 || wp.pose.theta != ref.theta;
    if (moving) {
      for (int k = 1; k <= n; ++k) {
        const double alpha = static_cast<double>(k) / n;
        noise = a * noise + kick * Eigen::Vector2d(gauss(rng), gauss(rng));
        double bump = 0.0;
        if (fault && wp.task == fault->task) {
          bump = raised_cosine_bump(fault_tick, fault_ticks / 2.0, fault_ticks / 2.0, fault->offset);
          ++fault_tick;
        }
        shown = EndEffectorPose(ref.x + alpha * (wp.pose.x - ref.x) + noise.x(),
                                ref.z + alpha * (wp.pose.z - ref.z) + noise.y() + bump,
                                ref.theta + alpha * angle_diff(wp.pose.theta, ref.theta));
        push({.drag = shown, .grip = std::nullopt, .wrench = Eigen::Vector3d::Zero()});
      }
      ref = wp.pose;
    }
    if (wp.grip != GripAction::None) {
      still(wp.dwell / 2);
      push({.drag = shown, .grip = grip_target(wp.grip), .wrench = Eigen::Vector3d::Zero()});
      still(wp.dwell - wp.dwell / 2);
    }
    if (wp.keypoint_here) {
      out.task_end_tick[static_cast<std::size_t>(wp.task - 1)] = engine.tick();
      if (can_segment && kp_tasks.contains(wp.task)) {
        engine.apply(CommandKind::InsertKP);
        ++out.keypoints;
      }
    }
  }
  return out;
}

namespace {

Eigen::Vector2d closest_on_plan(const WaypointPlan& plan, const Eigen::Vector2d& p) {
  Eigen::Vector2d best(plan.start.x, plan.start.z);
  double best_d = (p - best).norm();
  Eigen::Vector2d a = best;
  for (const auto& wp : plan.waypoints) {
    const Eigen::Vector2d b(wp.pose.x, wp.pose.z);
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d q = a + s * ab;
    const double d = (p - q).norm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
    a = b;
  }
  return best;
}

}  // namespace

double plan_deviation(const WaypointPlan& plan, const EndEffectorPose& pose) {
  const Eigen::Vector2d p(pose.x, pose.z);
  return (p - closest_on_plan(plan, p)).norm();
}

CorrectionSupervisor::CorrectionSupervisor(WaypointPlan plan, TeacherConfig cfg)
    : plan_(std::move(plan)), cfg_(std::move(cfg)) {}

TeacherInput CorrectionSupervisor::operator()(const Engine& engine) {
  TeacherInput in;
  if (engine.session().mode != Mode::Auto) {
    active_ = false;
    return in;
  }
  const Eigen::Vector2d p(engine.scene().ee.x, engine.scene().ee.z);
  const Eigen::Vector2d q = closest_on_plan(plan_, p);
  const double dev = (q - p).norm();
  if (!active_ && dev > cfg_.correction.delta) active_ = true;
  if (active_ && dev < cfg_.correction.delta / 2) active_ = false;
  if (!active_) return in;
  const double f_th = engine.session().options.gains.f_th;
  const double magnitude = std::clamp(cfg_.correction.gain * dev, 1.5 * f_th, cfg_.correction.max_force);
  const Eigen::Vector2d f = (q - p).normalized() * magnitude;
  in.wrench = Eigen::Vector3d(f.x(), f.y(), 0.0);
  log_.emplace_back(engine.tick(), in.wrench);
  return in;
}

Dataset inject_fault(const Dataset& dataset, int segment_id, double offset, std::uint64_t seed) {
  if (segment_id < 1 || segment_id > static_cast<int>(dataset.segments.size()))
    throw std::out_of_range("inject_fault: unknown segment " + std::to_string(segment_id));
  Dataset out = dataset;
  if (offset == 0.0) return out;
  auto& samples = out.segments[static_cast<std::size_t>(segment_id - 1)].samples;
  const int m = static_cast<int>(samples.size());
  const int half = std::max(1, m / 4);
  int center = m / 2;
  if (m - 1 - half > half) {
    std::mt19937_64 rng(seed);
    center = std::uniform_int_distribution<int>(half, m - 1 - half)(rng);
  }
  for (int j = 0; j < m; ++j) samples[static_cast<std::size_t>(j)].pose.z += raised_cosine_bump(j, center, half, offset);
  return out;
}

}  // namespace st2
