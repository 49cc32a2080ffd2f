#ifndef ST2_TEACHER_ORACLE_HPP
#define ST2_TEACHER_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "st2/engine.hpp"

namespace st2 {

enum class GripAction { None, Close, Open };

struct Waypoint {
  EndEffectorPose pose;
  GripAction grip = GripAction::None;
  bool keypoint_here = false;  // a sub-task ends here
  int dwell = 0;               // still ticks around a grip action
  int task = 0;                // 1..10 in the restocking breakdown
};

struct WaypointPlan {
  EndEffectorPose start;
  std::vector<Waypoint> waypoints;
};

/// T1..T10 restocking plan for the given layout: top grasp in the box, place
/// on the table, side re-grasp, place on the shelf, retract.
WaypointPlan canonical_plan(const SceneLayout& layout, int grip_dwell = 6);

enum class Strategy { EveryWaypoint, User03Style, None, RandomK };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Task boundaries (1..10) after which the strategy inserts a key-point.
std::vector<int> keypoint_tasks(Strategy strategy, std::uint64_t seed);

struct CorrectionConfig {
  double delta = 0.02;   // deviation that starts a correction, m
  double gain = 1000.0;  // N/m
  double max_force = 40.0;
};

struct TeacherConfig {
  double noise_sigma = 0.005;
  double noise_tau = 0.5;  // correlation time of the jitter, s
  double speed = 0.12;
  double angular_speed = 1.0;
  std::uint64_t seed = 7;
  Strategy strategy = Strategy::User03Style;
  CorrectionConfig correction;
};

/// A demonstration-time fault: the teacher's hand drifts by a raised-cosine
/// bump in +z while performing `task`.
struct DemoFault {
  int task = 6;
  double offset = 0.05;
};

struct DemoLog {
  int keypoints = 0;
  long ticks = 0;
  std::vector<long> task_end_tick;  // engine tick at which each task finished (index task-1)
};

/// Raised-cosine bump of the given peak; zero outside |j - center| < half_width.
double raised_cosine_bump(double j, double center, double half_width, double peak);

/// Drives the compliant arm through the plan with seeded Ornstein-Uhlenbeck
/// jitter and issues insertKP per strategy. The engine must be in demo mode.
/// Throws KinematicsError (Unreachable) when a waypoint is out of reach.
DemoLog demonstrate(Engine& engine, const WaypointPlan& plan, const TeacherConfig& cfg,
                    const std::optional<DemoFault>& fault = std::nullopt);

/// Deviation of a point from the plan's reference polyline.
double plan_deviation(const WaypointPlan& plan, const EndEffectorPose& pose);

/// Stateful corrective teacher for autonomous runs: pushes the end-effector
/// back toward the plan once deviation exceeds delta, until it drops below delta/2.
class CorrectionSupervisor {
 public:
  CorrectionSupervisor(WaypointPlan plan, TeacherConfig cfg);

  TeacherInput operator()(const Engine& engine);
  const std::vector<std::pair<long, Eigen::Vector3d>>& log() const { return log_; }

 private:
  WaypointPlan plan_;
  TeacherConfig cfg_;
  bool active_ = false;
  std::vector<std::pair<long, Eigen::Vector3d>> log_;
};

/// Smooth +z perturbation of one segment's primary samples. Throws std::out_of_range on an unknown id.
Dataset inject_fault(const Dataset& dataset, int segment_id, double offset, std::uint64_t seed);

}  // namespace st2

#endif  // ST2_TEACHER_ORACLE_HPP
