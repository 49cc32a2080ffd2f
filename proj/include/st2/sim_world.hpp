#ifndef ST2_SIM_WORLD_HPP
#define ST2_SIM_WORLD_HPP

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "st2/controller.hpp"
#include "st2/core_model.hpp"

namespace st2 {

/// Axis-aligned rectangle in the vertical plane.
struct Rect {
  double xmin = 0, zmin = 0, xmax = 0, zmax = 0;

  /// Intersection deeper than `tol` on both axes.
  bool overlaps(const Rect& o, double tol = 0.0) const {
    return xmin < o.xmax - tol && o.xmin < xmax - tol && zmin < o.zmax - tol && o.zmin < zmax - tol;
  }
  bool contains(double x, double z) const { return x >= xmin && x <= xmax && z >= zmin && z <= zmax; }
  bool operator==(const Rect&) const = default;
};

/// Euclidean gap between two rectangles; 0 when they touch or overlap.
double clearance(const Rect& a, const Rect& b);

struct ArmModel {
  Eigen::Vector3d link_lengths{0.55, 0.45, 0.12};
  std::array<std::array<double, 2>, 3> joint_limits{{{-2.6, 2.6}, {-2.8, 2.8}, {-2.8, 2.8}}};
  Eigen::Vector2d base{0.0, 0.25};

  double reach() const { return link_lengths.sum(); }
};

enum class IkBranch { ElbowUp, ElbowDown };

class KinematicsError : public std::runtime_error {
 public:
  enum class Kind { Unreachable, JointLimit };
  KinematicsError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

EndEffectorPose forward_kinematics(const Eigen::Vector3d& joints, const ArmModel& arm);

/// Analytic 3R solution for the requested elbow branch. Throws KinematicsError
/// (Unreachable) when the wrist is out of the 2R annulus and (JointLimit) when
/// the solution leaves the joint limits.
Eigen::Vector3d inverse_kinematics(const EndEffectorPose& target, const ArmModel& arm, IkBranch branch);

/// Tries the preferred branch first, then the other one.
Eigen::Vector3d inverse_kinematics_any(const EndEffectorPose& target, const ArmModel& arm,
                                       IkBranch preferred = IkBranch::ElbowUp);

enum class ErrorCode { ET03, ET04, ET05, ET07, EP01, EP02 };
constexpr std::array<ErrorCode, 6> kAllErrorCodes{ErrorCode::ET03, ErrorCode::ET04, ErrorCode::ET05,
                                                  ErrorCode::ET07, ErrorCode::EP01, ErrorCode::EP02};
std::string to_string(ErrorCode code);
ErrorCode error_code_from_string(const std::string& s);

/// Raised flags with the tick of first occurrence. Flags are never cleared within an episode.
struct DetectorReport {
  std::map<ErrorCode, long> first_tick;

  bool has(ErrorCode c) const { return first_tick.contains(c); }
  void raise(ErrorCode c, long tick) { first_tick.emplace(c, tick); }
  void merge(const DetectorReport& other);
  bool operator==(const DetectorReport&) const = default;
};

enum class CartonStatus { InBox, Held, OnTable, OnShelf, Fallen };
std::string to_string(CartonStatus s);
CartonStatus carton_status_from_string(const std::string& s);

enum class GraspKind { None, Top, Side };

struct Carton {
  double x = 0.35;  // center
  double z = 0.08;
  double tilt = 0.0;  // 0 = upright
  CartonStatus status = CartonStatus::InBox;

  bool operator==(const Carton&) const = default;
};

/// Static scene geometry, arm, and thresholds. All lengths in meters.
struct SceneLayout {
  ArmModel arm;
  Rect table{0.15, -0.04, 0.85, 0.0};
  Rect box_left{0.24, 0.0, 0.25, 0.18};
  Rect box_right{0.45, 0.0, 0.46, 0.18};
  Rect shelf_plate{0.88, 0.28, 1.10, 0.30};
  Rect shelf_panel{0.86, 0.54, 1.10, 0.56};

  double carton_width = 0.07;
  double carton_height = 0.16;
  Carton carton_start{};
  double grasp_depth = 0.02;  // grasp point inset from the approached face

  double hand_length = 0.12;
  double hand_half_width = 0.045;

  EndEffectorPose home{0.35, 0.45, -kPi / 2};

  Eigen::Vector3d inertia{1.0, 1.0, 0.05};  // kg, kg, kg m^2
  int substeps = 20;                         // physics steps per control tick

  double d_near = 0.02;
  double v_grasp = 0.01;
  double grasp_tol_pos = 0.02;
  double grasp_tol_ang = 15.0 * kPi / 180.0;
  double upright_tol = 5.0 * kPi / 180.0;
  double topple_tilt = 30.0 * kPi / 180.0;
  double max_drop = 0.05;
  double joint_limit_margin = 1e-6;
  double contact_tol = 0.002;  // penetration a resting or held carton may show without counting as contact

  /// Support surfaces the carton may rest on.
  std::vector<Rect> supports() const { return {table, shelf_plate}; }
  /// Everything the hand or a held carton may touch.
  std::vector<Rect> obstacles() const { return {table, box_left, box_right, shelf_plate, shelf_panel}; }
  /// Free volume between shelf plate and top panel.
  Rect shelf_volume() const { return {shelf_plate.xmin, shelf_plate.zmax, shelf_plate.xmax, shelf_panel.zmin}; }
  Rect box_interior() const { return {box_left.xmax, table.zmax, box_right.xmin, box_left.zmax}; }
};

struct SceneState {
  EndEffectorPose ee;
  Eigen::Vector3d ee_velocity = Eigen::Vector3d::Zero();
  GripState grip = GripState::Open;
  Eigen::Vector3d joints = Eigen::Vector3d::Zero();
  Carton carton;
  GraspKind grasp = GraspKind::None;
  Eigen::Vector3d hold_offset = Eigen::Vector3d::Zero();  // carton (x, z, tilt) in the gripper frame
  bool reachable = true;
  bool within_limits = true;
  long tick = 0;
  DetectorReport report;

  bool operator==(const SceneState& o) const {
    return ee == o.ee && ee_velocity == o.ee_velocity && grip == o.grip && joints == o.joints && carton == o.carton &&
           grasp == o.grasp && hold_offset == o.hold_offset && reachable == o.reachable &&
           within_limits == o.within_limits && tick == o.tick && report == o.report;
  }
};

SceneState initial_scene(const SceneLayout& layout);

Rect hand_box(const EndEffectorPose& ee, const SceneLayout& layout);
Rect carton_box(const Carton& carton, const SceneLayout& layout);
/// Grasp point the gripper must reach for the given approach.
EndEffectorPose grasp_target(const Carton& carton, GraspKind kind, const SceneLayout& layout, bool from_left = true);

using ControlLaw = std::function<ControlCommand(const SceneState&)>;

/// One control tick of m p'' = F_ctrl + F_ext, split into layout.substeps
/// semi-implicit Euler steps with `law` re-evaluated at each. Velocity is
/// capped; the held carton follows, joints and detectors update every substep.
/// Advances the tick by one.
SceneState step(const SceneState& scene, const ControlLaw& law, const Eigen::Vector3d& external, double dt,
                const SceneLayout& layout, const ControllerGains& gains);
/// Constant command over the tick.
SceneState step(const SceneState& scene, const ControlCommand& command, const Eigen::Vector3d& external,
                double dt, const SceneLayout& layout, const ControllerGains& gains);

/// Kinesthetic guidance of the compliant arm: the end-effector is moved to
/// `target`, velocity set by finite difference.
SceneState drag_step(const SceneState& scene, const EndEffectorPose& target, double dt, const SceneLayout& layout);

SceneState apply_grip(const SceneState& scene, GripState new_grip, const SceneLayout& layout);

struct SuccessVerdict {
  bool success = false;
  DetectorReport report;
};
SuccessVerdict evaluate_success(const SceneState& scene, const SceneLayout& layout);

/// Detector flags raised by the transition prev -> scene (not merged into scene.report).
DetectorReport run_detectors(const SceneState& scene, const SceneState& prev, const SceneLayout& layout);

/// Total mechanical energy of the impedance-driven end-effector about an attractor.
double mechanical_energy(const SceneState& scene, const EndEffectorPose& attractor, const Eigen::Vector3d& K,
                         const SceneLayout& layout);

}  // namespace st2

#endif  // ST2_SIM_WORLD_HPP
