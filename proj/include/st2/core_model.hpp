#ifndef ST2_CORE_MODEL_HPP
#define ST2_CORE_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace st2 {

constexpr double kPi = 3.14159265358979323846;

/// Wrap an angle to (-pi, pi]. Throws std::invalid_argument on non-finite input.
double normalize_angle(double a);

/// Shortest signed difference a - b, wrapped to (-pi, pi].
inline double angle_diff(double a, double b) { return normalize_angle(a - b); }

/// Planar end-effector pose in the vertical (x, z) plane; theta is the gripper heading.
struct EndEffectorPose {
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;

  EndEffectorPose() = default;
  EndEffectorPose(double x_, double z_, double theta_) : x(x_), z(z_), theta(normalize_angle(theta_)) {}

  Eigen::Vector3d vec() const { return {x, z, theta}; }
  static EndEffectorPose from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

  bool operator==(const EndEffectorPose&) const = default;
};

enum class GripState : std::uint8_t { Open = 0, Closed = 1 };

inline double grip_value(GripState g) { return g == GripState::Closed ? 1.0 : 0.0; }

/// GP input x = (p, t). t is a 1-based sample index within a segment.
struct TimedState {
  EndEffectorPose pose;
  GripState grip = GripState::Open;
  int t = 1;

  bool operator==(const TimedState&) const = default;
};

/// One demonstrated trajectory. `samples` is the primary demonstration with
/// consecutive timestamps 1..M. `corrections` holds runs recorded while the
/// segment executed autonomously; those keep the execution time they were
/// recorded at.
struct Segment {
  int id = 1;
  std::vector<TimedState> samples;
  std::vector<std::vector<TimedState>> corrections;

  bool empty() const { return samples.empty(); }
  std::size_t correction_count() const;

  /// Appends a pose and assigns the next consecutive timestamp.
  void append(const EndEffectorPose& pose, GripState grip);

  bool operator==(const Segment&) const = default;
};

struct Dataset {
  std::vector<Segment> segments;

  std::size_t size() const { return segments.size(); }
  bool operator==(const Dataset&) const = default;
};

/// True when every segment's first pose matches its predecessor's last pose.
bool is_continuous(const Dataset& dataset, double eps_pos, double eps_ang);

/// True when samples[j].t == j + 1 for all j.
bool has_consecutive_timestamps(const Segment& segment);

struct KernelParams {
  double lambda_p = 0.05;
  double lambda_theta = 0.5;
  double lambda_g = 1.0;
  double lambda_t = 2.0;
  double w_p = 1.0;
  double w_theta = 1.0;
  double w_g = 0.0;

  /// Throws std::invalid_argument when a length scale is non-positive or all weights vanish.
  void validate() const;

  bool operator==(const KernelParams&) const = default;
};

struct ControllerGains {
  Eigen::Vector3d k_max{200.0, 200.0, 100.0};
  double sigma_th = 0.5;
  double f_th = 3.0;
  double v_max = 0.5;
  double w_max = 2.0;  // angular speed cap, rad/s
  double f_max = 40.0;
  double compliant_drag = 2.0;

  void validate() const;
};

/// Weighted pose metric used inside the exponential kernel.
double pose_distance(const EndEffectorPose& a, GripState ga, const EndEffectorPose& b, GripState gb,
                     const KernelParams& params);

inline double pose_distance(const TimedState& a, const TimedState& b, const KernelParams& params) {
  return pose_distance(a.pose, a.grip, b.pose, b.grip, params);
}

}  // namespace st2

#endif  // ST2_CORE_MODEL_HPP
