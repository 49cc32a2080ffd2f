#ifndef ST2_TESTS_SUPPORT_HPP
#define ST2_TESTS_SUPPORT_HPP

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "st2/core_model.hpp"
#include "st2/sim_world.hpp"

namespace st2::testing {

inline TimedState random_state(std::mt19937_64& rng, int t_max = 200) {
  std::uniform_real_distribution<double> pos(0.0, 1.0), ang(-kPi, kPi);
  std::uniform_int_distribution<int> t(1, t_max);
  std::bernoulli_distribution coin;
  return {EndEffectorPose(pos(rng), pos(rng), ang(rng)), coin(rng) ? GripState::Closed : GripState::Open, t(rng)};
}

/// Random walk segment with consecutive timestamps.
inline Segment random_segment(std::mt19937_64& rng, int m, int id = 1) {
  std::normal_distribution<double> step(0.0, 0.01);
  std::bernoulli_distribution flip(0.05);
  Segment s;
  s.id = id;
  EndEffectorPose p(0.5, 0.3, 0.0);
  GripState g = GripState::Open;
  for (int k = 0; k < m; ++k) {
    s.append(p, g);
    p = EndEffectorPose(p.x + step(rng), p.z + step(rng), p.theta + 5 * step(rng));
    if (flip(rng)) g = g == GripState::Open ? GripState::Closed : GripState::Open;
  }
  return s;
}

/// Kernel written out independently of the library.
inline double oracle_kernel(const TimedState& a, const TimedState& b, const KernelParams& k) {
  const double dx = a.pose.x - b.pose.x, dz = a.pose.z - b.pose.z;
  double dth = std::fmod(a.pose.theta - b.pose.theta, 2 * kPi);
  if (dth > kPi) dth -= 2 * kPi;
  if (dth <= -kPi) dth += 2 * kPi;
  const double dg = (a.grip == b.grip ? 0.0 : 1.0);
  const double d2 = k.w_p * (dx * dx + dz * dz) / (k.lambda_p * k.lambda_p) +
                    k.w_theta * dth * dth / (k.lambda_theta * k.lambda_theta) + k.w_g * dg * dg / (k.lambda_g * k.lambda_g);
  return std::exp(-std::sqrt(d2)) * std::exp(-std::abs(a.t - b.t) / k.lambda_t);
}

struct OracleHit {
  std::size_t index = 0;
  double k = -1.0;
};

inline OracleHit oracle_nearest(const std::vector<TimedState>& inputs, const TimedState& q, const KernelParams& k) {
  OracleHit best;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const double v = oracle_kernel(q, inputs[j], k);
    if (v > best.k) best = {j, v};
  }
  return best;
}

/// Scene report after a hand-built scenario meant to raise exactly `code`.
inline DetectorReport detector_scenario(ErrorCode code, SceneLayout layout = {}) {
  const double down = -kPi / 2;
  const EndEffectorPose clear_pose(0.65, 0.40, down);
  const double dt = 0.05;
  switch (code) {
    case ErrorCode::ET03:  // hand 1 cm above the table
      return drag_step(initial_scene(layout), {0.65, 0.01, down}, dt, layout).report;
    case ErrorCode::ET04:  // hand pressed 5 mm into the table
      return drag_step(initial_scene(layout), {0.65, -0.005, down}, dt, layout).report;
    case ErrorCode::ET05: {  // closing the gripper while still moving
      SceneState s = drag_step(initial_scene(layout), clear_pose, dt, layout);
      s.ee_velocity = Eigen::Vector3d(0.05, 0.0, 0.0);
      return apply_grip(s, GripState::Closed, layout).report;
    }
    case ErrorCode::ET07: {  // wrist limit tightened around the pose's solution
      layout.arm.joint_limits[2] = {-0.05, 0.05};
      return drag_step(initial_scene(layout), clear_pose, dt, layout).report;
    }
    case ErrorCode::EP01: {  // top-held carton pushed into the shelf overhang
      SceneState s = drag_step(initial_scene(layout), grasp_target(layout.carton_start, GraspKind::Top, layout), dt, layout);
      s.ee_velocity.setZero();
      s = apply_grip(s, GripState::Closed, layout);
      return drag_step(s, {0.85, 0.58, down}, dt, layout).report;
    }
    case ErrorCode::EP02:  // beyond total reach
      return drag_step(initial_scene(layout), {1.30, 0.25, 0.0}, dt, layout).report;
  }
  return {};
}

inline std::set<ErrorCode> flags(const DetectorReport& r) {
  std::set<ErrorCode> out;
  for (const auto& [code, tick] : r.first_tick) out.insert(code);
  return out;
}

}  // namespace st2::testing

#endif  // ST2_TESTS_SUPPORT_HPP
