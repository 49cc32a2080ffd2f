#include "st2/core_model.hpp"

namespace st2 {

double normalize_angle(double a) {
  if (!std::isfinite(a)) throw std::invalid_argument("normalize_angle: non-finite angle");
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

std::size_t Segment::correction_count() const {
  std::size_t n = 0;
  for (const auto& run : corrections) n += run.size();
  return n;
}

void Segment::append(const EndEffectorPose& pose, GripState grip) {
  samples.push_back({pose, grip, static_cast<int>(samples.size()) + 1});
}

bool has_consecutive_timestamps(const Segment& segment) {
  for (std::size_t j = 0; j < segment.samples.size(); ++j)
    if (segment.samples[j].t != static_cast<int>(j) + 1) return false;
  return true;
}

bool is_continuous(const Dataset& dataset, double eps_pos, double eps_ang) {
  for (std::size_t k = 1; k < dataset.segments.size(); ++k) {
    const auto& prev = dataset.segments[k - 1].samples;
    const auto& next = dataset.segments[k].samples;
    if (prev.empty() || next.empty()) continue;
    const auto& a = prev.back().pose;
    const auto& b = next.front().pose;
    if (std::hypot(a.x - b.x, a.z - b.z) > eps_pos) return false;
    if (std::abs(angle_diff(a.theta, b.theta)) > eps_ang) return false;
  }
  return true;
}

void KernelParams::validate() const {
  if (!(lambda_p > 0 && lambda_theta > 0 && lambda_g > 0 && lambda_t > 0))
    throw std::invalid_argument("KernelParams: length scales must be positive");
  if (w_p < 0 || w_theta < 0 || w_g < 0) throw std::invalid_argument("KernelParams: negative weight");
  if (w_p + w_theta + w_g == 0.0) throw std::invalid_argument("KernelParams: all weights are zero");
}

void ControllerGains::validate() const {
  if (!(sigma_th > 0.0 && sigma_th < 1.0)) throw std::invalid_argument("ControllerGains: sigma_th outside (0,1)");
  if ((k_max.array() < 0.0).any()) throw std::invalid_argument("ControllerGains: negative stiffness");
  if (!(f_th > 0 && v_max > 0 && w_max > 0 && f_max > 0)) throw std::invalid_argument("ControllerGains: caps must be positive");
}

double pose_distance(const EndEffectorPose& a, GripState ga, const EndEffectorPose& b, GripState gb,
                     const KernelParams& params) {
  const double dx = (a.x - b.x) / params.lambda_p;
  const double dz = (a.z - b.z) / params.lambda_p;
  const double dth = angle_diff(a.theta, b.theta) / params.lambda_theta;
  const double dg = (grip_value(ga) - grip_value(gb)) / params.lambda_g;
  return std::sqrt(params.w_p * (dx * dx + dz * dz) + params.w_theta * dth * dth + params.w_g * dg * dg);
}

}  // namespace st2
