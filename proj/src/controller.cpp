#include "st2/controller.hpp"

#include <algorithm>
#include <cmath>

namespace st2 {

Eigen::Vector3d stiffness_from_sigma(double sigma, const ControllerGains& gains) {
  const double s = std::clamp(sigma, 0.0, 1.0);
  const double scale = std::clamp((1.0 - s) / (1.0 - gains.sigma_th), 0.0, 1.0);
  return gains.k_max * scale;
}

ImpedanceState active_impedance(double sigma, const ControllerGains& gains) {
  ImpedanceState st;
  st.mode = ImpedanceMode::Active;
  st.K = stiffness_from_sigma(sigma, gains);
  if (st.K.isZero(0.0)) return compliant_impedance(gains);
  st.D = damping_from_stiffness(st.K);
  return st;
}

ImpedanceState compliant_impedance(const ControllerGains& gains) {
  ImpedanceState st;
  st.mode = ImpedanceMode::Compliant;
  st.K.setZero();
  st.D.setConstant(gains.compliant_drag);
  return st;
}

ControlCommand control_step(const EndEffectorPose& pose, const Eigen::Vector3d& velocity, const EndEffectorPose& attractor,
                            const Eigen::Vector3d& K, const Eigen::Vector3d& D, const ControllerGains& gains) {
  const Eigen::Vector3d error(attractor.x - pose.x, attractor.z - pose.z, angle_diff(attractor.theta, pose.theta));
  ControlCommand cmd;
  cmd.force = K.cwiseProduct(error) - D.cwiseProduct(velocity);
  cmd.force = cmd.force.cwiseMax(-gains.f_max).cwiseMin(gains.f_max);
  return cmd;
}

double wrench_magnitude(const Eigen::Vector3d& wrench) {
  return std::sqrt(wrench.x() * wrench.x() + wrench.y() * wrench.y() +
                   (wrench.z() / kTorqueArm) * (wrench.z() / kTorqueArm));
}

bool detect_external_force(const Eigen::Vector3d& wrench, const ControllerGains& gains) {
  return wrench_magnitude(wrench) > gains.f_th;
}

}  // namespace st2
