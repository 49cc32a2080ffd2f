#ifndef ST2_CONTROLLER_HPP
#define ST2_CONTROLLER_HPP

#include <stdexcept>

#include <Eigen/Core>

#include "st2/core_model.hpp"

namespace st2 {

enum class ImpedanceMode { Compliant, Active };

/// Diagonal stiffness/damping, stored as per-axis vectors over (x, z, theta).
struct ImpedanceState {
  Eigen::Vector3d K = Eigen::Vector3d::Zero();
  Eigen::Vector3d D = Eigen::Vector3d::Zero();
  ImpedanceMode mode = ImpedanceMode::Active;
};

/// Task-space wrench (Fx, Fz, Tau).
struct ControlCommand {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
};

/// K = k_max * clamp((1 - sigma) / (1 - sigma_th), 0, 1).
Eigen::Vector3d stiffness_from_sigma(double sigma, const ControllerGains& gains);

/// D = 2 sqrt(K) elementwise. Throws std::invalid_argument on negative stiffness.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, 1> damping_from_stiffness(
    const Eigen::MatrixBase<Derived>& K) {
  if ((K.array() < 0).any()) throw std::invalid_argument("damping_from_stiffness: negative stiffness");
  return (K.array().sqrt() * typename Derived::Scalar(2)).matrix();
}

/// Critically damped impedance for the given uncertainty. Falls back to the
/// compliant state once the stiffness has dropped to zero.
ImpedanceState active_impedance(double sigma, const ControllerGains& gains);
ImpedanceState compliant_impedance(const ControllerGains& gains);

/// F = K (attractor - pose) - D v with wrapped heading error, each axis
/// clipped to f_max. The velocity caps are enforced by the integrator.
ControlCommand control_step(const EndEffectorPose& pose, const Eigen::Vector3d& velocity, const EndEffectorPose& attractor,
                            const Eigen::Vector3d& K, const Eigen::Vector3d& D, const ControllerGains& gains);

/// sqrt(Fx^2 + Fz^2 + (tau / kTorqueArm)^2); detection fires strictly above f_th.
constexpr double kTorqueArm = 0.1;
double wrench_magnitude(const Eigen::Vector3d& wrench);
bool detect_external_force(const Eigen::Vector3d& wrench, const ControllerGains& gains);

}  // namespace st2

#endif  // ST2_CONTROLLER_HPP
