#pragma once

#include <Eigen/Core>
#include <array>

namespace evrecon {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rigid transform in SE(3) acting on points as x' = R x + t.
///
/// The twist is ordered (omega, v): the first three components are the
/// rotation vector in radians, the last three the translational part of the
/// twist. Rotation and translation are cached from the exponential map.
class Pose {
 public:
  Pose();  // identity

  static Pose from_twist(const Vector6d& twist);
  // Recovers the twist with se3_log; the rotation is re-orthonormalized.
  static Pose from_rotation_translation(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  const Vector6d& twist() const noexcept { return twist_; }
  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const { return rotation_ * point + translation_; }
  Eigen::Matrix4d matrix() const;
  // Rotation angle in radians, in [0, pi].
  double angle() const;

 private:
  Vector6d twist_;
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Closed-form Rodrigues exponential; throws InvalidArgument on non-finite input.
Pose se3_exp(const Vector6d& twist);
Vector6d se3_log(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

// Applies b first, then a.
Pose se3_compose(const Pose& a, const Pose& b);
Pose se3_invert(const Pose& pose);

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

// Angle between the rotations of two poses, radians.
double rotation_distance(const Pose& a, const Pose& b);
// Angle between two translation vectors, radians. Zero vectors give pi/2.
double direction_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Partial derivatives of (R, t) with respect to six scalar parameters.
struct PoseDerivative {
  std::array<Eigen::Matrix3d, 6> rotation;
  std::array<Eigen::Vector3d, 6> translation;
};

// d(R, t) / d(twist_i) of se3_exp, exact (not a local perturbation).
PoseDerivative twist_derivative(const Vector6d& twist);
// Derivative of se3_invert(p) given dp.
PoseDerivative invert_derivative(const Pose& pose, const PoseDerivative& d);
// Derivative of se3_compose(a, b) when only `a` depends on the parameters.
PoseDerivative compose_derivative_left(const PoseDerivative& da, const Pose& b);
// Derivative of se3_compose(a, b) when only `b` depends on the parameters.
PoseDerivative compose_derivative_right(const Pose& a, const PoseDerivative& db);

}  // namespace evrecon
