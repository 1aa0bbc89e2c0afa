#include "evrecon/pose.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "evrecon/error.hpp"

namespace evrecon {
namespace {

// Below this angle the coefficient functions switch to their Taylor series.
constexpr double kSeriesAngle = 0.1;

// Coefficients of R = I + a W + b W^2 and V = I + b W + c W^2, plus
// (da/dtheta)/theta etc. for the exact twist derivative.
struct ExpCoefficients {
  double a, b, c;
  double da, db, dc;
};

ExpCoefficients exp_coefficients(double theta) {
  const double t2 = theta * theta;
  ExpCoefficients k{};
  if (theta < kSeriesAngle) {
    const double t4 = t2 * t2, t6 = t4 * t2, t8 = t4 * t4;
    k.a = 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0 + t8 / 362880.0;
    k.b = 0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0 + t8 / 3628800.0;
    k.c = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0 + t8 / 39916800.0;
    k.da = -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0 + t6 / 45360.0 - t8 / 3991680.0;
    k.db = -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0 + t6 / 453600.0 - t8 / 47900160.0;
    k.dc = -1.0 / 60.0 + t2 / 1260.0 - t4 / 60480.0 + t6 / 4989600.0 - t8 / 622702080.0;
    return k;
  }
  const double s = std::sin(theta), co = std::cos(theta);
  const double t3 = t2 * theta, t4 = t2 * t2, t5 = t4 * theta;
  k.a = s / theta;
  k.b = (1.0 - co) / t2;
  k.c = (theta - s) / t3;
  k.da = (theta * co - s) / t3;
  k.db = (theta * s - 2.0 * (1.0 - co)) / t4;
  k.dc = ((1.0 - co) * theta - 3.0 * (theta - s)) / t5;
  return k;
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

Pose::Pose() : twist_(Vector6d::Zero()), rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

Pose Pose::from_twist(const Vector6d& twist) {
  if (!twist.allFinite()) throw InvalidArgument("se3_exp: twist must be finite");
  const Eigen::Vector3d omega = twist.head<3>();
  const Eigen::Vector3d v = twist.tail<3>();
  const Eigen::Matrix3d w = skew(omega);
  const Eigen::Matrix3d w2 = w * w;
  const ExpCoefficients k = exp_coefficients(omega.norm());
  Pose p;
  p.twist_ = twist;
  p.rotation_ = Eigen::Matrix3d::Identity() + k.a * w + k.b * w2;
  p.translation_ = (Eigen::Matrix3d::Identity() + k.b * w + k.c * w2) * v;
  return p;
}

Pose Pose::from_rotation_translation(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidArgument("pose: rotation and translation must be finite");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) throw InvalidArgument("pose: rotation has negative determinant");
  Pose p;
  p.rotation_ = r;
  p.translation_ = translation;
  p.twist_ = se3_log(r, translation);
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

double Pose::angle() const {
  return Eigen::AngleAxisd(rotation_).angle();
}

Pose se3_exp(const Vector6d& twist) { return Pose::from_twist(twist); }

Vector6d se3_log(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  const Eigen::AngleAxisd aa(rotation);
  const double theta = aa.angle();
  const Eigen::Vector3d omega = aa.axis() * theta;
  const Eigen::Matrix3d w = skew(omega);
  double d;
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta, t4 = t2 * t2, t6 = t4 * t2, t8 = t4 * t4;
    d = 1.0 / 12.0 + t2 / 720.0 + t4 / 30240.0 + t6 / 1209600.0 + t8 / 47900160.0;
  } else {
    d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + d * w * w;
  Vector6d twist;
  twist.head<3>() = omega;
  twist.tail<3>() = v_inv * translation;
  return twist;
}

Pose se3_compose(const Pose& a, const Pose& b) {
  return Pose::from_rotation_translation(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

Pose se3_invert(const Pose& pose) {
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  return Pose::from_rotation_translation(rt, -rt * pose.translation());
}

double rotation_distance(const Pose& a, const Pose& b) {
  return Eigen::AngleAxisd(a.rotation().transpose() * b.rotation()).angle();
}

double direction_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::numbers::pi / 2.0;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

PoseDerivative twist_derivative(const Vector6d& twist) {
  const Eigen::Vector3d omega = twist.head<3>();
  const Eigen::Vector3d v = twist.tail<3>();
  const double theta = omega.norm();
  const ExpCoefficients k = exp_coefficients(theta);
  const Eigen::Matrix3d w = skew(omega);
  const Eigen::Matrix3d w2 = w * w;
  const Eigen::Matrix3d vmat = Eigen::Matrix3d::Identity() + k.b * w + k.c * w2;

  PoseDerivative d;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
    const Eigen::Matrix3d ew = e * w + w * e;
    // d(f(theta))/d(omega_i) = f'(theta) * omega_i / theta.
    const double wi = omega[i];
    d.rotation[i] = k.da * wi * w + k.a * e + k.db * wi * w2 + k.b * ew;
    d.translation[i] = (k.db * wi * w + k.b * e + k.dc * wi * w2 + k.c * ew) * v;
    d.rotation[i + 3].setZero();
    d.translation[i + 3] = vmat.col(i);
  }
  return d;
}

PoseDerivative invert_derivative(const Pose& pose, const PoseDerivative& d) {
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  PoseDerivative out;
  for (int i = 0; i < 6; ++i) {
    const Eigen::Matrix3d drt = d.rotation[i].transpose();
    out.rotation[i] = drt;
    out.translation[i] = -drt * pose.translation() - rt * d.translation[i];
  }
  return out;
}

PoseDerivative compose_derivative_left(const PoseDerivative& da, const Pose& b) {
  PoseDerivative out;
  for (int i = 0; i < 6; ++i) {
    out.rotation[i] = da.rotation[i] * b.rotation();
    out.translation[i] = da.rotation[i] * b.translation() + da.translation[i];
  }
  return out;
}

PoseDerivative compose_derivative_right(const Pose& a, const PoseDerivative& db) {
  PoseDerivative out;
  for (int i = 0; i < 6; ++i) {
    out.rotation[i] = a.rotation() * db.rotation[i];
    out.translation[i] = a.rotation() * db.translation[i];
  }
  return out;
}

}  // namespace evrecon
