#include "gazeadapt/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace gazeadapt {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

Rotation Rotation::from_row_major(const std::array<double, 9>& rm) {
  Eigen::Matrix3d m;
  m << rm[0], rm[1], rm[2], rm[3], rm[4], rm[5], rm[6], rm[7], rm[8];
  return Rotation(m);
}

std::array<double, 9> Rotation::row_major() const {
  return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1),
          m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2)};
}

bool Rotation::is_valid(double tol) const {
  const Eigen::Matrix3d e = m_.transpose() * m_ - Eigen::Matrix3d::Identity();
  return e.cwiseAbs().maxCoeff() < tol && std::abs(m_.determinant() - 1.0) < tol;
}

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d d_rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

Eigen::Matrix3d d_rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Eigen::Matrix3d d_rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

Rotation rotation_from_euler(const EulerPose& p) {
  return Rotation(rot_z(p.roll) * rot_x(p.pitch) * rot_y(p.yaw));
}

std::optional<EulerPose> euler_from_rotation(const Rotation& r) {
  const Eigen::Matrix3d& m = r.matrix();
  const double sp = std::clamp(m(2, 1), -1.0, 1.0);
  const double cp = std::hypot(m(2, 0), m(2, 2));
  if (cp < 1e-9) return std::nullopt;
  EulerPose p;
  p.pitch = std::atan2(sp, cp);
  p.yaw = std::atan2(-m(2, 0), m(2, 2));
  p.roll = std::atan2(-m(0, 1), m(1, 1));
  return p;
}

std::array<Eigen::Matrix3d, 3> rotation_jacobian(const EulerPose& p) {
  const Eigen::Matrix3d rz = rot_z(p.roll), rx = rot_x(p.pitch), ry = rot_y(p.yaw);
  return {rz * rx * d_rot_y(p.yaw), rz * d_rot_x(p.pitch) * ry, d_rot_z(p.roll) * rx * ry};
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(a.dot(b), -1.0 + kAcosEps, 1.0 - kAcosEps));
}

double angle_between(const UnitVec3& a, const UnitVec3& b) {
  return angle_between(a.vec(), b.vec());
}

double acos_clamped_derivative(double c) {
  if (c <= -1.0 + kAcosEps || c >= 1.0 - kAcosEps) return 0.0;
  return -1.0 / std::sqrt(1.0 - c * c);
}

double head_angle(const EulerPose& p) {
  const Eigen::Vector3d z = rotation_from_euler(p) * Eigen::Vector3d::UnitZ();
  return angle_between(z, Eigen::Vector3d::UnitZ());
}

double rig_constant(const EulerPose& p1, const EulerPose& p2) {
  const double sa1 = std::sin(p1.yaw), ca1 = std::cos(p1.yaw);
  const double sb1 = std::sin(p1.pitch), cb1 = std::cos(p1.pitch);
  const double sa2 = std::sin(p2.yaw), ca2 = std::cos(p2.yaw);
  const double sb2 = std::sin(p2.pitch), cb2 = std::cos(p2.pitch);
  // Grouped per pose so that swapping the arguments is bit-exact.
  return sb1 * sb2 + (sa1 * cb1) * (sa2 * cb2) + (ca1 * cb1) * (ca2 * cb2);
}

UnitVec3 to_head_cs(const Rotation& r, const UnitVec3& g) {
  return UnitVec3::from_unit(r.matrix().transpose() * g.vec());
}

Rotation denormalize(const NormalizationTransform& w, const Rotation& r) {
  return Rotation(w.w.matrix().transpose() * r.matrix());
}

}  // namespace gazeadapt
