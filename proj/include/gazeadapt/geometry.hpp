#pragma once

// Rotation and angle arithmetic shared by the estimator, the losses and the
// simulator. Angles are radians everywhere.
//
// Euler convention: R(yaw, pitch, roll) = Rz(roll) * Rx(pitch) * Ry(yaw).
// With this ordering the third row of R is
//   (-sin(yaw) cos(pitch), sin(pitch), cos(yaw) cos(pitch))
// so roll never reaches the (3,3) element of R1 * R2^T, and the head angle
// arccos(cos(yaw) cos(pitch)) is independent of roll.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>

namespace gazeadapt {

inline constexpr double kPi = 3.14159265358979323846;

/// Clamp applied to every arccos argument: [-1 + kAcosEps, 1 - kAcosEps].
inline constexpr double kAcosEps = 1e-7;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Head pose as yaw / pitch / roll.
struct EulerPose {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  friend bool operator==(const EulerPose&, const EulerPose&) = default;
};

/// A 3-vector of unit length. Construction normalizes; `from_unit` trusts the
/// caller.
class UnitVec3 {
 public:
  UnitVec3() : v_(0.0, 0.0, 1.0) {}
  explicit UnitVec3(const Eigen::Vector3d& v) : v_(v.normalized()) {}
  UnitVec3(double x, double y, double z) : UnitVec3(Eigen::Vector3d(x, y, z)) {}

  static UnitVec3 from_unit(const Eigen::Vector3d& v) {
    UnitVec3 u;
    u.v_ = v;
    return u;
  }

  const Eigen::Vector3d& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }

  friend bool operator==(const UnitVec3& a, const UnitVec3& b) { return a.v_ == b.v_; }

 private:
  Eigen::Vector3d v_;
};

/// Proper rotation matrix (orthonormal, det = +1).
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Rotation(const Eigen::Matrix3d& m) : m_(m) {}

  static Rotation identity() { return Rotation(); }
  /// Builds from 9 row-major entries.
  static Rotation from_row_major(const std::array<double, 9>& rm);
  std::array<double, 9> row_major() const;

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation transpose() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }
  UnitVec3 operator*(const UnitVec3& v) const { return UnitVec3::from_unit(m_ * v.vec()); }

  /// max |M^T M - I| and |det M - 1| both below tol.
  bool is_valid(double tol = 1e-9) const;

  friend bool operator==(const Rotation& a, const Rotation& b) { return a.m_ == b.m_; }

 private:
  Eigen::Matrix3d m_;
};

/// Rotational part of the image-normalization warp of one view. Maps camera
/// coordinates into normalized-camera coordinates.
struct NormalizationTransform {
  Rotation w;
};

Eigen::Matrix3d rot_x(double a);
Eigen::Matrix3d rot_y(double a);
Eigen::Matrix3d rot_z(double a);

/// Derivatives of the elementary rotations with respect to their angle.
Eigen::Matrix3d d_rot_x(double a);
Eigen::Matrix3d d_rot_y(double a);
Eigen::Matrix3d d_rot_z(double a);

Rotation rotation_from_euler(const EulerPose& p);

/// Inverse of rotation_from_euler. Returns nullopt at gimbal degeneracy
/// (|cos(pitch)| < 1e-9).
std::optional<EulerPose> euler_from_rotation(const Rotation& r);

/// Partial derivatives of rotation_from_euler with respect to yaw, pitch, roll.
std::array<Eigen::Matrix3d, 3> rotation_jacobian(const EulerPose& p);

/// arccos of the clamped dot product of two unit vectors.
double angle_between(const UnitVec3& a, const UnitVec3& b);
double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// d/dc arccos(clamp(c)); zero where the clamp is active.
double acos_clamped_derivative(double c);

/// Angle between the head z-axis and the camera z-axis.
double head_angle(const EulerPose& p);

/// (3,3) element of R(p1) * R(p2)^T written out in closed form.
double rig_constant(const EulerPose& p1, const EulerPose& p2);

/// Expresses a camera-frame gaze in the head frame: R^T g.
UnitVec3 to_head_cs(const Rotation& r, const UnitVec3& g);

/// Undoes the normalization warp on a pose: W^{-1} R = W^T R.
Rotation denormalize(const NormalizationTransform& w, const Rotation& r);

}  // namespace gazeadapt
