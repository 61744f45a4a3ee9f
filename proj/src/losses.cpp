#include "gazeadapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gazeadapt/errors.hpp"

namespace gazeadapt {

PseudoLabel select_pseudo_label(const Prediction& p1, const Prediction& p2) {
  const double t1 = head_angle(p1.pose);
  const double t2 = head_angle(p2.pose);
  if (t1 <= t2) return {ReliableView::kFirst, to_head_cs(rotation_from_euler(p1.pose), p1.gaze)};
  return {ReliableView::kSecond, to_head_cs(rotation_from_euler(p2.pose), p2.gaze)};
}

double head_frame_angle(const Prediction& p, const UnitVec3& target, PredictionGrad* grad) {
  const Rotation r = rotation_from_euler(p.pose);
  const Eigen::Vector3d& g = p.gaze.vec();
  const Eigen::Vector3d& y = target.vec();
  // c = (R^T g) . y = g . (R y)
  const Eigen::Vector3d ry = r * y;
  const double c = g.dot(ry);
  const double value = std::acos(std::clamp(c, -1.0 + kAcosEps, 1.0 - kAcosEps));
  if (grad != nullptr) {
    const double dacos = acos_clamped_derivative(c);
    const auto jac = rotation_jacobian(p.pose);
    grad->gaze = dacos * ry;
    for (int k = 0; k < 3; ++k) grad->pose[k] = dacos * g.dot(jac[k] * y);
  }
  return value;
}

MutualLoss mutual_loss(const Prediction& p1, const Prediction& p2) {
  const PseudoLabel pl = select_pseudo_label(p1, p2);
  MutualLoss out;
  out.flag = pl.flag;
  if (pl.flag == ReliableView::kFirst)
    out.value = head_frame_angle(p2, pl.target, &out.grad2);
  else
    out.value = head_frame_angle(p1, pl.target, &out.grad1);
  return out;
}

void MomentumState::validate() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw InputError("momentum eta must lie in [0, 1)");
  if (!std::isfinite(c) || std::abs(c) > 1.0 + 1e-9)
    throw InputError("momentum value must be finite with |c| <= 1");
}

MomentumState update_momentum(const MomentumState& m, double f) {
  if (!std::isfinite(f)) throw NumericError("non-finite rig constant");
  return {m.eta * m.c + (1.0 - m.eta) * f, m.eta};
}

RigConstantEval denormalized_rig_constant(const EulerPose& pose1, const EulerPose& pose2,
                                          const NormalizationTransform& w1,
                                          const NormalizationTransform& w2) {
  const EulerPose q1{pose1.yaw, pose1.pitch, 0.0};
  const EulerPose q2{pose2.yaw, pose2.pitch, 0.0};
  // f = (R1^T a) . (R2^T b) with a = W1 e_z, b = W2 e_z.
  const Eigen::Vector3d a = w1.w.matrix().col(2);
  const Eigen::Vector3d b = w2.w.matrix().col(2);
  const Eigen::Matrix3d r1 = rotation_from_euler(q1).matrix();
  const Eigen::Matrix3d r2 = rotation_from_euler(q2).matrix();
  const Eigen::Vector3d u = r1.transpose() * a;
  const Eigen::Vector3d v = r2.transpose() * b;
  const auto j1 = rotation_jacobian(q1);
  const auto j2 = rotation_jacobian(q2);

  RigConstantEval e;
  e.f = u.dot(v);
  for (int k = 0; k < 2; ++k) {
    e.d_pose1[k] = (j1[k].transpose() * a).dot(v);
    e.d_pose2[k] = u.dot(j2[k].transpose() * b);
  }
  return e;
}

namespace {

double abs_subgradient(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

}  // namespace

StabilizationLoss stabilization_loss(std::span<const EulerPose> pose1,
                                     std::span<const EulerPose> pose2,
                                     std::span<const NormalizationTransform> w1,
                                     std::span<const NormalizationTransform> w2,
                                     const MomentumState& m) {
  const std::size_t n = pose1.size();
  if (n == 0 || pose2.size() != n || w1.size() != n || w2.size() != n)
    throw InputError("stabilization batch must be non-empty with matching sizes");

  std::vector<RigConstantEval> evals;
  evals.reserve(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    evals.push_back(denormalized_rig_constant(pose1[i], pose2[i], w1[i], w2[i]));
    sum += evals.back().f;
  }
  StabilizationLoss out;
  out.f = sum / static_cast<double>(n);
  out.value = std::abs(out.f - m.c);
  const double scale = abs_subgradient(out.f - m.c) / static_cast<double>(n);
  out.grad1.resize(n);
  out.grad2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.grad1[i].pose = scale * evals[i].d_pose1;
    out.grad2[i].pose = scale * evals[i].d_pose2;
  }
  return out;
}

StabilizationLoss stabilization_loss(const EulerPose& pose1, const EulerPose& pose2,
                                     const NormalizationTransform& w1,
                                     const NormalizationTransform& w2, const MomentumState& m) {
  return stabilization_loss(std::span(&pose1, 1), std::span(&pose2, 1), std::span(&w1, 1),
                            std::span(&w2, 1), m);
}

double pretrain_loss(const UnitVec3& pred, const UnitVec3& label, PredictionGrad* grad) {
  const double c = pred.vec().dot(label.vec());
  if (grad != nullptr) {
    grad->gaze = acos_clamped_derivative(c) * label.vec();
    grad->pose.setZero();
  }
  return std::acos(std::clamp(c, -1.0 + kAcosEps, 1.0 - kAcosEps));
}

double pose_l1_loss(const EulerPose& pred, const EulerPose& label, PredictionGrad* grad) {
  const double d[3] = {wrap_angle(pred.yaw - label.yaw), wrap_angle(pred.pitch - label.pitch),
                       wrap_angle(pred.roll - label.roll)};
  double value = 0.0;
  for (double x : d) value += std::abs(x);
  if (grad != nullptr) {
    grad->gaze.setZero();
    for (int k = 0; k < 3; ++k) grad->pose[k] = abs_subgradient(d[k]) / 3.0;
  }
  return value / 3.0;
}

LossBreakdown total_loss(double l_mut, double l_stb, double l_pre, double lambda_stb,
                         double lambda_pre) {
  LossBreakdown b;
  b.l_mut = l_mut;
  b.l_stb = l_stb;
  b.l_pre = l_pre;
  b.lambda_stb = lambda_stb;
  b.lambda_pre = lambda_pre;
  b.total = l_mut + lambda_stb * l_stb + lambda_pre * l_pre;
  if (!std::isfinite(b.total)) throw NumericError("non-finite total loss");
  return b;
}

}  // namespace gazeadapt
