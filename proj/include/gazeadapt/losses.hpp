#pragma once

// Adaptation objectives and their gradients with respect to predictions.
// Gradients are returned as PredictionGrad so the caller can chain them
// through model::backward; nothing here touches network parameters.

#include <span>
#include <vector>

#include "gazeadapt/geometry.hpp"
#include "gazeadapt/model.hpp"

namespace gazeadapt {

inline constexpr double kDefaultLambdaStb = 50.0;
inline constexpr double kDefaultLambdaPre = 10.0;
inline constexpr double kDefaultMomentum = 0.99;

enum class ReliableView : int { kFirst = 0, kSecond = 1 };

struct PseudoLabel {
  ReliableView flag = ReliableView::kFirst;
  UnitVec3 target;  // head coordinate system; treated as a constant
};

/// Picks the view with the smaller predicted head angle (ties go to the
/// first view) and returns its head-frame gaze as the target.
PseudoLabel select_pseudo_label(const Prediction& p1, const Prediction& p2);

struct MutualLoss {
  double value = 0.0;
  ReliableView flag = ReliableView::kFirst;
  PredictionGrad grad1;  // zero when view 1 produced the pseudo label
  PredictionGrad grad2;  // zero when view 2 produced the pseudo label
};

/// Angle between the less reliable view's head-frame gaze and the pseudo
/// label. Gradient flows through that view's gaze and pose only.
MutualLoss mutual_loss(const Prediction& p1, const Prediction& p2);

/// Angle between a head-frame gaze R^T g and a fixed target, with gradient.
double head_frame_angle(const Prediction& p, const UnitVec3& target, PredictionGrad* grad);

struct MomentumState {
  double c = 1.0;
  double eta = kDefaultMomentum;

  void validate() const;
};

/// c' = eta * c + (1 - eta) * f
MomentumState update_momentum(const MomentumState& m, double f);

/// (3,3) element of (W1^T R(yaw1, pitch1, 0)) (W2^T R(yaw2, pitch2, 0))^T
/// and its partials. Roll is excluded, so the roll partials are zero.
struct RigConstantEval {
  double f = 0.0;
  Eigen::Vector3d d_pose1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_pose2 = Eigen::Vector3d::Zero();
};
RigConstantEval denormalized_rig_constant(const EulerPose& pose1, const EulerPose& pose2,
                                          const NormalizationTransform& w1,
                                          const NormalizationTransform& w2);

struct StabilizationLoss {
  double value = 0.0;
  double f = 0.0;  // batch mean for the batched form
  std::vector<PredictionGrad> grad1;
  std::vector<PredictionGrad> grad2;
};

/// |f - C| for one pair; subgradient 0 at f == C.
StabilizationLoss stabilization_loss(const EulerPose& pose1, const EulerPose& pose2,
                                     const NormalizationTransform& w1,
                                     const NormalizationTransform& w2, const MomentumState& m);

/// |mean_i f_i - C| over a batch of pairs.
StabilizationLoss stabilization_loss(std::span<const EulerPose> pose1,
                                     std::span<const EulerPose> pose2,
                                     std::span<const NormalizationTransform> w1,
                                     std::span<const NormalizationTransform> w2,
                                     const MomentumState& m);

/// Angular error between a predicted and a labelled gaze, gradient on the
/// prediction's gaze only.
double pretrain_loss(const UnitVec3& pred, const UnitVec3& label, PredictionGrad* grad);

/// Mean of the three wrapped absolute angle differences.
double pose_l1_loss(const EulerPose& pred, const EulerPose& label, PredictionGrad* grad);

struct LossBreakdown {
  double l_mut = 0.0;
  double l_stb = 0.0;
  double l_pre = 0.0;
  double lambda_stb = kDefaultLambdaStb;
  double lambda_pre = kDefaultLambdaPre;
  double total = 0.0;
  std::vector<ReliableView> flags;
};

LossBreakdown total_loss(double l_mut, double l_stb, double l_pre,
                         double lambda_stb = kDefaultLambdaStb,
                         double lambda_pre = kDefaultLambdaPre);

}  // namespace gazeadapt
