#pragma once

// Synthetic subjects, camera rigs and appearance features with exact
// ground truth, plus the multi-camera label refinement used when preparing
// data where extrinsics are known.
//
// World frame: the subject's nominal head position is the origin. A camera
// "looking at" the subject from yaw phi sits at -distance * Ry(phi) e_z.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gazeadapt/geometry.hpp"
#include "gazeadapt/model.hpp"

namespace gazeadapt {

/// x_camera = rotation * x_world + translation (meters).
struct CameraExtrinsics {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p) const {
    return rotation.matrix().transpose() * (p - translation);
  }
};

/// Camera at `distance` from the origin, rotated by yaw (about world y) then
/// pitch (about its own x), optical axis through the origin.
CameraExtrinsics camera_looking_at_origin(double yaw, double pitch, double distance);

struct Rig {
  CameraExtrinsics cam1;
  CameraExtrinsics cam2;
  std::string id;

  /// Angle of the relative rotation between the two cameras.
  double relative_angle() const;
};

/// Camera 1 frontal, camera 2 yawed by `yaw` about the subject.
Rig make_rig(double yaw, double distance, std::string id = "default");
/// Relative yaw uniform in [20 deg, 90 deg] with random sign.
Rig make_random_rig(std::uint64_t seed, double distance);

struct SubjectState {
  Rotation head;                    // head -> world
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  UnitVec3 gaze;                    // world
};

/// Sampling box for subjects. Head rotation is Ry(yaw) Rx(pitch) Rz(roll) in
/// the world frame; gaze is uniform on the spherical cap of the given
/// half-angle around the head z-axis.
struct SceneRanges {
  double yaw_min = 0.0, yaw_max = 0.0;
  double pitch_min = 0.0, pitch_max = 0.0;
  double roll_max = 0.0;
  double gaze_cone = 0.0;
  double position_jitter = 0.0;  // meters, per axis, uniform +-

  void validate() const;
};

SubjectState sample_scene(std::mt19937_64& rng, const SceneRanges& ranges);

/// Labels of one view, in whatever frame the caller states.
struct ViewLabels {
  UnitVec3 gaze;
  EulerPose pose;
  double theta = 0.0;
};

struct ViewTruth {
  UnitVec3 gaze;
  Rotation head;
  Eigen::Vector3d head_position = Eigen::Vector3d::Zero();
};

/// Camera-frame ground truth for one view.
ViewTruth project_to_camera(const CameraExtrinsics& cam, const SubjectState& s);

/// Euler labels of a camera-frame truth; nullopt at gimbal degeneracy.
std::optional<ViewLabels> labels_from_truth(const Rotation& head, const UnitVec3& gaze);

/// Rotation taking the camera->head direction onto +z with the roll chosen
/// so the normalized head pose has zero roll. Throws InputError if the head
/// is behind the camera.
NormalizationTransform make_normalization(const CameraExtrinsics& cam, const SubjectState& s);

/// Fixed sinusoidal embedding x = sin(A u + b), u = [g; R e_x; R e_y].
/// Columns of A acting on g are N(0, gaze_scale^2), those acting on the
/// head axes N(0, pose_scale^2).
struct AppearanceEmbedding {
  Eigen::MatrixXd a;  // d x 9
  Eigen::VectorXd b;  // d

  static AppearanceEmbedding make(std::size_t dim, std::uint64_t seed, double gaze_scale,
                                  double pose_scale);
  std::size_t dim() const { return static_cast<std::size_t>(b.size()); }
};

struct NoiseConfig {
  double sigma0 = 0.05;
  double sigma1 = 0.1;

  /// sigma0 + sigma1 * (theta / (pi/2))^2
  double sigma(double theta) const;
};

/// Features of one normalized view; `rng` supplies the Gaussian noise.
FeatureVec appearance_features(const AppearanceEmbedding& emb, const Rotation& head,
                               const UnitVec3& gaze, double theta, std::mt19937_64& rng,
                               const NoiseConfig& noise);

/// Per-sample generator seeded from (seed, stream, index).
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// ---------------------------------------------------------------------------
// Datasets

struct SingleViewSample {
  std::uint64_t id = 0;
  FeatureVec x;
  NormalizationTransform w;
  ViewLabels labels;  // normalized space
};

/// What the adaptation path is allowed to see of a dual-view sample.
struct DualViewObservation {
  std::uint64_t id = 0;
  FeatureVec x1, x2;
  NormalizationTransform w1, w2;
};

/// Evaluation-only labels, normalized space per view.
struct DualViewLabels {
  ViewLabels view1, view2;
};

struct WorldTruth {
  SubjectState subject;
  Rig rig;
};

struct DualViewSample {
  DualViewObservation obs;
  DualViewLabels labels;
  WorldTruth world;
};

struct SingleViewSet {
  std::vector<SingleViewSample> samples;
};

struct DualViewSet {
  std::vector<DualViewSample> samples;
};

struct GeneratorSettings {
  std::uint64_t seed = 1;
  std::size_t feature_dim = 32;
  std::uint64_t embedding_seed = 0x5eed;
  double embedding_gaze_scale = 1.0;
  double embedding_pose_scale = 1.0;
  NoiseConfig noise;
};

/// Samples from a single frontal camera.
SingleViewSet generate_single_view(const GeneratorSettings& g, const AppearanceEmbedding& emb,
                                   const SceneRanges& ranges, double distance, std::size_t count,
                                   std::uint64_t stream);

DualViewSet generate_dual_view(const GeneratorSettings& g, const AppearanceEmbedding& emb,
                               const Rig& rig, const SceneRanges& ranges, std::size_t count,
                               std::uint64_t stream);

/// Builds one dual-view sample from a subject; nullopt when either view is
/// degenerate (gimbal or head behind a camera).
std::optional<DualViewSample> make_dual_sample(const AppearanceEmbedding& emb, const Rig& rig,
                                               const SubjectState& s, std::mt19937_64& rng,
                                               const NoiseConfig& noise);

/// Yaw range that covers both cameras of a rig plus a margin.
SceneRanges rig_scene_ranges(const Rig& rig, double yaw_margin, double pitch, double roll,
                             double gaze_cone, double jitter);

// ---------------------------------------------------------------------------
// Multi-camera label refinement

struct CameraLabel {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // head position, camera frame
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // yaw, pitch, roll, camera frame
  Eigen::Vector3d target = Eigen::Vector3d::Zero();    // gaze target, camera frame
};

struct RecordingFrame {
  std::vector<CameraLabel> labels;  // one per camera
};

struct MultiCamRecording {
  std::vector<CameraExtrinsics> cameras;
  std::vector<RecordingFrame> frames;

  void validate() const;
};

struct RecordingSettings {
  std::uint64_t seed = 1;
  std::size_t cameras = 18;
  std::size_t frames = 100;
  double rotation_noise = deg2rad(2.0);
  double position_noise = 0.01;
  double target_distance = 0.8;
  double camera_distance = 1.0;
};

MultiCamRecording generate_recording(const RecordingSettings& s);

/// Per frame: every camera's head position mapped to world, averaged, and
/// mapped back. Result is indexed [frame][camera] in camera frames.
std::vector<std::vector<Eigen::Vector3d>> refine_head_positions(const MultiCamRecording& rec);

struct RotationRefineOptions {
  double delta = 1e-4;
  std::size_t steps = 2000;
  double step_size = 1e-2;
  double smooth_eps = 1e-6;
};

struct FrameRefinement {
  std::vector<Eigen::Vector3d> corrections;  // per camera, yaw/pitch/roll
  double objective_initial = 0.0;
  double objective_final = 0.0;
  double variance_initial = 0.0;
  double variance_final = 0.0;
  std::vector<double> objective_trace;  // after each accepted step, if requested
};

/// Trace of the covariance of R(h_i)^T g_i across cameras, with g_i the unit
/// vector from `positions[i]` to the frame's gaze target.
double head_frame_gaze_variance(const RecordingFrame& frame,
                                std::span<const Eigen::Vector3d> positions,
                                std::span<const Eigen::Vector3d> corrections);

/// Minimizes variance + delta * sum |dh| (smoothed) by gradient descent with
/// backtracking, starting from zero corrections.
FrameRefinement refine_head_rotations(const RecordingFrame& frame,
                                      std::span<const Eigen::Vector3d> positions,
                                      const RotationRefineOptions& opt, bool keep_trace = false);

}  // namespace gazeadapt
