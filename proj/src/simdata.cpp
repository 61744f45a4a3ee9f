#include "gazeadapt/simdata.hpp"

#include <algorithm>
#include <cmath>

#include "gazeadapt/errors.hpp"

namespace gazeadapt {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream ^ splitmix64(index))));
}

CameraExtrinsics camera_looking_at_origin(double yaw, double pitch, double distance) {
  const Eigen::Matrix3d cam_to_world = rot_y(yaw) * rot_x(pitch);
  CameraExtrinsics e;
  e.rotation = Rotation(cam_to_world.transpose());
  e.translation = Eigen::Vector3d(0.0, 0.0, distance);
  return e;
}

double Rig::relative_angle() const {
  const Eigen::Matrix3d rel = cam1.rotation.matrix() * cam2.rotation.matrix().transpose();
  return std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
}

Rig make_rig(double yaw, double distance, std::string id) {
  Rig r{camera_looking_at_origin(0.0, 0.0, distance), camera_looking_at_origin(yaw, 0.0, distance),
        std::move(id)};
  if (r.relative_angle() <= 1e-6) throw InputError("rig cameras must be distinct");
  return r;
}

Rig make_random_rig(std::uint64_t seed, double distance) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x716ULL));
  double yaw = uniform(rng, deg2rad(20.0), deg2rad(90.0));
  if (std::generate_canonical<double, 53>(rng) < 0.5) yaw = -yaw;
  return make_rig(yaw, distance, "random-" + std::to_string(seed));
}

void SceneRanges::validate() const {
  if (!(yaw_min <= yaw_max) || !(pitch_min <= pitch_max) || !(roll_max >= 0.0) ||
      !(gaze_cone >= 0.0) || !(position_jitter >= 0.0))
    throw InputError("scene ranges are empty or negative");
  if (gaze_cone > kPi / 2) throw InputError("gaze cone half-angle must be at most 90 degrees");
}

SubjectState sample_scene(std::mt19937_64& rng, const SceneRanges& r) {
  r.validate();
  const double yaw = uniform(rng, r.yaw_min, r.yaw_max);
  const double pitch = uniform(rng, r.pitch_min, r.pitch_max);
  const double roll = uniform(rng, -r.roll_max, r.roll_max);
  SubjectState s;
  s.head = Rotation(rot_y(yaw) * rot_x(pitch) * rot_z(roll));
  for (int k = 0; k < 3; ++k) s.position[k] = uniform(rng, -r.position_jitter, r.position_jitter);

  const double c = 1.0 - std::generate_canonical<double, 53>(rng) * (1.0 - std::cos(r.gaze_cone));
  const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double phi = uniform(rng, 0.0, 2.0 * kPi);
  const Eigen::Vector3d local(sn * std::cos(phi), sn * std::sin(phi), c);
  s.gaze = UnitVec3(s.head * local);
  return s;
}

ViewTruth project_to_camera(const CameraExtrinsics& cam, const SubjectState& s) {
  ViewTruth t;
  t.gaze = cam.rotation * s.gaze;
  t.head = cam.rotation * s.head;
  t.head_position = cam.to_camera(s.position);
  return t;
}

std::optional<ViewLabels> labels_from_truth(const Rotation& head, const UnitVec3& gaze) {
  const auto pose = euler_from_rotation(head);
  if (!pose) return std::nullopt;
  return ViewLabels{gaze, *pose, head_angle(*pose)};
}

NormalizationTransform make_normalization(const CameraExtrinsics& cam, const SubjectState& s) {
  const Eigen::Vector3d c = cam.to_camera(s.position);
  if (!(c.z() > 0.0)) throw InputError("subject is behind the camera");
  const Eigen::Vector3d d = c.normalized();
  const Eigen::Vector3d x = Eigen::Vector3d::UnitY().cross(d).normalized();
  const Eigen::Vector3d y = d.cross(x);
  Eigen::Matrix3d w0;
  w0.row(0) = x.transpose();
  w0.row(1) = y.transpose();
  w0.row(2) = d.transpose();

  const auto pose = euler_from_rotation(Rotation(w0 * (cam.rotation * s.head).matrix()));
  if (!pose) throw InputError("degenerate head pose in normalized space");
  return {Rotation(rot_z(-pose->roll) * w0)};
}

AppearanceEmbedding AppearanceEmbedding::make(std::size_t dim, std::uint64_t seed,
                                              double gaze_scale, double pose_scale) {
  if (dim == 0) throw InputError("feature dimension must be positive");
  if (!(gaze_scale >= 0.0) || !(pose_scale >= 0.0))
    throw InputError("embedding scales must be >= 0");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  AppearanceEmbedding e;
  e.a.resize(static_cast<Eigen::Index>(dim), 9);
  e.b.resize(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < e.a.rows(); ++i)
    for (Eigen::Index j = 0; j < 9; ++j) e.a(i, j) = (j < 3 ? gaze_scale : pose_scale) * normal(rng);
  for (Eigen::Index i = 0; i < e.b.size(); ++i) e.b[i] = uniform(rng, 0.0, 2.0 * kPi);
  return e;
}

double NoiseConfig::sigma(double theta) const {
  const double r = theta / (kPi / 2.0);
  return sigma0 + sigma1 * r * r;
}

FeatureVec appearance_features(const AppearanceEmbedding& emb, const Rotation& head,
                               const UnitVec3& gaze, double theta, std::mt19937_64& rng,
                               const NoiseConfig& noise) {
  if (noise.sigma0 < 0.0 || noise.sigma1 < 0.0) throw InputError("noise sigmas must be >= 0");
  Eigen::Matrix<double, 9, 1> u;
  u.segment<3>(0) = gaze.vec();
  u.segment<3>(3) = head.matrix().col(0);
  u.segment<3>(6) = head.matrix().col(1);
  const Eigen::VectorXd z = emb.a * u + emb.b;
  const double sigma = noise.sigma(theta);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureVec x(emb.dim());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eps = normal(rng);
    x[i] = std::sin(z[static_cast<Eigen::Index>(i)]) + sigma * eps;
  }
  return x;
}

namespace {

struct NormalizedView {
  NormalizationTransform w;
  ViewLabels labels;
  Rotation head;
};

std::optional<NormalizedView> normalize_view(const CameraExtrinsics& cam, const SubjectState& s) {
  NormalizationTransform w;
  try {
    w = make_normalization(cam, s);
  } catch (const InputError&) {
    return std::nullopt;
  }
  const ViewTruth t = project_to_camera(cam, s);
  const Rotation head = w.w * t.head;
  const UnitVec3 gaze = w.w * t.gaze;
  auto labels = labels_from_truth(head, gaze);
  if (!labels) return std::nullopt;
  return NormalizedView{w, *labels, head};
}

}  // namespace

std::optional<DualViewSample> make_dual_sample(const AppearanceEmbedding& emb, const Rig& rig,
                                               const SubjectState& s, std::mt19937_64& rng,
                                               const NoiseConfig& noise) {
  const auto v1 = normalize_view(rig.cam1, s);
  const auto v2 = normalize_view(rig.cam2, s);
  if (!v1 || !v2) return std::nullopt;
  DualViewSample out;
  out.obs.w1 = v1->w;
  out.obs.w2 = v2->w;
  out.obs.x1 = appearance_features(emb, v1->head, v1->labels.gaze, v1->labels.theta, rng, noise);
  out.obs.x2 = appearance_features(emb, v2->head, v2->labels.gaze, v2->labels.theta, rng, noise);
  out.labels = {v1->labels, v2->labels};
  out.world = {s, rig};
  return out;
}

SingleViewSet generate_single_view(const GeneratorSettings& g, const AppearanceEmbedding& emb,
                                   const SceneRanges& ranges, double distance, std::size_t count,
                                   std::uint64_t stream) {
  ranges.validate();
  const CameraExtrinsics cam = camera_looking_at_origin(0.0, 0.0, distance);
  SingleViewSet set;
  set.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = sample_rng(g.seed, stream, i);
    for (;;) {
      const SubjectState s = sample_scene(rng, ranges);
      const auto v = normalize_view(cam, s);
      if (!v) continue;
      SingleViewSample sample;
      sample.id = i;
      sample.w = v->w;
      sample.labels = v->labels;
      sample.x = appearance_features(emb, v->head, v->labels.gaze, v->labels.theta, rng, g.noise);
      set.samples.push_back(std::move(sample));
      break;
    }
  }
  return set;
}

DualViewSet generate_dual_view(const GeneratorSettings& g, const AppearanceEmbedding& emb,
                               const Rig& rig, const SceneRanges& ranges, std::size_t count,
                               std::uint64_t stream) {
  ranges.validate();
  DualViewSet set;
  set.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = sample_rng(g.seed, stream, i);
    for (;;) {
      const SubjectState s = sample_scene(rng, ranges);
      auto sample = make_dual_sample(emb, rig, s, rng, g.noise);
      if (!sample) continue;
      sample->obs.id = i;
      set.samples.push_back(std::move(*sample));
      break;
    }
  }
  return set;
}

SceneRanges rig_scene_ranges(const Rig& rig, double yaw_margin, double pitch, double roll,
                             double gaze_cone, double jitter) {
  // Camera yaw about the subject, read off the optical axis in world.
  auto cam_yaw = [](const CameraExtrinsics& c) {
    const Eigen::Vector3d axis = c.rotation.matrix().transpose().col(2);
    return std::atan2(axis.x(), axis.z());
  };
  const double y1 = cam_yaw(rig.cam1), y2 = cam_yaw(rig.cam2);
  SceneRanges r;
  r.yaw_min = std::min(y1, y2) - yaw_margin;
  r.yaw_max = std::max(y1, y2) + yaw_margin;
  r.pitch_min = -pitch;
  r.pitch_max = pitch;
  r.roll_max = roll;
  r.gaze_cone = gaze_cone;
  r.position_jitter = jitter;
  return r;
}

// ---------------------------------------------------------------------------

void MultiCamRecording::validate() const {
  if (cameras.size() < 2) throw InputError("a recording needs at least two cameras");
  for (const auto& f : frames)
    if (f.labels.size() != cameras.size())
      throw InputError("frame label count does not match camera count");
}

MultiCamRecording generate_recording(const RecordingSettings& s) {
  if (s.cameras < 2) throw InputError("a recording needs at least two cameras");
  MultiCamRecording rec;
  const std::size_t cols = (s.cameras + 2) / 3;
  for (std::size_t k = 0; k < s.cameras; ++k) {
    const double pitch = deg2rad(-20.0 + 20.0 * static_cast<double>(k % 3));
    const std::size_t col = k / 3;
    const double yaw =
        cols > 1 ? deg2rad(-60.0 + 120.0 * static_cast<double>(col) / static_cast<double>(cols - 1))
                 : 0.0;
    rec.cameras.push_back(camera_looking_at_origin(yaw, pitch, s.camera_distance));
  }

  SceneRanges ranges;
  ranges.yaw_min = deg2rad(-30.0);
  ranges.yaw_max = deg2rad(30.0);
  ranges.pitch_min = deg2rad(-15.0);
  ranges.pitch_max = deg2rad(15.0);
  ranges.roll_max = deg2rad(10.0);
  ranges.gaze_cone = deg2rad(25.0);
  ranges.position_jitter = 0.05;

  for (std::size_t i = 0; i < s.frames; ++i) {
    auto rng = sample_rng(s.seed, 0xca3, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      const SubjectState subj = sample_scene(rng, ranges);
      const Eigen::Vector3d target = subj.position + s.target_distance * subj.gaze.vec();
      RecordingFrame frame;
      bool ok = true;
      for (const auto& cam : rec.cameras) {
        const auto pose = euler_from_rotation(cam.rotation * subj.head);
        if (!pose) {
          ok = false;
          break;
        }
        CameraLabel l;
        l.rotation = Eigen::Vector3d(pose->yaw, pose->pitch, pose->roll);
        for (int k = 0; k < 3; ++k) l.rotation[k] += s.rotation_noise * normal(rng);
        l.position = cam.to_camera(subj.position);
        for (int k = 0; k < 3; ++k) l.position[k] += s.position_noise * normal(rng);
        l.target = cam.to_camera(target);
        frame.labels.push_back(l);
      }
      if (!ok) continue;
      rec.frames.push_back(std::move(frame));
      break;
    }
  }
  return rec;
}

std::vector<std::vector<Eigen::Vector3d>> refine_head_positions(const MultiCamRecording& rec) {
  rec.validate();
  const std::size_t k = rec.cameras.size();
  std::vector<std::vector<Eigen::Vector3d>> out;
  out.reserve(rec.frames.size());
  for (const auto& frame : rec.frames) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < k; ++i) mean += rec.cameras[i].to_world(frame.labels[i].position);
    mean /= static_cast<double>(k);
    std::vector<Eigen::Vector3d> refined(k);
    for (std::size_t i = 0; i < k; ++i) refined[i] = rec.cameras[i].to_camera(mean);
    out.push_back(std::move(refined));
  }
  return out;
}

namespace {

struct GazeSpread {
  double variance = 0.0;
  std::vector<Eigen::Vector3d> grad;  // d variance / d correction, per camera
};

GazeSpread gaze_spread(const RecordingFrame& frame, std::span<const Eigen::Vector3d> positions,
                       std::span<const Eigen::Vector3d> corrections, bool with_grad) {
  const std::size_t k = frame.labels.size();
  if (positions.size() != k || corrections.size() != k)
    throw InputError("positions / corrections must have one entry per camera");
  std::vector<Eigen::Vector3d> gaze(k), u(k);
  std::vector<EulerPose> poses(k);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < k; ++i) {
    const Eigen::Vector3d h = frame.labels[i].rotation + corrections[i];
    poses[i] = {h[0], h[1], h[2]};
    gaze[i] = (frame.labels[i].target - positions[i]).normalized();
    u[i] = rotation_from_euler(poses[i]).matrix().transpose() * gaze[i];
    mean += u[i];
  }
  mean /= static_cast<double>(k);
  GazeSpread out;
  for (std::size_t i = 0; i < k; ++i) out.variance += (u[i] - mean).squaredNorm();
  out.variance /= static_cast<double>(k);
  if (with_grad) {
    out.grad.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Vector3d du = 2.0 / static_cast<double>(k) * (u[i] - mean);
      const auto jac = rotation_jacobian(poses[i]);
      for (int a = 0; a < 3; ++a) out.grad[i][a] = du.dot(jac[a].transpose() * gaze[i]);
    }
  }
  return out;
}

double smoothed_l1(std::span<const Eigen::Vector3d> c, double eps) {
  double s = 0.0;
  for (const auto& v : c)
    for (int a = 0; a < 3; ++a) s += std::sqrt(v[a] * v[a] + eps * eps);
  return s;
}

}  // namespace

double head_frame_gaze_variance(const RecordingFrame& frame,
                                std::span<const Eigen::Vector3d> positions,
                                std::span<const Eigen::Vector3d> corrections) {
  return gaze_spread(frame, positions, corrections, false).variance;
}

FrameRefinement refine_head_rotations(const RecordingFrame& frame,
                                      std::span<const Eigen::Vector3d> positions,
                                      const RotationRefineOptions& opt, bool keep_trace) {
  if (opt.delta < 0.0) throw InputError("delta must be >= 0");
  const std::size_t k = frame.labels.size();
  std::vector<Eigen::Vector3d> dh(k, Eigen::Vector3d::Zero());

  auto objective = [&](std::span<const Eigen::Vector3d> c) {
    const double v = gaze_spread(frame, positions, c, false).variance +
                     opt.delta * smoothed_l1(c, opt.smooth_eps);
    if (!std::isfinite(v)) throw NumericError("refinement objective is not finite");
    return v;
  };

  FrameRefinement out;
  out.variance_initial = head_frame_gaze_variance(frame, positions, dh);
  double current = objective(dh);
  out.objective_initial = current;

  std::vector<Eigen::Vector3d> trial(k);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    const GazeSpread s = gaze_spread(frame, positions, dh, true);
    std::vector<Eigen::Vector3d> grad = s.grad;
    for (std::size_t i = 0; i < k; ++i)
      for (int a = 0; a < 3; ++a)
        grad[i][a] += opt.delta * dh[i][a] /
                      std::sqrt(dh[i][a] * dh[i][a] + opt.smooth_eps * opt.smooth_eps);

    double lr = opt.step_size;
    bool accepted = false;
    while (lr > 1e-12) {
      for (std::size_t i = 0; i < k; ++i) trial[i] = dh[i] - lr * grad[i];
      const double candidate = objective(trial);
      if (candidate <= current) {
        dh.swap(trial);
        current = candidate;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (keep_trace) out.objective_trace.push_back(current);
    if (!accepted) break;
  }
  out.corrections = std::move(dh);
  out.objective_final = current;
  out.variance_final = head_frame_gaze_variance(frame, positions, out.corrections);
  return out;
}

}  // namespace gazeadapt
