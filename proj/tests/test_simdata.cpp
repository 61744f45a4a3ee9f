#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "gazeadapt/dataset_io.hpp"
#include "gazeadapt/errors.hpp"
#include "gazeadapt/losses.hpp"
#include "gazeadapt/simdata.hpp"
#include "test_util.hpp"

using namespace gazeadapt;
using namespace gazeadapt::testing;

namespace {

// Percent variance reduction at delta = 0.01 on the 20-frame default
// recording, after position refinement.
constexpr double kHeavyReduction = 0.0349582;

SceneRanges wide_ranges() {
  SceneRanges r;
  r.yaw_min = -deg2rad(60);
  r.yaw_max = deg2rad(60);
  r.pitch_min = -deg2rad(25);
  r.pitch_max = deg2rad(25);
  r.roll_max = deg2rad(15);
  r.gaze_cone = deg2rad(35);
  r.position_jitter = 0.05;
  return r;
}

Eigen::Vector3d head_frame_label(const ViewLabels& l) {
  return rotation_from_euler(l.pose).matrix().transpose() * l.gaze.vec();
}

std::filesystem::path temp_dir() {
  const auto d = std::filesystem::temp_directory_path() / "gazeadapt_simdata_test";
  std::filesystem::create_directories(d);
  return d;
}

double max_abs(const std::vector<Eigen::Vector3d>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST(Simdata, GroundTruthViewsAgreeInHeadFrame) {
  const Rig rig = make_rig(deg2rad(50), 1.0);
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const auto set = generate_dual_view(g, emb, rig, wide_ranges(), 10000, 0);
  ASSERT_EQ(set.samples.size(), 10000u);
  double worst = 0.0;
  for (const auto& s : set.samples) {
    const Eigen::Vector3d a = head_frame_label(s.labels.view1);
    const Eigen::Vector3d b = head_frame_label(s.labels.view2);
    // atan2 form: arccos would hide everything below the clamp.
    worst = std::max(worst, std::atan2(a.cross(b).norm(), a.dot(b)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Simdata, GroundTruthRigConstantIsConstant) {
  const Rig rig = make_rig(deg2rad(50), 1.0);
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const auto set = generate_dual_view(g, emb, rig, wide_ranges(), 10000, 0);
  const double expected =
      (rig.cam1.rotation.matrix() * rig.cam2.rotation.matrix().transpose())(2, 2);
  double sum = 0.0, sq = 0.0;
  for (const auto& s : set.samples) {
    const double f = denormalized_rig_constant(s.labels.view1.pose, s.labels.view2.pose,
                                               s.obs.w1, s.obs.w2).f;
    EXPECT_NEAR(f, expected, 1e-9);
    sum += f;
    sq += f * f;
  }
  const double n = static_cast<double>(set.samples.size());
  const double mean = sum / n;
  EXPECT_LT(std::sqrt(std::max(0.0, sq / n - mean * mean)), 1e-9);
  EXPECT_NEAR(expected, std::cos(deg2rad(50)), 1e-12);
}

TEST(Simdata, NormalizedPoseHasZeroRoll) {
  const Rig rig = make_rig(deg2rad(-40), 1.0);
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  for (const auto& s : generate_dual_view(g, emb, rig, wide_ranges(), 500, 3).samples) {
    EXPECT_NEAR(s.labels.view1.pose.roll, 0.0, 1e-9);
    EXPECT_NEAR(s.labels.view2.pose.roll, 0.0, 1e-9);
    EXPECT_TRUE(s.obs.w1.w.is_valid());
    EXPECT_TRUE(s.obs.w2.w.is_valid());
  }
}

TEST(Simdata, SceneRespectsRanges) {
  const SceneRanges r = wide_ranges();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const SubjectState s = sample_scene(rng, r);
    // Head = Ry(yaw) Rx(pitch) Rz(roll): recover the angles from the matrix.
    const Eigen::Matrix3d m = s.head.matrix();
    const double pitch = std::asin(std::clamp(-m(1, 2), -1.0, 1.0));
    const double yaw = std::atan2(m(0, 2), m(2, 2));
    const double roll = std::atan2(m(1, 0), m(1, 1));
    EXPECT_GE(yaw, r.yaw_min - 1e-12);
    EXPECT_LE(yaw, r.yaw_max + 1e-12);
    EXPECT_GE(pitch, r.pitch_min - 1e-12);
    EXPECT_LE(pitch, r.pitch_max + 1e-12);
    EXPECT_LE(std::abs(roll), r.roll_max + 1e-12);
    const double off = std::acos(std::clamp(s.gaze.vec().dot(m.col(2)), -1.0, 1.0));
    EXPECT_LE(off, r.gaze_cone + 1e-9);
    EXPECT_LE(s.position.cwiseAbs().maxCoeff(), r.position_jitter);
  }
}

TEST(Simdata, DegenerateRangesGiveCanonicalSubject) {
  std::mt19937_64 rng(4);
  const SubjectState s = sample_scene(rng, SceneRanges{});
  EXPECT_LT((s.head.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((s.gaze.vec() - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
  EXPECT_EQ(s.position, Eigen::Vector3d::Zero());
}

TEST(Simdata, InvalidRangesRejected) {
  std::mt19937_64 rng(4);
  SceneRanges r;
  r.yaw_min = 1.0;
  EXPECT_THROW(sample_scene(rng, r), InputError);
  r = SceneRanges{};
  r.gaze_cone = 2.0;
  EXPECT_THROW(sample_scene(rng, r), InputError);
  EXPECT_THROW(make_rig(0.0, 1.0), InputError);
}

TEST(Simdata, IdentityExtrinsicsLeaveTruthUnchanged) {
  std::mt19937_64 rng(5);
  const SubjectState s = sample_scene(rng, wide_ranges());
  const ViewTruth t = project_to_camera(CameraExtrinsics{}, s);
  EXPECT_EQ(t.gaze.vec(), s.gaze.vec());
  EXPECT_EQ(t.head.matrix(), s.head.matrix());
  EXPECT_EQ(t.head_position, s.position);
}

TEST(Simdata, CameraLookingAtOrigin) {
  for (double yaw : {-1.0, 0.0, 0.4, 1.2}) {
    const CameraExtrinsics c = camera_looking_at_origin(yaw, 0.3, 1.5);
    const Eigen::Vector3d o = c.to_camera(Eigen::Vector3d::Zero());
    EXPECT_NEAR(o.x(), 0.0, 1e-15);
    EXPECT_NEAR(o.y(), 0.0, 1e-15);
    EXPECT_NEAR(o.z(), 1.5, 1e-15);
    const Eigen::Vector3d p(0.1, -0.2, 0.3);
    EXPECT_LT((c.to_world(c.to_camera(p)) - p).norm(), 1e-14);
  }
}

TEST(Simdata, NormalizationMapsHeadDirectionToZ) {
  std::mt19937_64 rng(6);
  const Rig rig = make_rig(deg2rad(35), 1.0);
  for (int i = 0; i < 1000; ++i) {
    const SubjectState s = sample_scene(rng, wide_ranges());
    const NormalizationTransform w = make_normalization(rig.cam2, s);
    const Eigen::Vector3d d = rig.cam2.to_camera(s.position).normalized();
    EXPECT_LT((w.w * d - Eigen::Vector3d::UnitZ()).norm(), 1e-12);
    // Round trip through the warp.
    const UnitVec3 g = rig.cam2.rotation * s.gaze;
    EXPECT_LT((w.w.matrix().transpose() * (w.w * g).vec() - g.vec()).norm(), 1e-14);
  }
  SubjectState behind;
  behind.position = Eigen::Vector3d(0, 0, -2.0);
  EXPECT_THROW(make_normalization(rig.cam1, behind), InputError);
}

TEST(Simdata, GlobalRotationLeavesLabelsUnchanged) {
  // Rotating subject and cameras together changes nothing a camera sees.
  std::mt19937_64 rng(7);
  const Rig rig = make_rig(deg2rad(50), 1.0);
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  const NoiseConfig quiet{0.0, 0.0};
  for (int i = 0; i < 200; ++i) {
    const SubjectState s = sample_scene(rng, wide_ranges());
    const Rotation q = random_rotation(rng);
    SubjectState sq = s;
    sq.head = q * s.head;
    sq.gaze = q * s.gaze;
    sq.position = q * s.position;
    Rig rq = rig;
    for (CameraExtrinsics* c : {&rq.cam1, &rq.cam2})
      c->rotation = Rotation(c->rotation.matrix() * q.matrix().transpose());
    auto r1 = sample_rng(1, 0, i), r2 = sample_rng(1, 0, i);
    const auto a = make_dual_sample(emb, rig, s, r1, quiet);
    const auto b = make_dual_sample(emb, rq, sq, r2, quiet);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) continue;
    EXPECT_LT((a->labels.view1.gaze.vec() - b->labels.view1.gaze.vec()).norm(), 1e-12);
    EXPECT_LT((a->labels.view2.gaze.vec() - b->labels.view2.gaze.vec()).norm(), 1e-12);
    EXPECT_NEAR(a->labels.view2.pose.yaw, b->labels.view2.pose.yaw, 1e-12);
    const Prediction p1{a->labels.view1.gaze, a->labels.view1.pose};
    const Prediction p2{a->labels.view2.gaze, a->labels.view2.pose};
    const Prediction q1{b->labels.view1.gaze, b->labels.view1.pose};
    const Prediction q2{b->labels.view2.gaze, b->labels.view2.pose};
    EXPECT_NEAR(mutual_loss(p1, p2).value, mutual_loss(q1, q2).value, 1e-9);
  }
}

TEST(Simdata, NoiseFreeFeaturesAreDeterministic) {
  const auto emb = AppearanceEmbedding::make(16, 9, 0.5, 2.0);
  const NoiseConfig quiet{0.0, 0.0};
  std::mt19937_64 a(1), b(999);
  const Rotation head = rotation_from_euler({0.3, -0.1, 0.0});
  const UnitVec3 g(0.1, 0.2, 1.0);
  const FeatureVec xa = appearance_features(emb, head, g, 0.3, a, quiet);
  const FeatureVec xb = appearance_features(emb, head, g, 0.3, b, quiet);
  EXPECT_EQ(xa, xb);
  // Closed form sin(A u + b).
  Eigen::VectorXd u(9);
  u << g.vec(), head.matrix().col(0), head.matrix().col(1);
  const Eigen::VectorXd ref = (emb.a * u + emb.b).array().sin();
  for (std::size_t i = 0; i < xa.size(); ++i) EXPECT_NEAR(xa[i], ref[static_cast<Eigen::Index>(i)], 1e-14);
}

TEST(Simdata, FrontalNoiseHasBaseSigma) {
  const auto emb = AppearanceEmbedding::make(32, 9, 0.5, 2.0);
  const NoiseConfig noise{0.05, 0.4};
  EXPECT_EQ(noise.sigma(0.0), 0.05);
  EXPECT_NEAR(noise.sigma(kPi / 2), 0.45, 1e-15);
  const NoiseConfig quiet{0.0, 0.0};
  std::mt19937_64 rng(10), dummy(0);
  const Rotation head = Rotation::identity();
  const UnitVec3 g(0, 0, 1);
  const FeatureVec clean = appearance_features(emb, head, g, 0.0, dummy, quiet);
  double sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 500; ++i) {
    const FeatureVec x = appearance_features(emb, head, g, 0.0, rng, noise);
    for (std::size_t k = 0; k < x.size(); ++k, ++n) sq += (x[k] - clean[k]) * (x[k] - clean[k]);
  }
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(n)), 0.05, 0.05 * 0.03);
}

TEST(Simdata, GeneratorsAreDeterministic) {
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const Rig rig = make_rig(deg2rad(50), 1.0);
  const auto a = generate_dual_view(g, emb, rig, wide_ranges(), 50, 1);
  const auto b = generate_dual_view(g, emb, rig, wide_ranges(), 50, 1);
  const auto c = generate_dual_view(g, emb, rig, wide_ranges(), 50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.samples[i].obs.x1, b.samples[i].obs.x1);
    EXPECT_EQ(a.samples[i].obs.x2, b.samples[i].obs.x2);
  }
  EXPECT_NE(a.samples[0].obs.x1, c.samples[0].obs.x1);
  // A prefix of a longer set is the shorter set.
  const auto longer = generate_dual_view(g, emb, rig, wide_ranges(), 80, 1);
  EXPECT_EQ(longer.samples[49].obs.x2, a.samples[49].obs.x2);
  EXPECT_EQ(AppearanceEmbedding::make(8, 1, 1.0, 1.0).a, emb.a);
}

TEST(Simdata, RandomRigWithinRange) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Rig r = make_random_rig(s, 1.0);
    EXPECT_GE(r.relative_angle(), deg2rad(20) - 1e-9);
    EXPECT_LE(r.relative_angle(), deg2rad(90) + 1e-9);
  }
}

TEST(Simdata, PositionRefinementAveragesWorldPositions) {
  MultiCamRecording rec;
  rec.cameras = {CameraExtrinsics{}, CameraExtrinsics{}};
  RecordingFrame f;
  f.labels.resize(2);
  f.labels[0].position = Eigen::Vector3d(0, 0, 1.0);
  f.labels[1].position = Eigen::Vector3d(0, 0, 0.8);
  rec.frames = {f};
  const auto out = refine_head_positions(rec);
  for (const auto& p : out[0]) EXPECT_LT((p - Eigen::Vector3d(0, 0, 0.9)).norm(), 1e-15);
}

TEST(Simdata, PositionRefinementPermutationInvariantAndMean) {
  RecordingSettings rs;
  rs.cameras = 6;
  rs.frames = 10;
  const MultiCamRecording rec = generate_recording(rs);
  const auto out = refine_head_positions(rec);

  MultiCamRecording perm = rec;
  std::reverse(perm.cameras.begin(), perm.cameras.end());
  for (auto& f : perm.frames) std::reverse(f.labels.begin(), f.labels.end());
  const auto pout = refine_head_positions(perm);
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < rs.cameras; ++k)
      mean += rec.cameras[k].to_world(rec.frames[i].labels[k].position);
    mean /= static_cast<double>(rs.cameras);
    for (std::size_t k = 0; k < rs.cameras; ++k) {
      EXPECT_LT((rec.cameras[k].to_world(out[i][k]) - mean).norm(), 1e-12);
      EXPECT_LT((out[i][k] - pout[i][rs.cameras - 1 - k]).norm(), 1e-12);
    }
  }
}

TEST(Simdata, NoiseFreeRecordingNeedsNoCorrection) {
  RecordingSettings rs;
  rs.frames = 5;
  rs.rotation_noise = 0.0;
  rs.position_noise = 0.0;
  const MultiCamRecording rec = generate_recording(rs);
  const auto pos = refine_head_positions(rec);
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const auto r = refine_head_rotations(rec.frames[i], pos[i], RotationRefineOptions{});
    EXPECT_LT(max_abs(r.corrections), 1e-3);
    EXPECT_LT(r.variance_initial, 1e-20);
  }
}

TEST(Simdata, RefinementObjectiveNonIncreasing) {
  RecordingSettings rs;
  rs.frames = 3;
  const MultiCamRecording rec = generate_recording(rs);
  const auto pos = refine_head_positions(rec);
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const auto r = refine_head_rotations(rec.frames[i], pos[i], RotationRefineOptions{}, true);
    ASSERT_FALSE(r.objective_trace.empty());
    double prev = r.objective_initial;
    for (double v : r.objective_trace) {
      EXPECT_LE(v, prev);
      prev = v;
    }
    EXPECT_EQ(r.objective_final, r.objective_trace.back());
    EXPECT_LE(r.variance_final, r.variance_initial);
  }
}

TEST(Simdata, RefinementReducesNoisyVariance) {
  RecordingSettings rs;
  rs.frames = 20;
  const MultiCamRecording rec = generate_recording(rs);
  const auto pos = refine_head_positions(rec);
  auto reduction = [&](double delta) {
    RotationRefineOptions opt;
    opt.delta = delta;
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
      const auto r = refine_head_rotations(rec.frames[i], pos[i], opt);
      before += r.variance_initial;
      after += r.variance_final;
    }
    return 100.0 * (before - after) / before;
  };
  EXPECT_GE(reduction(RotationRefineOptions{}.delta), 50.0);
  // A heavier sparsity weight keeps most of the spread; value frozen.
  const double heavy = reduction(0.01);
  EXPECT_GT(heavy, 0.0);
  EXPECT_NEAR(heavy, kHeavyReduction, 1e-6) << std::setprecision(17) << heavy;
}

TEST(Simdata, RefinementRejectsBadInput) {
  RecordingSettings rs;
  rs.frames = 1;
  const MultiCamRecording rec = generate_recording(rs);
  const auto pos = refine_head_positions(rec);
  RotationRefineOptions opt;
  opt.delta = -1.0;
  EXPECT_THROW(refine_head_rotations(rec.frames[0], pos[0], opt), InputError);
  rs.cameras = 1;
  EXPECT_THROW(generate_recording(rs), InputError);
}

TEST(DatasetIo, DualRoundTripAndHiddenLabels) {
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const auto set = generate_dual_view(g, emb, make_rig(deg2rad(50), 1.0), wide_ranges(), 20, 1);
  const auto path = temp_dir() / "dual.jsonl";
  write_dual_view(path, {{"note", "x"}}, set);

  const auto obs = load_dual_observations(path);
  const auto lab = load_dual_labeled(path);
  ASSERT_EQ(obs.observations.size(), 20u);
  ASSERT_EQ(lab.labels.size(), 20u);
  EXPECT_EQ(obs.header.at("note"), "x");
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(obs.observations[i].x1, set.samples[i].obs.x1);
    EXPECT_EQ(obs.observations[i].x2, set.samples[i].obs.x2);
    EXPECT_EQ(obs.observations[i].w2.w.matrix(), set.samples[i].obs.w2.w.matrix());
    EXPECT_EQ(lab.labels[i].view2.gaze.vec(), set.samples[i].labels.view2.gaze.vec());
    EXPECT_EQ(lab.labels[i].view1.pose.yaw, set.samples[i].labels.view1.pose.yaw);
    EXPECT_EQ(lab.labels[i].view1.theta, set.samples[i].labels.view1.theta);
  }

  // Observations load without labels being present at all.
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  const auto stripped = temp_dir() / "stripped.jsonl";
  std::ofstream out(stripped);
  out << header << "\n";
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    for (auto& v : j.at("views")) v.erase("hidden");
    out << j.dump() << "\n";
  }
  out.close();
  EXPECT_EQ(load_dual_observations(stripped).observations.size(), 20u);
  EXPECT_THROW(load_dual_labeled(stripped), FormatError);
}

TEST(DatasetIo, SingleAndRecordingRoundTrip) {
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const auto set = generate_single_view(g, emb, wide_ranges(), 1.0, 10, 0);
  const auto path = temp_dir() / "single.jsonl";
  write_single_view(path, {}, set);
  const auto back = load_single_view(path);
  ASSERT_EQ(back.samples.size(), 10u);
  EXPECT_EQ(back.samples[3].x, set.samples[3].x);
  EXPECT_EQ(back.samples[3].labels.pose.pitch, set.samples[3].labels.pose.pitch);
  EXPECT_THROW(load_dual_observations(path), FormatError);

  RecordingSettings rs;
  rs.frames = 3;
  rs.cameras = 4;
  const auto rec = generate_recording(rs);
  const auto rpath = temp_dir() / "rec.jsonl";
  write_recording(rpath, {}, rec);
  const auto rback = load_recording(rpath).recording;
  ASSERT_EQ(rback.frames.size(), 3u);
  ASSERT_EQ(rback.cameras.size(), 4u);
  EXPECT_EQ(rback.frames[2].labels[3].rotation, rec.frames[2].labels[3].rotation);
  EXPECT_EQ(rback.cameras[1].rotation.matrix(), rec.cameras[1].rotation.matrix());
}

TEST(DatasetIo, Errors) {
  EXPECT_THROW(load_single_view(temp_dir() / "missing.jsonl"), IoError);
  const auto empty = temp_dir() / "empty.jsonl";
  std::ofstream(empty).close();
  EXPECT_THROW(load_single_view(empty), FormatError);
  const auto junk = temp_dir() / "junk.jsonl";
  std::ofstream(junk) << "{\"format\": \"something\", \"version\": 1}\n";
  EXPECT_THROW(load_single_view(junk), FormatError);
  const auto future = temp_dir() / "future.jsonl";
  std::ofstream(future) << "{\"format\": \"gazeadapt.dataset\", \"version\": 99, \"kind\": \"single\"}\n";
  EXPECT_THROW(load_single_view(future), FormatError);

  // Truncated record.
  const auto emb = AppearanceEmbedding::make(8, 1, 1.0, 1.0);
  GeneratorSettings g;
  g.feature_dim = 8;
  const auto path = temp_dir() / "trunc.jsonl";
  write_single_view(path, {}, generate_single_view(g, emb, wide_ranges(), 1.0, 3, 0));
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(path) << text.substr(0, text.size() - 20);
  EXPECT_THROW(load_single_view(path), FormatError);
}
