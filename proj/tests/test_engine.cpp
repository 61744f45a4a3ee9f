#include <gtest/gtest.h>

#include <cmath>

#include "gazeadapt/engine.hpp"
#include "gazeadapt/errors.hpp"
#include "test_util.hpp"

using namespace gazeadapt;
using namespace gazeadapt::testing;

namespace {

struct SmallWorld {
  GeneratorSettings g;
  AppearanceEmbedding emb;
  Rig rig;
  SingleViewSet pre;
  DualViewSet dual;
  std::vector<DualViewObservation> obs;
  std::vector<DualViewObservation> probe;

  SmallWorld() {
    g.feature_dim = 12;
    emb = AppearanceEmbedding::make(g.feature_dim, 5, 0.5, 2.0);
    rig = make_rig(deg2rad(50), 1.0);
    SceneRanges r;
    r.yaw_min = -deg2rad(45);
    r.yaw_max = deg2rad(45);
    r.pitch_min = -deg2rad(20);
    r.pitch_max = deg2rad(20);
    r.roll_max = deg2rad(10);
    r.gaze_cone = deg2rad(30);
    pre = generate_single_view(g, emb, r, 1.0, 300, 0);
    const SceneRanges rr = rig_scene_ranges(rig, deg2rad(25), deg2rad(20), deg2rad(10), deg2rad(30), 0.05);
    dual = generate_dual_view(g, emb, rig, rr, 200, 1);
    for (const auto& s : dual.samples) obs.push_back(s.obs);
    for (const auto& s : generate_dual_view(g, emb, rig, rr, 40, 2).samples) probe.push_back(s.obs);
  }
};

const SmallWorld& world() {
  static const SmallWorld w;
  return w;
}

EstimatorParams pretrained() {
  static const EstimatorParams p = [] {
    PretrainConfig pc;
    pc.iterations = 300;
    pc.batch_size = 32;
    pc.lr = 3e-3;
    return pretrain(EstimatorParams::random({12, 16}, 1), world().pre.samples, pc).params;
  }();
  return p;
}

AdaptConfig small_adapt() {
  AdaptConfig c;
  c.iterations = 60;
  c.batch_size = 16;
  c.lr = 1e-4;
  c.probe_every = 10;
  return c;
}

}  // namespace

TEST(Engine, BatchCyclerCoversEveryIndexPerPass) {
  BatchCycler c(10, 3);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 5; ++i)
    for (std::size_t k : c.next(2)) ++seen[k];
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_THROW(BatchCycler(0, 1), InputError);
}

TEST(Engine, PretrainSingleIterationTakesOneStep) {
  PretrainConfig pc;
  pc.iterations = 1;
  const auto r = pretrain(EstimatorParams::random({12, 8}, 1), world().pre.samples, pc);
  EXPECT_EQ(r.optimizer.step, 1u);
  EXPECT_EQ(r.log.size(), 1u);
}

TEST(Engine, PretrainDeterministicAndLearns) {
  PretrainConfig pc;
  pc.iterations = 300;
  pc.batch_size = 32;
  pc.lr = 3e-3;
  const EstimatorParams init = EstimatorParams::random({12, 16}, 1);
  const auto a = pretrain(init, world().pre.samples, pc);
  const auto b = pretrain(init, world().pre.samples, pc);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.optimizer, b.optimizer);
  EXPECT_LT(mean_gaze_error(a.params, world().pre.samples),
            0.5 * mean_gaze_error(init, world().pre.samples));
}

TEST(Engine, PretrainRejectsBadInput) {
  PretrainConfig pc;
  EXPECT_THROW(pretrain(EstimatorParams::random({12, 8}, 1), {}, pc), InputError);
  EXPECT_THROW(pretrain(EstimatorParams::random({11, 8}, 1), world().pre.samples, pc), InputError);
  pc.lr = 0.0;
  EXPECT_THROW(pretrain(EstimatorParams::random({12, 8}, 1), world().pre.samples, pc), InputError);
}

TEST(Engine, ObjectiveGradientIsLinearInTerms) {
  const EstimatorParams p = pretrained();
  const std::span<const DualViewObservation> batch(world().obs.data(), 16);
  const std::span<const SingleViewSample> pre(world().pre.samples.data(), 16);
  const MomentumState m{mean_rig_constant(p, batch) - 0.05, 0.99};
  const auto full = adaptation_objective(p, batch, pre, m, ObjectiveWeights{});
  const auto mut = adaptation_objective(p, batch, pre, m, {1.0, 0.0, 0.0});
  const auto stb = adaptation_objective(p, batch, pre, m, {0.0, kDefaultLambdaStb, 0.0});
  const auto pr = adaptation_objective(p, batch, pre, m, {0.0, 0.0, kDefaultLambdaPre});
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double sum = mut.grads.values()[i] + stb.grads.values()[i] + pr.grads.values()[i];
    EXPECT_NEAR(full.grads.values()[i], sum, 1e-12 * (1.0 + std::abs(sum)));
  }
  EXPECT_NEAR(full.loss.total,
              full.loss.l_mut + kDefaultLambdaStb * full.loss.l_stb + kDefaultLambdaPre * full.loss.l_pre,
              1e-12);
  EXPECT_EQ(full.f_mean, mean_rig_constant(p, batch));
}

TEST(Engine, MutualGradientIgnoresPseudoLabelView) {
  // Recompute the mutual gradient from the supervised view alone.
  const EstimatorParams p = pretrained();
  const std::span<const DualViewObservation> batch(world().obs.data(), 16);
  const auto r = adaptation_objective(p, batch, {}, {0.9, 0.99}, {1.0, 0.0, 0.0});
  Gradients manual(p.arch());
  for (const auto& o : batch) {
    const Tape t1 = forward_with_tape(p, o.x1), t2 = forward_with_tape(p, o.x2);
    const MutualLoss m = mutual_loss(t1.prediction, t2.prediction);
    const Tape& sup = m.flag == ReliableView::kFirst ? t2 : t1;
    const PredictionGrad& g = m.flag == ReliableView::kFirst ? m.grad2 : m.grad1;
    backward(p, sup, g * (1.0 / static_cast<double>(batch.size())), manual);
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_NEAR(r.grads.values()[i], manual.values()[i], 1e-15 + 1e-13 * std::abs(manual.values()[i]));
}

TEST(Engine, AdaptLogStructureAndMomentumReplay) {
  const AdaptConfig cfg = small_adapt();
  std::size_t streamed = 0;
  const auto r = adapt(pretrained(), world().obs, world().pre.samples, world().probe, cfg,
                       [&](const AdaptRecord&) { ++streamed; });
  ASSERT_EQ(r.log.records.size(), cfg.iterations);
  EXPECT_EQ(streamed, cfg.iterations);
  EXPECT_TRUE(r.log.initial_consistency.has_value());
  EXPECT_EQ(r.log.records.front().c, r.log.initial_c);
  MomentumState m{r.log.initial_c, cfg.eta};
  for (std::size_t i = 0; i < r.log.records.size(); ++i) {
    const AdaptRecord& rec = r.log.records[i];
    EXPECT_EQ(rec.iteration, i + 1);
    EXPECT_EQ(rec.c, m.c) << "replay diverged at " << i;
    EXPECT_LE(std::abs(rec.c), 1.0);
    EXPECT_NEAR(rec.l_stb, std::abs(rec.f_mean - rec.c), 1e-12);
    EXPECT_NEAR(rec.total, rec.l_mut + cfg.lambda_stb * rec.l_stb + cfg.lambda_pre * rec.l_pre, 1e-12);
    EXPECT_EQ(rec.consistency.has_value(), (i + 1) % cfg.probe_every == 0 || i + 1 == cfg.iterations);
    m = update_momentum(m, rec.f_mean);
  }
}

TEST(Engine, AblationTogglesZeroTheirColumns) {
  AdaptConfig cfg = small_adapt();
  cfg.enable_stb = false;
  cfg.enable_pre = false;
  const auto r = adapt(pretrained(), world().obs, {}, {}, cfg);
  for (const auto& rec : r.log.records) {
    EXPECT_EQ(rec.l_stb, 0.0);
    EXPECT_EQ(rec.l_pre, 0.0);
    EXPECT_EQ(rec.total, rec.l_mut);
    EXPECT_FALSE(rec.consistency.has_value());
  }
}

TEST(Engine, AdaptDeterministic) {
  const AdaptConfig cfg = small_adapt();
  const auto a = adapt(pretrained(), world().obs, world().pre.samples, world().probe, cfg);
  const auto b = adapt(pretrained(), world().obs, world().pre.samples, world().probe, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.optimizer, b.optimizer);
  for (std::size_t i = 0; i < a.log.records.size(); ++i) {
    EXPECT_EQ(a.log.records[i].total, b.log.records[i].total);
    EXPECT_EQ(a.log.records[i].c, b.log.records[i].c);
  }
}

TEST(Engine, AdaptBlindToExtrinsics) {
  // Same features and warps, different world metadata: the observations
  // handed to adapt are identical, so the runs are too.
  DualViewSet moved = world().dual;
  for (auto& s : moved.samples) {
    s.world.rig.cam2.translation += Eigen::Vector3d(0.3, -0.1, 0.2);
    s.world.rig.cam2.rotation = Rotation(rot_y(0.4) * s.world.rig.cam2.rotation.matrix());
  }
  std::vector<DualViewObservation> obs;
  for (const auto& s : moved.samples) obs.push_back(s.obs);
  const AdaptConfig cfg = small_adapt();
  const auto a = adapt(pretrained(), world().obs, world().pre.samples, {}, cfg);
  const auto b = adapt(pretrained(), obs, world().pre.samples, {}, cfg);
  EXPECT_EQ(a.params, b.params);
}

TEST(Engine, AdaptRejectsBadInput) {
  AdaptConfig cfg = small_adapt();
  EXPECT_THROW(adapt(pretrained(), {}, world().pre.samples, {}, cfg), InputError);
  EXPECT_THROW(adapt(pretrained(), world().obs, {}, {}, cfg), InputError);
  EXPECT_THROW(adapt(EstimatorParams::random({13, 4}, 1), world().obs, world().pre.samples, {}, cfg),
               InputError);
  cfg.iterations = 0;
  EXPECT_THROW(adapt(pretrained(), world().obs, world().pre.samples, {}, cfg), InputError);
}

TEST(Engine, DivergenceRaisesNumericError) {
  AdaptConfig cfg = small_adapt();
  cfg.lr = 1e308;
  EXPECT_THROW(adapt(pretrained(), world().obs, world().pre.samples, {}, cfg), NumericError);
}

TEST(Engine, ProbeConsistencyOracle) {
  const EstimatorParams p = pretrained();
  double sum = 0.0;
  for (const auto& o : world().probe) {
    const Prediction a = forward(p, o.x1), b = forward(p, o.x2);
    const Eigen::Vector3d ha = rotation_from_euler(a.pose).matrix().transpose() * a.gaze.vec();
    const Eigen::Vector3d hb = rotation_from_euler(b.pose).matrix().transpose() * b.gaze.vec();
    sum += std::acos(std::clamp(ha.dot(hb), -1.0 + 1e-7, 1.0 - 1e-7));
  }
  EXPECT_NEAR(probe_consistency(p, world().probe), sum / world().probe.size(), 1e-12);

  // Two identical views are perfectly consistent.
  std::vector<DualViewObservation> same = world().probe;
  for (auto& o : same) o.x2 = o.x1;
  EXPECT_LE(probe_consistency(p, same), 4.5e-4);
  EXPECT_THROW(probe_consistency(p, {}), InputError);
}
