#include "gazeadapt/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gazeadapt/errors.hpp"

namespace gazeadapt {

BatchCycler::BatchCycler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
  if (n == 0) throw InputError("cannot draw batches from an empty dataset");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchCycler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<std::size_t> BatchCycler::next(std::size_t batch) {
  std::vector<std::size_t> out;
  out.reserve(batch);
  while (out.size() < batch) {
    if (pos_ == order_.size()) reshuffle();
    out.push_back(order_[pos_++]);
  }
  return out;
}

namespace {

void check_dims(const EstimatorParams& params, std::size_t feature_dim) {
  if (feature_dim != params.arch().input_dim)
    throw InputError("dataset feature dimension " + std::to_string(feature_dim) +
                     " does not match estimator input " +
                     std::to_string(params.arch().input_dim));
}

void require_finite(const EstimatorParams& params) {
  if (!params.all_finite()) throw NumericError("parameters became non-finite");
}

template <typename T>
std::vector<T> gather(std::span<const T> data, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

void PretrainConfig::validate() const {
  if (iterations < 1 || batch_size < 1 || !(lr > 0.0) || !(pose_weight >= 0.0))
    throw InputError("invalid pre-training configuration");
}

PretrainResult pretrain(EstimatorParams params, std::span<const SingleViewSample> data,
                        const PretrainConfig& cfg,
                        const std::function<void(const PretrainRecord&)>& on_record) {
  cfg.validate();
  if (data.empty()) throw InputError("pre-training dataset is empty");
  check_dims(params, data.front().x.size());

  PretrainResult res{std::move(params), AdamState(), {}};
  res.optimizer = AdamState(res.params.size());
  BatchCycler cycler(data.size(), cfg.seed ^ 0x9e7a11ULL);
  const double inv = 1.0 / static_cast<double>(cfg.batch_size);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    Gradients grads(res.params.arch());
    PretrainRecord rec;
    rec.iteration = it;
    for (std::size_t i : cycler.next(cfg.batch_size)) {
      const auto& s = data[i];
      const Tape tape = forward_with_tape(res.params, s.x);
      PredictionGrad dg, dp;
      rec.gaze_loss += pretrain_loss(tape.prediction.gaze, s.labels.gaze, &dg) * inv;
      rec.pose_loss += pose_l1_loss(tape.prediction.pose, s.labels.pose, &dp) * inv;
      PredictionGrad d = dg * inv;
      d += dp * (cfg.pose_weight * inv);
      backward(res.params, tape, d, grads);
    }
    rec.total = rec.gaze_loss + cfg.pose_weight * rec.pose_loss;
    if (!std::isfinite(rec.total)) throw NumericError("non-finite pre-training loss");
    adam_step(res.params, grads, res.optimizer, cfg.lr);
    require_finite(res.params);
    if (on_record) on_record(rec);
    res.log.push_back(rec);
  }
  return res;
}

double mean_gaze_error(const EstimatorParams& params, std::span<const SingleViewSample> data) {
  if (data.empty()) throw InputError("dataset is empty");
  double sum = 0.0;
  for (const auto& s : data) sum += angle_between(forward(params, s.x).gaze, s.labels.gaze);
  return sum / static_cast<double>(data.size());
}

void AdaptConfig::validate() const {
  if (iterations < 1 || batch_size < 1 || !(lr > 0.0) || !(lambda_stb >= 0.0) ||
      !(lambda_pre >= 0.0) || !(eta >= 0.0 && eta < 1.0) || probe_every < 1)
    throw InputError("invalid adaptation configuration");
}

double mean_rig_constant(const EstimatorParams& params, std::span<const DualViewObservation> batch) {
  if (batch.empty()) throw InputError("empty batch");
  double sum = 0.0;
  for (const auto& o : batch)
    sum += denormalized_rig_constant(forward(params, o.x1).pose, forward(params, o.x2).pose, o.w1,
                                     o.w2)
               .f;
  return sum / static_cast<double>(batch.size());
}

ObjectiveResult adaptation_objective(const EstimatorParams& params,
                                     std::span<const DualViewObservation> batch,
                                     std::span<const SingleViewSample> pre_batch,
                                     const MomentumState& momentum, const ObjectiveWeights& w) {
  if (batch.empty()) throw InputError("empty adaptation batch");
  const std::size_t n = batch.size();
  const double inv = 1.0 / static_cast<double>(n);

  std::vector<Tape> t1, t2;
  t1.reserve(n);
  t2.reserve(n);
  for (const auto& o : batch) {
    t1.push_back(forward_with_tape(params, o.x1));
    t2.push_back(forward_with_tape(params, o.x2));
  }
  std::vector<PredictionGrad> d1(n), d2(n);

  double l_mut = 0.0;
  std::vector<ReliableView> flags(n);
  for (std::size_t i = 0; i < n; ++i) {
    const MutualLoss m = mutual_loss(t1[i].prediction, t2[i].prediction);
    flags[i] = m.flag;
    l_mut += m.value * inv;
    if (w.mut != 0.0) {
      d1[i] += m.grad1 * (w.mut * inv);
      d2[i] += m.grad2 * (w.mut * inv);
    }
  }

  std::vector<EulerPose> p1(n), p2(n);
  std::vector<NormalizationTransform> w1(n), w2(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = t1[i].prediction.pose;
    p2[i] = t2[i].prediction.pose;
    w1[i] = batch[i].w1;
    w2[i] = batch[i].w2;
  }
  const StabilizationLoss stb = stabilization_loss(p1, p2, w1, w2, momentum);
  double l_stb = 0.0;
  if (w.stb != 0.0) {
    l_stb = stb.value;
    for (std::size_t i = 0; i < n; ++i) {
      d1[i] += stb.grad1[i] * w.stb;
      d2[i] += stb.grad2[i] * w.stb;
    }
  }

  ObjectiveResult res{{}, stb.f, Gradients(params.arch())};
  for (std::size_t i = 0; i < n; ++i) {
    backward(params, t1[i], d1[i], res.grads);
    backward(params, t2[i], d2[i], res.grads);
  }

  double l_pre = 0.0;
  if (w.pre != 0.0) {
    if (pre_batch.empty()) throw InputError("pre-training batch is empty");
    const double pinv = 1.0 / static_cast<double>(pre_batch.size());
    for (const auto& s : pre_batch) {
      const Tape t = forward_with_tape(params, s.x);
      PredictionGrad d;
      l_pre += pretrain_loss(t.prediction.gaze, s.labels.gaze, &d) * pinv;
      backward(params, t, d * (w.pre * pinv), res.grads);
    }
  }

  res.loss = total_loss(l_mut, l_stb, l_pre, w.stb, w.pre);
  // Only gradient checks use a mutual weight other than 1.
  if (w.mut != 1.0) res.loss.total += (w.mut - 1.0) * l_mut;
  res.loss.flags = std::move(flags);
  return res;
}

double probe_consistency(const EstimatorParams& params, std::span<const DualViewObservation> probe) {
  if (probe.empty()) throw InputError("probe set is empty");
  double sum = 0.0;
  for (const auto& o : probe) {
    const Prediction a = forward(params, o.x1);
    const Prediction b = forward(params, o.x2);
    sum += angle_between(to_head_cs(rotation_from_euler(a.pose), a.gaze),
                         to_head_cs(rotation_from_euler(b.pose), b.gaze));
  }
  return sum / static_cast<double>(probe.size());
}

AdaptResult adapt(EstimatorParams params, std::span<const DualViewObservation> rig,
                  std::span<const SingleViewSample> pretrain_data,
                  std::span<const DualViewObservation> probe, const AdaptConfig& cfg,
                  const std::function<void(const AdaptRecord&)>& on_record) {
  cfg.validate();
  if (rig.empty()) throw InputError("dual-view dataset is empty");
  if (cfg.enable_pre && pretrain_data.empty()) throw InputError("pre-training dataset is empty");
  check_dims(params, rig.front().x1.size());
  if (!pretrain_data.empty()) check_dims(params, pretrain_data.front().x.size());

  AdaptResult res{std::move(params), AdamState(), {}};
  res.optimizer = AdamState(res.params.size());
  BatchCycler rig_cycler(rig.size(), cfg.seed ^ 0xada97ULL);
  std::optional<BatchCycler> pre_cycler;
  if (cfg.enable_pre) pre_cycler.emplace(pretrain_data.size(), cfg.seed ^ 0x97e7ULL);

  if (!probe.empty()) res.log.initial_consistency = probe_consistency(res.params, probe);

  const ObjectiveWeights weights{1.0, cfg.enable_stb ? cfg.lambda_stb : 0.0,
                                 cfg.enable_pre ? cfg.lambda_pre : 0.0};
  MomentumState momentum{0.0, cfg.eta};

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const auto batch = gather(rig, rig_cycler.next(cfg.batch_size));
    std::vector<SingleViewSample> pre_batch;
    if (pre_cycler) pre_batch = gather(pretrain_data, pre_cycler->next(cfg.batch_size));

    if (it == 1) {
      momentum.c = mean_rig_constant(res.params, batch);
      res.log.initial_c = momentum.c;
    }

    const ObjectiveResult obj =
        adaptation_objective(res.params, batch, pre_batch, momentum, weights);

    AdaptRecord rec;
    rec.iteration = it;
    rec.l_mut = obj.loss.l_mut;
    rec.l_stb = obj.loss.l_stb;
    rec.l_pre = obj.loss.l_pre;
    rec.total = obj.loss.total;
    rec.f_mean = obj.f_mean;
    rec.c = momentum.c;
    rec.first_view_reliable = static_cast<std::size_t>(
        std::count(obj.loss.flags.begin(), obj.loss.flags.end(), ReliableView::kFirst));

    adam_step(res.params, obj.grads, res.optimizer, cfg.lr);
    require_finite(res.params);
    momentum = update_momentum(momentum, obj.f_mean);

    if (!probe.empty() && (it % cfg.probe_every == 0 || it == cfg.iterations))
      rec.consistency = probe_consistency(res.params, probe);
    if (on_record) on_record(rec);
    res.log.records.push_back(rec);
  }
  return res;
}

}  // namespace gazeadapt
