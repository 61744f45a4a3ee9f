#pragma once

// Training drivers: supervised single-view pre-training and the unsupervised
// dual-view adaptation loop. The adaptation entry point only accepts
// DualViewObservation, so it cannot see labels or camera extrinsics.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gazeadapt/losses.hpp"
#include "gazeadapt/model.hpp"
#include "gazeadapt/simdata.hpp"

namespace gazeadapt {

/// Cycles through [0, n) in seeded random order, reshuffling every pass.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t batch);

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

struct PretrainConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double pose_weight = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PretrainRecord {
  std::size_t iteration = 0;
  double gaze_loss = 0.0;
  double pose_loss = 0.0;
  double total = 0.0;
};

struct PretrainResult {
  EstimatorParams params;
  AdamState optimizer;
  std::vector<PretrainRecord> log;
};

PretrainResult pretrain(EstimatorParams params, std::span<const SingleViewSample> data,
                        const PretrainConfig& cfg,
                        const std::function<void(const PretrainRecord&)>& on_record = {});

/// Mean angular gaze error over a labelled single-view set.
double mean_gaze_error(const EstimatorParams& params, std::span<const SingleViewSample> data);

struct AdaptConfig {
  std::size_t iterations = 3000;
  std::size_t batch_size = 64;
  double lr = 1e-5;
  double lambda_stb = kDefaultLambdaStb;
  double lambda_pre = kDefaultLambdaPre;
  double eta = kDefaultMomentum;
  std::uint64_t seed = 1;
  bool enable_stb = true;
  bool enable_pre = true;
  std::size_t probe_every = 50;

  void validate() const;
};

struct AdaptRecord {
  std::size_t iteration = 0;
  double l_mut = 0.0;
  double l_stb = 0.0;
  double l_pre = 0.0;
  double total = 0.0;
  double f_mean = 0.0;  // batch mean rig constant from this iteration's predictions
  double c = 0.0;       // momentum value used by this iteration's stabilization term
  std::size_t first_view_reliable = 0;
  std::optional<double> consistency;  // probe set, after this iteration's update
};

struct TrainLog {
  double initial_c = 0.0;
  std::optional<double> initial_consistency;
  std::vector<AdaptRecord> records;
};

struct AdaptResult {
  EstimatorParams params;
  AdamState optimizer;
  TrainLog log;
};

struct ObjectiveWeights {
  double mut = 1.0;
  double stb = kDefaultLambdaStb;
  double pre = kDefaultLambdaPre;
};

struct ObjectiveResult {
  LossBreakdown loss;
  double f_mean = 0.0;
  Gradients grads;
};

/// Loss and parameter gradient for one adaptation batch. A term whose weight
/// is zero is skipped and reported as 0; f_mean is always computed.
ObjectiveResult adaptation_objective(const EstimatorParams& params,
                                     std::span<const DualViewObservation> batch,
                                     std::span<const SingleViewSample> pre_batch,
                                     const MomentumState& momentum, const ObjectiveWeights& w);

/// Batch mean of the denormalized rig constant under the current model.
double mean_rig_constant(const EstimatorParams& params, std::span<const DualViewObservation> batch);

AdaptResult adapt(EstimatorParams params, std::span<const DualViewObservation> rig,
                  std::span<const SingleViewSample> pretrain_data,
                  std::span<const DualViewObservation> probe, const AdaptConfig& cfg,
                  const std::function<void(const AdaptRecord&)>& on_record = {});

/// Mean angle between the two views' head-frame gaze predictions.
double probe_consistency(const EstimatorParams& params, std::span<const DualViewObservation> probe);

}  // namespace gazeadapt
