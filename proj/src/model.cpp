#include "gazeadapt/model.hpp"

#include <cmath>
#include <random>

#include "gazeadapt/errors.hpp"
#include "gazeadapt/kernels.hpp"

namespace gazeadapt {

std::size_t Architecture::param_count() const { return ParamLayout(*this).total; }

ParamLayout::ParamLayout(const Architecture& a) {
  const std::size_t d = a.input_dim, h = a.hidden_dim, o = Architecture::kOutputDim;
  w1 = 0;
  b1 = w1 + h * d;
  w2 = b1 + h;
  b2 = w2 + h * h;
  w3 = b2 + h;
  b3 = w3 + o * h;
  total = b3 + o;
}

EstimatorParams::EstimatorParams(Architecture arch)
    : arch_(arch), layout_(arch), values_(layout_.total, 0.0) {
  if (arch.input_dim == 0 || arch.hidden_dim == 0)
    throw InputError("estimator dimensions must be positive");
}

EstimatorParams EstimatorParams::random(Architecture arch, std::uint64_t seed) {
  EstimatorParams p(arch);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& L = p.layout_;
  const std::size_t d = arch.input_dim, h = arch.hidden_dim;
  auto fill = [&](std::size_t begin, std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) p.values_[begin + i] = scale * normal(rng);
  };
  fill(L.w1, h * d, 1.0 / std::sqrt(static_cast<double>(d)));
  fill(L.w2, h * h, 1.0 / std::sqrt(static_cast<double>(h)));
  fill(L.w3, Architecture::kOutputDim * h, 0.1 / std::sqrt(static_cast<double>(h)));
  // biases start at zero
  return p;
}

bool EstimatorParams::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void check_input(const EstimatorParams& params, std::span<const double> x) {
  if (x.size() != params.arch().input_dim)
    throw InputError("feature dimension " + std::to_string(x.size()) +
                     " does not match estimator input " +
                     std::to_string(params.arch().input_dim));
}

}  // namespace

Tape forward_with_tape(const EstimatorParams& params, std::span<const double> x) {
  check_input(params, x);
  const auto& k = kernels::active();
  const auto& L = params.layout();
  const std::size_t d = params.arch().input_dim, h = params.arch().hidden_dim;
  const auto v = params.values();

  Tape t;
  t.input.assign(x.begin(), x.end());
  t.hidden1.resize(h);
  t.hidden2.resize(h);

  k.affine(v.subspan(L.w1, h * d), v.subspan(L.b1, h), x, t.hidden1);
  for (double& a : t.hidden1) a = std::tanh(a);
  k.affine(v.subspan(L.w2, h * h), v.subspan(L.b2, h), t.hidden1, t.hidden2);
  for (double& a : t.hidden2) a = std::tanh(a);
  k.affine(v.subspan(L.w3, Architecture::kOutputDim * h), v.subspan(L.b3, Architecture::kOutputDim),
           t.hidden2, t.raw);

  t.anchored = Eigen::Vector3d(t.raw[0], t.raw[1], t.raw[2] + 1.0);
  t.anchored_norm = t.anchored.norm();
  if (t.anchored_norm < 1e-12) {
    t.degenerate_gaze = true;
    t.prediction.gaze = UnitVec3();
  } else {
    t.prediction.gaze = UnitVec3::from_unit(t.anchored / t.anchored_norm);
  }
  t.prediction.pose.yaw = kPi * std::tanh(t.raw[3]);
  t.prediction.pose.pitch = kPi * std::tanh(t.raw[4]);
  t.prediction.pose.roll = kPi * std::tanh(t.raw[5]);
  return t;
}

Prediction forward(const EstimatorParams& params, std::span<const double> x) {
  return forward_with_tape(params, x).prediction;
}

void backward(const EstimatorParams& params, const Tape& tape, const PredictionGrad& dpred,
              Gradients& grads) {
  if (!(grads.arch() == params.arch())) throw InputError("gradient buffer shape mismatch");
  const auto& k = kernels::active();
  const auto& L = params.layout();
  const std::size_t d = params.arch().input_dim, h = params.arch().hidden_dim;
  const std::size_t o = Architecture::kOutputDim;
  const auto v = params.values();
  auto g = grads.values();

  std::array<double, 6> draw{};
  if (!tape.degenerate_gaze) {
    const Eigen::Vector3d& u = tape.prediction.gaze.vec();
    const Eigen::Vector3d dv = (dpred.gaze - u * u.dot(dpred.gaze)) / tape.anchored_norm;
    draw[0] = dv.x();
    draw[1] = dv.y();
    draw[2] = dv.z();
  }
  for (int i = 0; i < 3; ++i) {
    const double th = std::tanh(tape.raw[3 + i]);
    draw[3 + i] = kPi * (1.0 - th * th) * dpred.pose[i];
  }

  k.outer_accumulate(draw, tape.hidden2, g.subspan(L.w3, o * h));
  for (std::size_t i = 0; i < o; ++i) g[L.b3 + i] += draw[i];

  std::vector<double> delta2(h), delta1(h);
  k.affine_transpose(v.subspan(L.w3, o * h), draw, delta2);
  for (std::size_t i = 0; i < h; ++i) delta2[i] *= 1.0 - tape.hidden2[i] * tape.hidden2[i];

  k.outer_accumulate(delta2, tape.hidden1, g.subspan(L.w2, h * h));
  for (std::size_t i = 0; i < h; ++i) g[L.b2 + i] += delta2[i];

  k.affine_transpose(v.subspan(L.w2, h * h), delta2, delta1);
  for (std::size_t i = 0; i < h; ++i) delta1[i] *= 1.0 - tape.hidden1[i] * tape.hidden1[i];

  k.outer_accumulate(delta1, tape.input, g.subspan(L.w1, h * d));
  for (std::size_t i = 0; i < h; ++i) g[L.b1 + i] += delta1[i];
}

Gradients backward(const EstimatorParams& params, const Tape& tape, const PredictionGrad& dpred) {
  Gradients g(params.arch());
  backward(params, tape, dpred, g);
  return g;
}

void adam_step(EstimatorParams& params, const Gradients& grads, AdamState& state, double lr) {
  const std::size_t n = params.size();
  if (grads.size() != n) throw InputError("gradient shape mismatch");
  if (state.m.empty() && state.v.empty()) state = AdamState(n);
  if (state.m.size() != n || state.v.size() != n) throw InputError("optimizer state shape mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  auto p = params.values();
  const auto g = grads.values();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = AdamState::kBeta1 * state.m[i] + (1.0 - AdamState::kBeta1) * g[i];
    state.v[i] = AdamState::kBeta2 * state.v[i] + (1.0 - AdamState::kBeta2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::kEps);
  }
}

}  // namespace gazeadapt
