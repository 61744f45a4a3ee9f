#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "gazeadapt/engine.hpp"
#include "gazeadapt/errors.hpp"

namespace gazeadapt::cli {
namespace {

using Objective = std::function<double(const EstimatorParams&)>;

struct Case {
  EstimatorParams params;
  std::vector<DualViewObservation> dual;
  std::vector<SingleViewSample> single;
};

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return Rotation(q.normalized().toRotationMatrix());
}

EulerPose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  return {u(rng), u(rng), u(rng)};
}

FeatureVec random_features(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureVec x(d);
  for (double& v : x) v = n(rng);
  return x;
}

// Small random network with every layer in its nonlinear range.
Case make_case(std::mt19937_64& rng, std::size_t batch) {
  std::uniform_int_distribution<std::size_t> in_dim(4, 10), hid(4, 12);
  Architecture arch{in_dim(rng), hid(rng)};
  Case c{EstimatorParams(arch), {}, {}};
  std::normal_distribution<double> n(0.0, 0.5);
  for (double& v : c.params.values()) v = n(rng);
  for (std::size_t i = 0; i < batch; ++i) {
    DualViewObservation o;
    o.id = i;
    o.x1 = random_features(rng, arch.input_dim);
    o.x2 = random_features(rng, arch.input_dim);
    o.w1 = {random_rotation(rng)};
    o.w2 = {random_rotation(rng)};
    c.dual.push_back(std::move(o));
    SingleViewSample s;
    s.id = i;
    s.x = random_features(rng, arch.input_dim);
    s.labels.gaze = UnitVec3(random_unit(rng));
    s.labels.pose = random_pose(rng);
    c.single.push_back(std::move(s));
  }
  return c;
}

struct Accumulator {
  SuiteResult r;
  double tolerance;
  double floor;

  void add(std::size_t config, std::size_t index, double analytic, double numeric) {
    ++r.coordinates;
    const double e = relative_error(analytic, numeric, floor);
    if (r.coordinates == 1 || !(e <= r.max_rel_error)) {
      r.max_rel_error = e;
      r.worst = {config, index, analytic, numeric};
    }
    if (!(e < tolerance)) r.passed = false;
  }
};

double central(const Objective& f, EstimatorParams p, std::size_t i, double h) {
  const double x0 = p.values()[i];
  p.values()[i] = x0 + h;
  const double up = f(p);
  p.values()[i] = x0 - h;
  const double down = f(p);
  return (up - down) / (2.0 * h);
}

void compare_params(Accumulator& acc, std::size_t config, const Objective& f,
                    const EstimatorParams& p, const Gradients& g, double h, bool corrupt) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    double a = g.values()[i];
    if (corrupt && i == 0) a += 1e-2 * (1.0 + std::abs(a));
    acc.add(config, i, a, central(f, p, i, h));
  }
}

// Pseudo labels chosen at the unperturbed parameters; finite differences
// then see the same constant targets the analytic gradient assumes.
std::vector<PseudoLabel> frozen_labels(const Case& c) {
  std::vector<PseudoLabel> out;
  for (const auto& o : c.dual)
    out.push_back(select_pseudo_label(forward(c.params, o.x1), forward(c.params, o.x2)));
  return out;
}

double frozen_mutual(const EstimatorParams& p, const Case& c, const std::vector<PseudoLabel>& pl) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.dual.size(); ++i) {
    const auto& o = c.dual[i];
    const Prediction sup =
        pl[i].flag == ReliableView::kFirst ? forward(p, o.x2) : forward(p, o.x1);
    s += head_frame_angle(sup, pl[i].target, nullptr);
  }
  return s / static_cast<double>(c.dual.size());
}

double stb_value(const EstimatorParams& p, const Case& c, const MomentumState& m) {
  return std::abs(mean_rig_constant(p, c.dual) - m.c);
}

double pre_value(const EstimatorParams& p, const Case& c) {
  double s = 0.0;
  for (const auto& smp : c.single) s += pretrain_loss(forward(p, smp.x).gaze, smp.labels.gaze, nullptr);
  return s / static_cast<double>(c.single.size());
}

// Keeps |f - C| away from the kink so the objective is differentiable.
MomentumState offset_momentum(const EstimatorParams& p, const Case& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.3);
  std::bernoulli_distribution sign(0.5);
  const double f = mean_rig_constant(p, c.dual);
  double cc = f + (sign(rng) ? u(rng) : -u(rng));
  if (std::abs(cc) > 1.0) cc = f - (cc - f);
  return {std::clamp(cc, -1.0, 1.0), kDefaultMomentum};
}

using SuiteFn = std::function<void(Accumulator&, std::size_t, std::mt19937_64&, double, bool)>;

void suite_model(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h, bool corrupt) {
  Case c = make_case(rng, 1);
  const FeatureVec x = c.single[0].x;
  PredictionGrad d;
  d.gaze = random_unit(rng);
  d.pose = random_unit(rng);
  const Objective f = [&](const EstimatorParams& p) {
    const Prediction y = forward(p, x);
    return d.gaze.dot(y.gaze.vec()) + d.pose.dot(Eigen::Vector3d(y.pose.yaw, y.pose.pitch, y.pose.roll));
  };
  const Gradients g = backward(c.params, forward_with_tape(c.params, x), d);
  compare_params(acc, k, f, c.params, g, h, corrupt);
}

void suite_pretrain(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h, bool corrupt) {
  Case c = make_case(rng, 3);
  const Objective f = [&](const EstimatorParams& p) { return pre_value(p, c); };
  const ObjectiveResult r = adaptation_objective(c.params, c.dual, c.single, {0.0, kDefaultMomentum},
                                                 ObjectiveWeights{0.0, 0.0, 1.0});
  compare_params(acc, k, f, c.params, r.grads, h, corrupt);
}

void suite_pose_l1(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h, bool corrupt) {
  Case c = make_case(rng, 3);
  const Objective f = [&](const EstimatorParams& p) {
    double s = 0.0;
    for (const auto& smp : c.single) s += pose_l1_loss(forward(p, smp.x).pose, smp.labels.pose, nullptr);
    return s;
  };
  Gradients g(c.params.arch());
  for (const auto& smp : c.single) {
    const Tape t = forward_with_tape(c.params, smp.x);
    PredictionGrad d;
    pose_l1_loss(t.prediction.pose, smp.labels.pose, &d);
    backward(c.params, t, d, g);
  }
  compare_params(acc, k, f, c.params, g, h, corrupt);
}

void suite_mutual(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h, bool corrupt) {
  Case c = make_case(rng, 4);
  const auto pl = frozen_labels(c);
  const Objective f = [&](const EstimatorParams& p) { return frozen_mutual(p, c, pl); };
  const ObjectiveResult r = adaptation_objective(c.params, c.dual, {}, {0.0, kDefaultMomentum},
                                                 ObjectiveWeights{1.0, 0.0, 0.0});
  compare_params(acc, k, f, c.params, r.grads, h, corrupt);
}

void suite_stabilization(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h,
                         bool corrupt) {
  Case c = make_case(rng, 4);
  const MomentumState m = offset_momentum(c.params, c, rng);
  const Objective f = [&](const EstimatorParams& p) { return stb_value(p, c, m); };
  const ObjectiveResult r =
      adaptation_objective(c.params, c.dual, {}, m, ObjectiveWeights{0.0, 1.0, 0.0});
  compare_params(acc, k, f, c.params, r.grads, h, corrupt);
}

void suite_total(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h, bool corrupt) {
  Case c = make_case(rng, 4);
  const auto pl = frozen_labels(c);
  const MomentumState m = offset_momentum(c.params, c, rng);
  const Objective f = [&](const EstimatorParams& p) {
    return frozen_mutual(p, c, pl) + kDefaultLambdaStb * stb_value(p, c, m) +
           kDefaultLambdaPre * pre_value(p, c);
  };
  const ObjectiveResult r = adaptation_objective(c.params, c.dual, c.single, m, ObjectiveWeights{});
  compare_params(acc, k, f, c.params, r.grads, h, corrupt);
}

// Derivatives of the loss terms with respect to predicted angles directly.
void suite_mutual_angles(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h,
                         bool corrupt) {
  Prediction p{UnitVec3(random_unit(rng)), random_pose(rng)};
  const UnitVec3 target(random_unit(rng));
  PredictionGrad g;
  head_frame_angle(p, target, &g);
  for (int j = 0; j < 3; ++j) {
    auto at = [&](double delta) {
      Prediction q = p;
      double* a[3] = {&q.pose.yaw, &q.pose.pitch, &q.pose.roll};
      *a[j] += delta;
      return head_frame_angle(q, target, nullptr);
    };
    double a = g.pose[j];
    if (corrupt && j == 0) a += 1e-2 * (1.0 + std::abs(a));
    acc.add(k, static_cast<std::size_t>(j), a, (at(h) - at(-h)) / (2.0 * h));
  }
}

void suite_rig_constant_angles(Accumulator& acc, std::size_t k, std::mt19937_64& rng, double h,
                               bool corrupt) {
  const EulerPose p1 = random_pose(rng), p2 = random_pose(rng);
  const NormalizationTransform w1{random_rotation(rng)}, w2{random_rotation(rng)};
  const RigConstantEval e = denormalized_rig_constant(p1, p2, w1, w2);
  for (int j = 0; j < 6; ++j) {
    auto at = [&](double delta) {
      EulerPose q1 = p1, q2 = p2;
      double* a[6] = {&q1.yaw, &q1.pitch, &q1.roll, &q2.yaw, &q2.pitch, &q2.roll};
      *a[j] += delta;
      return denormalized_rig_constant(q1, q2, w1, w2).f;
    };
    double a = j < 3 ? e.d_pose1[j] : e.d_pose2[j - 3];
    if (corrupt && j == 0) a += 1e-2 * (1.0 + std::abs(a));
    acc.add(k, static_cast<std::size_t>(j), a, (at(h) - at(-h)) / (2.0 * h));
  }
}

const std::vector<std::pair<std::string, SuiteFn>>& suites() {
  static const std::vector<std::pair<std::string, SuiteFn>> s = {
      {"model_backward", suite_model},
      {"pretrain_loss", suite_pretrain},
      {"pose_l1_loss", suite_pose_l1},
      {"mutual_loss", suite_mutual},
      {"stabilization_loss", suite_stabilization},
      {"total_objective", suite_total},
      {"mutual_loss_angles", suite_mutual_angles},
      {"rig_constant_angles", suite_rig_constant_angles},
  };
  return s;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

std::vector<std::string> gradcheck_suite_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : suites()) out.push_back(name);
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.configurations == 0) throw InputError("gradcheck needs at least one configuration");
  if (!(opt.step > 0.0)) throw InputError("finite-difference step must be positive");
  if (opt.corrupt) {
    const auto names = gradcheck_suite_names();
    if (std::find(names.begin(), names.end(), *opt.corrupt) == names.end())
      throw InputError("unknown gradcheck suite '" + *opt.corrupt + "'");
  }
  GradcheckReport rep;
  std::uint64_t stream = 0;
  for (const auto& [name, fn] : suites()) {
    Accumulator acc{{}, opt.tolerance, opt.floor};
    acc.r.name = name;
    acc.r.configurations = opt.configurations;
    const bool corrupt = opt.corrupt && *opt.corrupt == name;
    std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL + (++stream));
    for (std::size_t k = 0; k < opt.configurations; ++k) fn(acc, k, rng, opt.step, corrupt);
    rep.suites.push_back(acc.r);
  }
  return rep;
}

}  // namespace gazeadapt::cli
