#include "gazeadapt/eval.hpp"

#include <cmath>

#include "gazeadapt/errors.hpp"

namespace gazeadapt {
namespace {

void check_aligned(std::size_t preds, std::size_t labels) {
  if (preds == 0) throw InputError("metric input is empty");
  if (preds != labels) throw InputError("predictions and labels are not aligned");
}

double view_error(const Prediction& p, const ViewLabels& l) {
  return angle_between(p.gaze, l.gaze);
}

Eigen::Vector3d head_frame(const EulerPose& pose, const UnitVec3& gaze) {
  return rotation_from_euler(pose).matrix().transpose() * gaze.vec();
}

}  // namespace

std::string_view to_string(SelectionMode m) {
  return m == SelectionMode::kLabel ? "label" : "predicted";
}

SelectionMode selection_mode_from_string(std::string_view s) {
  if (s == "predicted") return SelectionMode::kPredicted;
  if (s == "label") return SelectionMode::kLabel;
  throw InputError("selection mode must be 'predicted' or 'label'");
}

std::vector<DualPrediction> predict_all(const EstimatorParams& params,
                                        std::span<const DualViewObservation> obs) {
  std::vector<DualPrediction> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back({forward(params, o.x1), forward(params, o.x2)});
  return out;
}

double mono_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels) {
  check_aligned(preds.size(), labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += view_error(preds[i].view1, labels[i].view1);
    sum += view_error(preds[i].view2, labels[i].view2);
  }
  return sum / static_cast<double>(2 * preds.size());
}

double dual_s_sample(const DualPrediction& p, const DualViewLabels& l, SelectionMode mode,
                     int* selected) {
  const double t1 = mode == SelectionMode::kLabel ? l.view1.theta : head_angle(p.view1.pose);
  const double t2 = mode == SelectionMode::kLabel ? l.view2.theta : head_angle(p.view2.pose);
  const bool first = t1 <= t2;
  if (selected != nullptr) *selected = first ? 1 : 2;
  return first ? view_error(p.view1, l.view1) : view_error(p.view2, l.view2);
}

double dual_s_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels,
                    SelectionMode mode) {
  check_aligned(preds.size(), labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += dual_s_sample(preds[i], labels[i], mode);
  return sum / static_cast<double>(preds.size());
}

double dual_a_sample(const DualPrediction& p, const DualViewLabels& l, SelectionMode mode,
                     bool* degenerate) {
  const EulerPose& r1 = mode == SelectionMode::kLabel ? l.view1.pose : p.view1.pose;
  const EulerPose& r2 = mode == SelectionMode::kLabel ? l.view2.pose : p.view2.pose;
  const Eigen::Vector3d sum = head_frame(r1, p.view1.gaze) + head_frame(r2, p.view2.gaze);
  const double n = sum.norm();
  if (n < 1e-9) {
    if (degenerate != nullptr) *degenerate = true;
    return kPi;
  }
  if (degenerate != nullptr) *degenerate = false;
  const Eigen::Vector3d ref = head_frame(l.view1.pose, l.view1.gaze);
  return angle_between(Eigen::Vector3d(sum / n), ref);
}

DualAResult dual_a_error(std::span<const DualPrediction> preds,
                         std::span<const DualViewLabels> labels, SelectionMode mode) {
  check_aligned(preds.size(), labels.size());
  DualAResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool deg = false;
    sum += dual_a_sample(preds[i], labels[i], mode, &deg);
    if (deg) ++r.degenerate;
  }
  r.error = sum / static_cast<double>(preds.size());
  return r;
}

double hpose_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels) {
  check_aligned(preds.size(), labels.size());
  auto err = [](const EulerPose& a, const EulerPose& b) {
    return std::abs(wrap_angle(a.yaw - b.yaw)) + std::abs(wrap_angle(a.pitch - b.pitch)) +
           std::abs(wrap_angle(a.roll - b.roll));
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += err(preds[i].view1.pose, labels[i].view1.pose);
    sum += err(preds[i].view2.pose, labels[i].view2.pose);
  }
  return sum / static_cast<double>(6 * preds.size());
}

double consistency_sample(const DualPrediction& p) {
  return angle_between(head_frame(p.view1.pose, p.view1.gaze),
                       head_frame(p.view2.pose, p.view2.gaze));
}

double consistency(std::span<const DualPrediction> preds) {
  if (preds.empty()) throw InputError("metric input is empty");
  double sum = 0.0;
  for (const auto& p : preds) sum += consistency_sample(p);
  return sum / static_cast<double>(preds.size());
}

namespace {

std::vector<HeadAngleBin> make_bins(std::span<const double> edges) {
  if (edges.size() < 2) throw InputError("need at least two bin edges");
  std::vector<HeadAngleBin> bins;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1])) throw InputError("bin edges must be strictly increasing");
    bins.push_back({edges[i], edges[i + 1], 0, std::nullopt, 0, std::nullopt});
  }
  return bins;
}

std::optional<std::size_t> find_bin(const std::vector<HeadAngleBin>& bins, double theta) {
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const bool last = b + 1 == bins.size();
    if (theta >= bins[b].lo && (theta < bins[b].hi || (last && theta <= bins[b].hi))) return b;
  }
  return std::nullopt;
}

}  // namespace

BinTable bin_by_head_angle(std::span<const DualPrediction> preds,
                           std::span<const DualViewLabels> labels, std::span<const double> edges,
                           SelectionMode mode) {
  check_aligned(preds.size(), labels.size());
  BinTable t;
  t.bins = make_bins(edges);
  std::vector<double> mono_sum(t.bins.size(), 0.0), ds_sum(t.bins.size(), 0.0);

  auto add_view = [&](const Prediction& p, const ViewLabels& l) {
    const auto b = find_bin(t.bins, l.theta);
    if (!b) {
      ++t.outside;
      return;
    }
    ++t.bins[*b].count;
    mono_sum[*b] += view_error(p, l);
  };
  for (std::size_t i = 0; i < preds.size(); ++i) {
    add_view(preds[i].view1, labels[i].view1);
    add_view(preds[i].view2, labels[i].view2);
    int sel = 1;
    const double e = dual_s_sample(preds[i], labels[i], mode, &sel);
    const double theta = sel == 1 ? labels[i].view1.theta : labels[i].view2.theta;
    if (const auto b = find_bin(t.bins, theta)) {
      ++t.bins[*b].dual_s_count;
      ds_sum[*b] += e;
    }
  }
  for (std::size_t b = 0; b < t.bins.size(); ++b) {
    if (t.bins[b].count > 0) t.bins[b].mono = mono_sum[b] / static_cast<double>(t.bins[b].count);
    if (t.bins[b].dual_s_count > 0)
      t.bins[b].dual_s = ds_sum[b] / static_cast<double>(t.bins[b].dual_s_count);
  }
  return t;
}

BinTable bin_single_view(std::span<const Prediction> preds, std::span<const ViewLabels> labels,
                         std::span<const double> edges) {
  check_aligned(preds.size(), labels.size());
  BinTable t;
  t.bins = make_bins(edges);
  std::vector<double> sum(t.bins.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto b = find_bin(t.bins, labels[i].theta);
    if (!b) {
      ++t.outside;
      continue;
    }
    ++t.bins[*b].count;
    sum[*b] += view_error(preds[i], labels[i]);
  }
  for (std::size_t b = 0; b < t.bins.size(); ++b)
    if (t.bins[b].count > 0) t.bins[b].mono = sum[b] / static_cast<double>(t.bins[b].count);
  return t;
}

MetricReport evaluate(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels,
                      std::span<const double> edges, SelectionMode mode) {
  MetricReport r;
  r.mode = mode;
  r.samples = preds.size();
  r.mono = mono_error(preds, labels);
  r.dual_s = dual_s_error(preds, labels, mode);
  const auto da = dual_a_error(preds, labels, mode);
  r.dual_a = da.error;
  r.dual_a_degenerate = da.degenerate;
  r.hpose = hpose_error(preds, labels);
  r.consistency = consistency(preds);
  r.bins = bin_by_head_angle(preds, labels, edges, mode);
  return r;
}

}  // namespace gazeadapt
