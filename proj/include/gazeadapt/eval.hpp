#pragma once

// Dual-view evaluation metrics. All values in radians.
//
//   mono        mean single-view gaze error over both views
//   dual_s      error of the view with the smaller head angle
//   dual_a      error of the head-frame average of both views
//   hpose       mean wrapped absolute error over yaw, pitch, roll
//   consistency mean angle between the two views' head-frame gazes

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazeadapt/model.hpp"
#include "gazeadapt/simdata.hpp"

namespace gazeadapt {

struct DualPrediction {
  Prediction view1, view2;
};

enum class SelectionMode { kPredicted, kLabel };

std::string_view to_string(SelectionMode m);
SelectionMode selection_mode_from_string(std::string_view s);

std::vector<DualPrediction> predict_all(const EstimatorParams& params,
                                        std::span<const DualViewObservation> obs);

double mono_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels);

/// Per-sample select-front error. `selected` receives 1 or 2.
double dual_s_sample(const DualPrediction& p, const DualViewLabels& l, SelectionMode mode,
                     int* selected = nullptr);
double dual_s_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels,
                    SelectionMode mode);

struct DualAResult {
  double error = 0.0;
  std::size_t degenerate = 0;
};
/// Per-sample averaged error; returns pi and sets *degenerate when the
/// head-frame sum nearly vanishes.
double dual_a_sample(const DualPrediction& p, const DualViewLabels& l, SelectionMode mode,
                     bool* degenerate = nullptr);
DualAResult dual_a_error(std::span<const DualPrediction> preds,
                         std::span<const DualViewLabels> labels, SelectionMode mode);

double hpose_error(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels);

double consistency_sample(const DualPrediction& p);
double consistency(std::span<const DualPrediction> preds);

struct HeadAngleBin {
  double lo = 0.0, hi = 0.0;  // radians
  std::size_t count = 0;      // (sample, view) pairs
  std::optional<double> mono;
  std::size_t dual_s_count = 0;
  std::optional<double> dual_s;
};

struct BinTable {
  std::vector<HeadAngleBin> bins;
  std::size_t outside = 0;  // views whose head angle falls outside all bins
};

/// Bins are [lo, hi) except the last, which is closed.
BinTable bin_by_head_angle(std::span<const DualPrediction> preds,
                           std::span<const DualViewLabels> labels, std::span<const double> edges,
                           SelectionMode mode);

/// Mono error per head-angle bin for single-view data.
BinTable bin_single_view(std::span<const Prediction> preds, std::span<const ViewLabels> labels,
                         std::span<const double> edges);

struct MetricReport {
  SelectionMode mode = SelectionMode::kPredicted;
  double mono = 0.0;
  double dual_s = 0.0;
  double dual_a = 0.0;
  std::size_t dual_a_degenerate = 0;
  double hpose = 0.0;
  double consistency = 0.0;
  BinTable bins;
  std::size_t samples = 0;
};

MetricReport evaluate(std::span<const DualPrediction> preds, std::span<const DualViewLabels> labels,
                      std::span<const double> edges, SelectionMode mode);

}  // namespace gazeadapt
