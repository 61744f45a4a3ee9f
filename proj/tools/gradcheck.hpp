#pragma once

// Central finite-difference checks of every analytic gradient: the model's
// backward pass, each loss composed with the model, and the loss terms'
// own derivatives with respect to predicted angles.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gazeadapt::cli {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t configurations = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Gradients this small in both estimates are compared absolutely.
  double floor = 1e-6;
  /// Test hook: perturbs one analytic coordinate of the named suite.
  std::optional<std::string> corrupt;
};

struct WorstCoordinate {
  std::size_t configuration = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct SuiteResult {
  std::string name;
  std::size_t configurations = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  WorstCoordinate worst;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<SuiteResult> suites;
  bool passed() const;
};

std::vector<std::string> gradcheck_suite_names();

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

GradcheckReport run_gradcheck(const GradcheckOptions& opt);

}  // namespace gazeadapt::cli
