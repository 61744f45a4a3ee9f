#pragma once

// Small fully connected estimator: features -> tanh -> tanh -> 6 outputs.
// Outputs 0..2 are a raw gaze vector, anchored at +z and normalized;
// outputs 3..5 are squashed to angles by pi * tanh.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazeadapt/geometry.hpp"

namespace gazeadapt {

using FeatureVec = std::vector<double>;

struct Architecture {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 64;

  static constexpr std::size_t kOutputDim = 6;

  std::size_t param_count() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of the individual tensors inside the flat parameter buffer.
struct ParamLayout {
  std::size_t w1, b1, w2, b2, w3, b3, total;
  explicit ParamLayout(const Architecture& a);
};

/// Flat parameter buffer. Gradients and optimizer moments share the shape.
class EstimatorParams {
 public:
  explicit EstimatorParams(Architecture arch);

  /// Gaussian init scaled by 1/sqrt(fan_in); output layer further scaled so
  /// the untrained model starts near the anchor output.
  static EstimatorParams random(Architecture arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool all_finite() const;

  friend bool operator==(const EstimatorParams& a, const EstimatorParams& b) {
    return a.arch_ == b.arch_ && a.values_ == b.values_;
  }

 private:
  Architecture arch_;
  ParamLayout layout_;
  std::vector<double> values_;
};

using Gradients = EstimatorParams;

struct Prediction {
  UnitVec3 gaze;
  EulerPose pose;
};

/// Gradient of a scalar objective with respect to a Prediction's fields.
struct PredictionGrad {
  Eigen::Vector3d gaze = Eigen::Vector3d::Zero();
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();  // yaw, pitch, roll

  PredictionGrad& operator+=(const PredictionGrad& o) {
    gaze += o.gaze;
    pose += o.pose;
    return *this;
  }
  PredictionGrad operator*(double s) const { return {gaze * s, pose * s}; }
};

/// Intermediates of one forward pass.
struct Tape {
  FeatureVec input;
  std::vector<double> hidden1;  // post-activation
  std::vector<double> hidden2;
  std::array<double, 6> raw{};
  Eigen::Vector3d anchored = Eigen::Vector3d::Zero();  // raw gaze + anchor
  double anchored_norm = 0.0;
  bool degenerate_gaze = false;
  Prediction prediction;
};

Prediction forward(const EstimatorParams& params, std::span<const double> x);
Tape forward_with_tape(const EstimatorParams& params, std::span<const double> x);

/// Accumulates d<dpred, output>/dparams into `grads`.
void backward(const EstimatorParams& params, const Tape& tape, const PredictionGrad& dpred,
              Gradients& grads);

/// Convenience wrapper returning fresh gradients.
Gradients backward(const EstimatorParams& params, const Tape& tape, const PredictionGrad& dpred);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

void adam_step(EstimatorParams& params, const Gradients& grads, AdamState& state, double lr);

struct Checkpoint {
  EstimatorParams params;
  AdamState optimizer;
  /// Resolved run configuration, serialized JSON.
  std::string provenance;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);

/// Throws IoError when missing, FormatError when malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above; additionally throws ArchitectureMismatch if shapes differ.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& expected);

/// Hex digest (FNV-1a 64) of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace gazeadapt
