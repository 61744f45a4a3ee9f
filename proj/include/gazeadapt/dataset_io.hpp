#pragma once

// Line-oriented dataset files. Line 1 is a header object
//   {"format": "gazeadapt.dataset", "version": 1, "kind": ..., "feature_dim": d, ...}
// and every following line is one sample record. Dual-view records carry
// per-view "hidden" labels; only load_dual_labeled reads them.

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "gazeadapt/simdata.hpp"

namespace gazeadapt {

inline constexpr int kDatasetFormatVersion = 1;

struct SingleViewFile {
  nlohmann::json header;
  std::vector<SingleViewSample> samples;
};

struct DualObservationFile {
  nlohmann::json header;
  std::vector<DualViewObservation> observations;
};

struct DualLabeledFile {
  nlohmann::json header;
  std::vector<DualViewObservation> observations;
  std::vector<DualViewLabels> labels;
};

struct RecordingFile {
  nlohmann::json header;
  MultiCamRecording recording;
};

/// `header` is merged into the standard header fields.
void write_single_view(const std::filesystem::path& path, const nlohmann::json& header,
                       const SingleViewSet& set);
void write_dual_view(const std::filesystem::path& path, const nlohmann::json& header,
                     const DualViewSet& set);
void write_recording(const std::filesystem::path& path, const nlohmann::json& header,
                     const MultiCamRecording& rec);

SingleViewFile load_single_view(const std::filesystem::path& path);
DualObservationFile load_dual_observations(const std::filesystem::path& path);
DualLabeledFile load_dual_labeled(const std::filesystem::path& path);
RecordingFile load_recording(const std::filesystem::path& path);

nlohmann::json rotation_to_json(const Rotation& r);
Rotation rotation_from_json(const nlohmann::json& j);
nlohmann::json vec3_to_json(const Eigen::Vector3d& v);
Eigen::Vector3d vec3_from_json(const nlohmann::json& j);
nlohmann::json extrinsics_to_json(const CameraExtrinsics& e);
CameraExtrinsics extrinsics_from_json(const nlohmann::json& j);

}  // namespace gazeadapt
