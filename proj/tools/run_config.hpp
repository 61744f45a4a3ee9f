#pragma once

// Flat dotted-key run configuration. Every key has a fixed type and a
// default; presets, config files and overrides can only set known keys.
//
// File syntax: one `key = value` per line, `#` starts a comment. Lists are
// comma separated. Angles in keys ending in _deg are degrees.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gazeadapt/engine.hpp"
#include "gazeadapt/eval.hpp"
#include "gazeadapt/simdata.hpp"

namespace gazeadapt::cli {

class RunConfig {
 public:
  /// "default" or "quick"; anything else is an InputError.
  static RunConfig preset(std::string_view name);

  /// Parses `text` according to the key's type.
  void set(const std::string& key, const std::string& text);
  /// `key=value`
  void set_assignment(const std::string& assignment);
  void load_file(const std::filesystem::path& path);

  double real(const std::string& key) const;
  std::uint64_t integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  const nlohmann::json& to_json() const { return values_; }
  static RunConfig from_json(const nlohmann::json& j);

  static std::vector<std::string> keys();

 private:
  RunConfig() = default;
  nlohmann::json values_ = nlohmann::json::object();
};

GeneratorSettings generator_settings(const RunConfig& c);
AppearanceEmbedding embedding(const RunConfig& c);
SceneRanges pretrain_ranges(const RunConfig& c);
Rig rig(const RunConfig& c);
SceneRanges rig_ranges(const RunConfig& c, const Rig& r);
Architecture architecture(const RunConfig& c, std::size_t input_dim);
PretrainConfig pretrain_config(const RunConfig& c);
AdaptConfig adapt_config(const RunConfig& c);
SelectionMode selection_mode(const RunConfig& c);
/// Bin edges in radians.
std::vector<double> bin_edges(const RunConfig& c);
RecordingSettings recording_settings(const RunConfig& c);
RotationRefineOptions refine_options(const RunConfig& c);

}  // namespace gazeadapt::cli
