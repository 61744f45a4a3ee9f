#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "gazeadapt/errors.hpp"

namespace gazeadapt::cli {
namespace {

using nlohmann::json;

enum class Kind { kReal, kInt, kBool, kText, kList };

struct KeySpec {
  Kind kind;
  json value;
};

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = {
      {"sim.seed", {Kind::kInt, 1}},
      {"sim.feature_dim", {Kind::kInt, 32}},
      {"sim.embedding_seed", {Kind::kInt, 24301}},
      {"sim.embedding_gaze_scale", {Kind::kReal, 0.5}},
      {"sim.embedding_pose_scale", {Kind::kReal, 2.0}},
      {"sim.noise_sigma0", {Kind::kReal, 0.05}},
      {"sim.noise_sigma1", {Kind::kReal, 0.1}},
      {"sim.pretrain_count", {Kind::kInt, 20000}},
      {"sim.rig_count", {Kind::kInt, 4000}},
      {"sim.probe_count", {Kind::kInt, 512}},
      {"sim.distance_m", {Kind::kReal, 1.0}},
      {"sim.rig_yaw_deg", {Kind::kReal, 50.0}},
      {"sim.random_rig", {Kind::kBool, false}},
      {"sim.rig_seed", {Kind::kInt, 7}},
      {"sim.pretrain_yaw_deg", {Kind::kReal, 45.0}},
      {"sim.pretrain_pitch_deg", {Kind::kReal, 20.0}},
      {"sim.pretrain_roll_deg", {Kind::kReal, 10.0}},
      {"sim.pretrain_cone_deg", {Kind::kReal, 30.0}},
      {"sim.rig_yaw_margin_deg", {Kind::kReal, 25.0}},
      {"sim.rig_pitch_deg", {Kind::kReal, 20.0}},
      {"sim.rig_roll_deg", {Kind::kReal, 10.0}},
      {"sim.rig_cone_deg", {Kind::kReal, 30.0}},
      {"sim.jitter_m", {Kind::kReal, 0.05}},
      {"model.hidden", {Kind::kInt, 64}},
      {"model.init_seed", {Kind::kInt, 1}},
      {"pretrain.iterations", {Kind::kInt, 20000}},
      {"pretrain.batch_size", {Kind::kInt, 64}},
      {"pretrain.lr", {Kind::kReal, 1e-4}},
      {"pretrain.pose_weight", {Kind::kReal, 1.0}},
      {"pretrain.seed", {Kind::kInt, 1}},
      {"adapt.iterations", {Kind::kInt, 3000}},
      {"adapt.batch_size", {Kind::kInt, 64}},
      {"adapt.lr", {Kind::kReal, 1e-5}},
      {"adapt.lambda_stb", {Kind::kReal, 50.0}},
      {"adapt.lambda_pre", {Kind::kReal, 10.0}},
      {"adapt.eta", {Kind::kReal, 0.99}},
      {"adapt.seed", {Kind::kInt, 1}},
      {"adapt.enable_stb", {Kind::kBool, true}},
      {"adapt.enable_pre", {Kind::kBool, true}},
      {"adapt.probe_every", {Kind::kInt, 50}},
      {"eval.selection_mode", {Kind::kText, "predicted"}},
      {"eval.bin_edges_deg", {Kind::kList, json::array({0.0, 15.0, 30.0, 45.0, 60.0})}},
      {"refine.seed", {Kind::kInt, 1}},
      {"refine.cameras", {Kind::kInt, 18}},
      {"refine.frames", {Kind::kInt, 100}},
      {"refine.rotation_noise_deg", {Kind::kReal, 2.0}},
      {"refine.position_noise_m", {Kind::kReal, 0.01}},
      {"refine.target_distance_m", {Kind::kReal, 0.8}},
      {"refine.camera_distance_m", {Kind::kReal, 1.0}},
      {"refine.delta", {Kind::kReal, 1e-4}},
      {"refine.steps", {Kind::kInt, 2000}},
      {"refine.step_size", {Kind::kReal, 1e-2}},
      {"refine.smooth_eps", {Kind::kReal, 1e-6}},
  };
  return s;
}

// Small enough for unit tests and CLI smoke runs.
const std::map<std::string, std::string>& quick_overrides() {
  static const std::map<std::string, std::string> q = {
      {"sim.pretrain_count", "2000"}, {"sim.rig_count", "400"},   {"sim.probe_count", "128"},
      {"model.hidden", "32"},         {"pretrain.iterations", "500"},
      {"adapt.iterations", "100"},    {"adapt.probe_every", "25"}, {"refine.frames", "10"},
      {"refine.steps", "300"},
  };
  return q;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& key, const std::string& t) {
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto r = std::from_chars(t.data(), end, v);
  if (t.empty() || r.ec != std::errc() || r.ptr != end || !std::isfinite(v))
    throw InputError("'" + key + "' expects a number, got '" + t + "'");
  return v;
}

json parse_value(const std::string& key, Kind kind, const std::string& raw) {
  const std::string t = trim(raw);
  switch (kind) {
    case Kind::kReal:
      return parse_real(key, t);
    case Kind::kInt: {
      std::uint64_t v = 0;
      const auto* end = t.data() + t.size();
      const auto r = std::from_chars(t.data(), end, v);
      if (t.empty() || r.ec != std::errc() || r.ptr != end)
        throw InputError("'" + key + "' expects a non-negative integer, got '" + t + "'");
      return v;
    }
    case Kind::kBool:
      if (t == "true" || t == "1" || t == "yes") return true;
      if (t == "false" || t == "0" || t == "no") return false;
      throw InputError("'" + key + "' expects true or false, got '" + t + "'");
    case Kind::kText:
      return t;
    case Kind::kList: {
      json arr = json::array();
      std::size_t pos = 0;
      while (pos <= t.size()) {
        const auto comma = t.find(',', pos);
        const std::string item = trim(t.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        arr.push_back(parse_real(key, item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      return arr;
    }
  }
  return {};
}

const KeySpec& spec_of(const std::string& key) {
  const auto it = schema().find(key);
  if (it == schema().end()) throw InputError("unknown config key '" + key + "'");
  return it->second;
}

}  // namespace

RunConfig RunConfig::preset(std::string_view name) {
  RunConfig c;
  for (const auto& [k, s] : schema())
    c.values_[k] = s.kind == Kind::kInt ? json(s.value.get<std::uint64_t>()) : s.value;
  if (name == "default") return c;
  if (name == "quick") {
    for (const auto& [k, v] : quick_overrides()) c.set(k, v);
    return c;
  }
  throw InputError("unknown preset '" + std::string(name) + "' (expected default or quick)");
}

void RunConfig::set(const std::string& key, const std::string& text) {
  values_[key] = parse_value(key, spec_of(key).kind, text);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InputError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      set_assignment(line);
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

double RunConfig::real(const std::string& key) const { return values_.at(key).get<double>(); }
std::uint64_t RunConfig::integer(const std::string& key) const {
  return values_.at(key).get<std::uint64_t>();
}
bool RunConfig::flag(const std::string& key) const { return values_.at(key).get<bool>(); }
std::string RunConfig::text(const std::string& key) const {
  return values_.at(key).get<std::string>();
}
std::vector<double> RunConfig::list(const std::string& key) const {
  return values_.at(key).get<std::vector<double>>();
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c = preset("default");
  if (!j.is_object()) throw FormatError("embedded config is not an object");
  for (const auto& [k, v] : j.items()) {
    const KeySpec& s = spec_of(k);
    const bool ok = (s.kind == Kind::kReal && v.is_number()) ||
                    (s.kind == Kind::kInt && v.is_number_integer() && v.get<std::int64_t>() >= 0) ||
                    (s.kind == Kind::kBool && v.is_boolean()) ||
                    (s.kind == Kind::kText && v.is_string()) || (s.kind == Kind::kList && v.is_array());
    if (!ok) throw FormatError("embedded config key '" + k + "' has the wrong type");
    if (s.kind == Kind::kReal)
      c.values_[k] = v.get<double>();
    else if (s.kind == Kind::kInt)
      c.values_[k] = v.get<std::uint64_t>();
    else
      c.values_[k] = v;
  }
  return c;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, s] : schema()) out.push_back(k);
  return out;
}

GeneratorSettings generator_settings(const RunConfig& c) {
  GeneratorSettings g;
  g.seed = c.integer("sim.seed");
  g.feature_dim = c.integer("sim.feature_dim");
  g.embedding_seed = c.integer("sim.embedding_seed");
  g.embedding_gaze_scale = c.real("sim.embedding_gaze_scale");
  g.embedding_pose_scale = c.real("sim.embedding_pose_scale");
  g.noise.sigma0 = c.real("sim.noise_sigma0");
  g.noise.sigma1 = c.real("sim.noise_sigma1");
  return g;
}

AppearanceEmbedding embedding(const RunConfig& c) {
  const GeneratorSettings g = generator_settings(c);
  return AppearanceEmbedding::make(g.feature_dim, g.embedding_seed, g.embedding_gaze_scale,
                                   g.embedding_pose_scale);
}

SceneRanges pretrain_ranges(const RunConfig& c) {
  SceneRanges r;
  r.yaw_max = deg2rad(c.real("sim.pretrain_yaw_deg"));
  r.yaw_min = -r.yaw_max;
  r.pitch_max = deg2rad(c.real("sim.pretrain_pitch_deg"));
  r.pitch_min = -r.pitch_max;
  r.roll_max = deg2rad(c.real("sim.pretrain_roll_deg"));
  r.gaze_cone = deg2rad(c.real("sim.pretrain_cone_deg"));
  r.position_jitter = c.real("sim.jitter_m");
  r.validate();
  return r;
}

Rig rig(const RunConfig& c) {
  const double d = c.real("sim.distance_m");
  if (c.flag("sim.random_rig")) return make_random_rig(c.integer("sim.rig_seed"), d);
  return make_rig(deg2rad(c.real("sim.rig_yaw_deg")), d, "yaw" + nlohmann::json(c.real("sim.rig_yaw_deg")).dump());
}

SceneRanges rig_ranges(const RunConfig& c, const Rig& r) {
  return rig_scene_ranges(r, deg2rad(c.real("sim.rig_yaw_margin_deg")),
                          deg2rad(c.real("sim.rig_pitch_deg")), deg2rad(c.real("sim.rig_roll_deg")),
                          deg2rad(c.real("sim.rig_cone_deg")), c.real("sim.jitter_m"));
}

Architecture architecture(const RunConfig& c, std::size_t input_dim) {
  Architecture a;
  a.input_dim = input_dim;
  a.hidden_dim = c.integer("model.hidden");
  return a;
}

PretrainConfig pretrain_config(const RunConfig& c) {
  PretrainConfig p;
  p.iterations = c.integer("pretrain.iterations");
  p.batch_size = c.integer("pretrain.batch_size");
  p.lr = c.real("pretrain.lr");
  p.pose_weight = c.real("pretrain.pose_weight");
  p.seed = c.integer("pretrain.seed");
  p.validate();
  return p;
}

AdaptConfig adapt_config(const RunConfig& c) {
  AdaptConfig a;
  a.iterations = c.integer("adapt.iterations");
  a.batch_size = c.integer("adapt.batch_size");
  a.lr = c.real("adapt.lr");
  a.lambda_stb = c.real("adapt.lambda_stb");
  a.lambda_pre = c.real("adapt.lambda_pre");
  a.eta = c.real("adapt.eta");
  a.seed = c.integer("adapt.seed");
  a.enable_stb = c.flag("adapt.enable_stb");
  a.enable_pre = c.flag("adapt.enable_pre");
  a.probe_every = c.integer("adapt.probe_every");
  a.validate();
  return a;
}

SelectionMode selection_mode(const RunConfig& c) {
  return selection_mode_from_string(c.text("eval.selection_mode"));
}

std::vector<double> bin_edges(const RunConfig& c) {
  std::vector<double> e = c.list("eval.bin_edges_deg");
  for (double& x : e) x = deg2rad(x);
  return e;
}

RecordingSettings recording_settings(const RunConfig& c) {
  RecordingSettings s;
  s.seed = c.integer("refine.seed");
  s.cameras = c.integer("refine.cameras");
  s.frames = c.integer("refine.frames");
  s.rotation_noise = deg2rad(c.real("refine.rotation_noise_deg"));
  s.position_noise = c.real("refine.position_noise_m");
  s.target_distance = c.real("refine.target_distance_m");
  s.camera_distance = c.real("refine.camera_distance_m");
  return s;
}

RotationRefineOptions refine_options(const RunConfig& c) {
  RotationRefineOptions o;
  o.delta = c.real("refine.delta");
  o.steps = c.integer("refine.steps");
  o.step_size = c.real("refine.step_size");
  o.smooth_eps = c.real("refine.smooth_eps");
  if (!(o.delta >= 0.0) || !(o.step_size > 0.0) || !(o.smooth_eps > 0.0))
    throw InputError("invalid refinement options");
  return o;
}

}  // namespace gazeadapt::cli
