#include "gazeadapt/dataset_io.hpp"

#include <fstream>

#include "gazeadapt/errors.hpp"

namespace gazeadapt {

using nlohmann::json;

json rotation_to_json(const Rotation& r) { return r.row_major(); }

Rotation rotation_from_json(const json& j) {
  return Rotation::from_row_major(j.get<std::array<double, 9>>());
}

json vec3_to_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d vec3_from_json(const json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

json extrinsics_to_json(const CameraExtrinsics& e) {
  return {{"r", rotation_to_json(e.rotation)}, {"t", vec3_to_json(e.translation)}};
}

CameraExtrinsics extrinsics_from_json(const json& j) {
  return {rotation_from_json(j.at("r")), vec3_from_json(j.at("t"))};
}

namespace {

json labels_to_json(const ViewLabels& l) {
  return {{"gaze", vec3_to_json(l.gaze.vec())},
          {"pose", {l.pose.yaw, l.pose.pitch, l.pose.roll}},
          {"theta", l.theta}};
}

ViewLabels labels_from_json(const json& j) {
  ViewLabels l;
  l.gaze = UnitVec3::from_unit(vec3_from_json(j.at("gaze")));
  const auto p = j.at("pose").get<std::array<double, 3>>();
  l.pose = {p[0], p[1], p[2]};
  l.theta = j.at("theta").get<double>();
  return l;
}

json base_header(const json& extra, const char* kind, std::size_t feature_dim, std::size_t count) {
  json h = {{"format", "gazeadapt.dataset"},
            {"version", kDatasetFormatVersion},
            {"kind", kind},
            {"feature_dim", feature_dim},
            {"count", count}};
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) h[k] = v;
  return h;
}

class LineWriter {
 public:
  explicit LineWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void line(const json& j) {
    out_ << j.dump() << '\n';
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct ParsedFile {
  json header;
  std::vector<json> records;
};

ParsedFile read_lines(const std::filesystem::path& path, const char* expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ParsedFile f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (lineno == 1)
      f.header = std::move(j);
    else
      f.records.push_back(std::move(j));
  }
  if (lineno == 0) throw FormatError(path.string() + ": empty file");
  if (f.header.value("format", "") != "gazeadapt.dataset")
    throw FormatError(path.string() + ": not a dataset file");
  if (f.header.value("version", 0) != kDatasetFormatVersion)
    throw FormatError(path.string() + ": unsupported dataset version");
  if (f.header.value("kind", "") != expected_kind)
    throw FormatError(path.string() + ": expected a '" + expected_kind + "' dataset, found '" +
                      f.header.value("kind", "") + "'");
  return f;
}

template <typename Fn>
void each_record(const std::filesystem::path& path, const std::vector<json>& records, Fn&& fn) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      fn(records[i]);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
    }
  }
}

NormalizationTransform transform_from_json(const json& j) { return {rotation_from_json(j)}; }

}  // namespace

void write_single_view(const std::filesystem::path& path, const json& header,
                       const SingleViewSet& set) {
  const std::size_t d = set.samples.empty() ? 0 : set.samples.front().x.size();
  LineWriter w(path);
  w.line(base_header(header, "single", d, set.samples.size()));
  for (const auto& s : set.samples)
    w.line({{"id", s.id}, {"x", s.x}, {"w", rotation_to_json(s.w.w)}, {"label", labels_to_json(s.labels)}});
}

void write_dual_view(const std::filesystem::path& path, const json& header,
                     const DualViewSet& set) {
  const std::size_t d = set.samples.empty() ? 0 : set.samples.front().obs.x1.size();
  LineWriter w(path);
  w.line(base_header(header, "dual", d, set.samples.size()));
  for (const auto& s : set.samples) {
    const json views = json::array(
        {{{"x", s.obs.x1}, {"w", rotation_to_json(s.obs.w1.w)}, {"hidden", labels_to_json(s.labels.view1)}},
         {{"x", s.obs.x2}, {"w", rotation_to_json(s.obs.w2.w)}, {"hidden", labels_to_json(s.labels.view2)}}});
    const json world = {{"head_rotation", rotation_to_json(s.world.subject.head)},
                        {"head_position", vec3_to_json(s.world.subject.position)},
                        {"gaze", vec3_to_json(s.world.subject.gaze.vec())},
                        {"cam1", extrinsics_to_json(s.world.rig.cam1)},
                        {"cam2", extrinsics_to_json(s.world.rig.cam2)}};
    w.line({{"id", s.obs.id}, {"rig", s.world.rig.id}, {"views", views}, {"world", world}});
  }
}

void write_recording(const std::filesystem::path& path, const json& header,
                     const MultiCamRecording& rec) {
  json h = base_header(header, "multicam", 0, rec.frames.size());
  json cams = json::array();
  for (const auto& c : rec.cameras) cams.push_back(extrinsics_to_json(c));
  h["cameras"] = cams;
  LineWriter w(path);
  w.line(h);
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    json labels = json::array();
    for (const auto& l : rec.frames[i].labels)
      labels.push_back({{"position", vec3_to_json(l.position)},
                        {"rotation", vec3_to_json(l.rotation)},
                        {"target", vec3_to_json(l.target)}});
    w.line({{"frame", i}, {"labels", labels}});
  }
}

SingleViewFile load_single_view(const std::filesystem::path& path) {
  ParsedFile f = read_lines(path, "single");
  SingleViewFile out{std::move(f.header), {}};
  out.samples.reserve(f.records.size());
  each_record(path, f.records, [&](const json& r) {
    SingleViewSample s;
    s.id = r.at("id").get<std::uint64_t>();
    s.x = r.at("x").get<FeatureVec>();
    s.w = transform_from_json(r.at("w"));
    s.labels = labels_from_json(r.at("label"));
    out.samples.push_back(std::move(s));
  });
  return out;
}

namespace {

DualViewObservation observation_from_json(const json& r) {
  const json& v = r.at("views");
  if (!v.is_array() || v.size() != 2) throw FormatError("dual-view record needs two views");
  DualViewObservation o;
  o.id = r.at("id").get<std::uint64_t>();
  o.x1 = v[0].at("x").get<FeatureVec>();
  o.x2 = v[1].at("x").get<FeatureVec>();
  o.w1 = transform_from_json(v[0].at("w"));
  o.w2 = transform_from_json(v[1].at("w"));
  return o;
}

}  // namespace

DualObservationFile load_dual_observations(const std::filesystem::path& path) {
  ParsedFile f = read_lines(path, "dual");
  DualObservationFile out{std::move(f.header), {}};
  out.observations.reserve(f.records.size());
  each_record(path, f.records,
              [&](const json& r) { out.observations.push_back(observation_from_json(r)); });
  return out;
}

DualLabeledFile load_dual_labeled(const std::filesystem::path& path) {
  ParsedFile f = read_lines(path, "dual");
  DualLabeledFile out{std::move(f.header), {}, {}};
  out.observations.reserve(f.records.size());
  out.labels.reserve(f.records.size());
  each_record(path, f.records, [&](const json& r) {
    out.observations.push_back(observation_from_json(r));
    const json& v = r.at("views");
    out.labels.push_back({labels_from_json(v[0].at("hidden")), labels_from_json(v[1].at("hidden"))});
  });
  return out;
}

RecordingFile load_recording(const std::filesystem::path& path) {
  ParsedFile f = read_lines(path, "multicam");
  RecordingFile out{std::move(f.header), {}};
  try {
    for (const auto& c : out.header.at("cameras")) out.recording.cameras.push_back(extrinsics_from_json(c));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad camera block: " + e.what());
  }
  each_record(path, f.records, [&](const json& r) {
    RecordingFrame frame;
    for (const auto& l : r.at("labels"))
      frame.labels.push_back({vec3_from_json(l.at("position")), vec3_from_json(l.at("rotation")),
                              vec3_from_json(l.at("target"))});
    out.recording.frames.push_back(std::move(frame));
  });
  try {
    out.recording.validate();
  } catch (const InputError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace gazeadapt
