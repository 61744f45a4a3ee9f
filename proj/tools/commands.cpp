#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gazeadapt/dataset_io.hpp"
#include "gazeadapt/engine.hpp"
#include "gazeadapt/errors.hpp"
#include "gazeadapt/eval.hpp"
#include "gradcheck.hpp"
#include "run_config.hpp"

namespace gazeadapt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Options shared by every command that reads a RunConfig.
struct ConfigOptions {
  std::string preset = "default";
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app, bool with_seed) {
    app->add_option("--preset", preset, "default or quick");
    app->add_option("--config", file, "config file of key = value lines");
    app->add_option("--set", sets, "override one key, key=value (repeatable)");
    if (with_seed) app->add_option("--seed", seed, "seed for this command");
  }

  RunConfig resolve(const std::string& seed_key) const {
    RunConfig c = RunConfig::preset(preset);
    if (!file.empty()) c.load_file(file);
    for (const auto& s : sets) c.set_assignment(s);
    if (seed) c.set(seed_key, std::to_string(*seed));
    return c;
  }
};

json provenance(const std::string& command, const RunConfig& c, const json& inputs = json::object()) {
  return {{"command", command}, {"config", c.to_json()}, {"inputs", inputs}};
}

void ensure_parent(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory for " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("write to " + p.string() + " failed");
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("no such file: " + p.string());
}

// JSONL writer that flushes every line so an aborted run leaves a usable log.
class JsonlLog {
 public:
  explicit JsonlLog(const std::string& path) {
    if (path.empty()) return;
    ensure_parent(path);
    f_.open(path, std::ios::binary | std::ios::trunc);
    if (!f_) throw IoError("cannot open log " + path);
  }
  void write(const json& j) {
    if (!f_.is_open()) return;
    f_ << j.dump() << '\n';
    f_.flush();
    if (!f_) throw IoError("log write failed");
  }

 private:
  std::ofstream f_;
};

json log_header(const std::string& phase, const json& prov) {
  return {{"format", "gazeadapt.trainlog"},
          {"version", kArtifactFormatVersion},
          {"phase", phase},
          {"provenance", prov}};
}

// ---------------------------------------------------------------------------
// sim

struct SimArgs {
  ConfigOptions cfg;
  std::string out;
  std::optional<double> rig_yaw_deg;
  bool random_rig = false;
  bool multicam = false;
};

int cmd_sim(const SimArgs& a, std::ostream& out) {
  RunConfig c = a.cfg.resolve("sim.seed");
  if (a.rig_yaw_deg) c.set("sim.rig_yaw_deg", fmt("%.17g", *a.rig_yaw_deg));
  if (a.random_rig) c.set("sim.random_rig", "true");

  const GeneratorSettings g = generator_settings(c);
  const AppearanceEmbedding emb = embedding(c);
  const Rig r = rig(c);
  const SceneRanges rr = rig_ranges(c, r);
  const json prov = provenance("sim", c);
  const json rig_info = {{"id", r.id},
                         {"relative_angle_deg", rad2deg(r.relative_angle())},
                         {"cam1", extrinsics_to_json(r.cam1)},
                         {"cam2", extrinsics_to_json(r.cam2)}};
  const json header = {{"provenance", prov}, {"seed", g.seed}, {"rig", rig_info}};

  const fs::path dir(a.out);
  const auto pre = generate_single_view(g, emb, pretrain_ranges(c), c.real("sim.distance_m"),
                                        c.integer("sim.pretrain_count"), 0);
  write_single_view(dir / "pretrain.jsonl", header, pre);
  const auto dual = generate_dual_view(g, emb, r, rr, c.integer("sim.rig_count"), 1);
  write_dual_view(dir / "rig.jsonl", header, dual);
  const auto probe = generate_dual_view(g, emb, r, rr, c.integer("sim.probe_count"), 2);
  write_dual_view(dir / "probe.jsonl", header, probe);

  out << "sim: pretrain " << pre.samples.size() << ", rig " << dual.samples.size() << ", probe "
      << probe.samples.size() << " samples; rig " << r.id << " (relative angle "
      << fmt("%.2f", rad2deg(r.relative_angle())) << " deg); seed " << g.seed;
  if (a.multicam) {
    const RecordingSettings rs = recording_settings(c);
    const MultiCamRecording rec = generate_recording(rs);
    write_recording(dir / "multicam.jsonl", {{"provenance", prov}, {"seed", rs.seed}}, rec);
    out << "; multicam " << rec.cameras.size() << " cameras x " << rec.frames.size() << " frames";
  }
  out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainArgs {
  ConfigOptions cfg;
  std::string data, out, log;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out) {
  const RunConfig c = a.cfg.resolve("pretrain.seed");
  require_file(a.data);
  const SingleViewFile data = load_single_view(a.data);
  if (data.samples.empty()) throw InputError("pre-training set is empty");
  const Architecture arch = architecture(c, data.samples.front().x.size());
  const PretrainConfig pc = pretrain_config(c);
  const json prov = provenance("pretrain", c, {{"data", file_digest(a.data)}});

  JsonlLog log(a.log);
  log.write(log_header("pretrain", prov));
  auto res = pretrain(EstimatorParams::random(arch, c.integer("model.init_seed")), data.samples, pc,
                      [&](const PretrainRecord& r) {
                        log.write({{"iteration", r.iteration},
                                   {"gaze_loss", r.gaze_loss},
                                   {"pose_loss", r.pose_loss},
                                   {"total", r.total}});
                      });
  ensure_parent(a.out);
  save_checkpoint(a.out, {res.params, res.optimizer, prov.dump()});
  out << "pretrain: " << pc.iterations << " iterations on " << data.samples.size()
      << " samples, train gaze error " << fmt("%.2f", rad2deg(mean_gaze_error(res.params, data.samples)))
      << " deg, checkpoint " << file_digest(a.out) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// adapt

struct AdaptArgs {
  ConfigOptions cfg;
  std::string init, rig, pretrain_data, probe, out, log;
  bool no_stb = false, no_pre = false;
};

int cmd_adapt(const AdaptArgs& a, std::ostream& out) {
  RunConfig c = a.cfg.resolve("adapt.seed");
  if (a.no_stb) c.set("adapt.enable_stb", "false");
  if (a.no_pre) c.set("adapt.enable_pre", "false");
  const AdaptConfig ac = adapt_config(c);

  require_file(a.init);
  require_file(a.rig);
  const DualObservationFile rig_file = load_dual_observations(a.rig);
  if (rig_file.observations.empty()) throw InputError("rig set is empty");
  const Architecture arch = architecture(c, rig_file.observations.front().x1.size());
  const Checkpoint init = load_checkpoint(a.init, arch);

  json inputs = {{"init", file_digest(a.init)}, {"rig", file_digest(a.rig)}};
  std::vector<SingleViewSample> pre;
  if (ac.enable_pre) {
    if (a.pretrain_data.empty()) throw InputError("--pretrain-data is required unless --no-pre");
    require_file(a.pretrain_data);
    pre = load_single_view(a.pretrain_data).samples;
    inputs["pretrain_data"] = file_digest(a.pretrain_data);
  }
  std::vector<DualViewObservation> probe;
  if (!a.probe.empty()) {
    require_file(a.probe);
    probe = load_dual_observations(a.probe).observations;
    inputs["probe"] = file_digest(a.probe);
  }
  const json prov = provenance("adapt", c, inputs);

  JsonlLog log(a.log);
  json header = log_header("adapt", prov);
  header["initial_consistency"] =
      probe.empty() ? json(nullptr) : json(probe_consistency(init.params, probe));
  log.write(header);

  std::optional<AdaptResult> res;
  try {
    res = adapt(init.params, rig_file.observations, pre, probe, ac, [&](const AdaptRecord& r) {
      json j = {{"iteration", r.iteration}, {"l_mut", r.l_mut},   {"l_stb", r.l_stb},
                {"l_pre", r.l_pre},         {"total", r.total},   {"f_mean", r.f_mean},
                {"c", r.c},                 {"first_view_reliable", r.first_view_reliable}};
      if (r.consistency) j["consistency"] = *r.consistency;
      log.write(j);
    });
  } catch (const NumericError& e) {
    log.write({{"aborted", e.what()}});
    throw;
  }
  ensure_parent(a.out);
  save_checkpoint(a.out, {res->params, res->optimizer, prov.dump()});

  out << "adapt: " << ac.iterations << " iterations on " << rig_file.observations.size()
      << " pairs, C " << fmt("%.6f", res->log.initial_c) << " -> "
      << fmt("%.6f", res->log.records.empty() ? res->log.initial_c : res->log.records.back().c);
  if (res->log.initial_consistency) {
    out << ", probe consistency " << fmt("%.2f", rad2deg(*res->log.initial_consistency)) << " -> "
        << fmt("%.2f", rad2deg(probe_consistency(res->params, probe))) << " deg";
  }
  out << ", checkpoint " << file_digest(a.out) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

json metrics_json(const MetricReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins.bins) {
    bins.push_back({{"lo_deg", rad2deg(b.lo)},
                    {"hi_deg", rad2deg(b.hi)},
                    {"count", b.count},
                    {"mono_deg", b.mono ? json(rad2deg(*b.mono)) : json(nullptr)},
                    {"dual_s_count", b.dual_s_count},
                    {"dual_s_deg", b.dual_s ? json(rad2deg(*b.dual_s)) : json(nullptr)}});
  }
  return {{"mono_deg", rad2deg(r.mono)},
          {"dual_s_deg", rad2deg(r.dual_s)},
          {"dual_a_deg", rad2deg(r.dual_a)},
          {"dual_a_degenerate", r.dual_a_degenerate},
          {"hpose_deg", rad2deg(r.hpose)},
          {"consistency_deg", rad2deg(r.consistency)},
          {"bins", bins},
          {"bins_outside", r.bins.outside}};
}

// Positive when `after` is lower (better) than `before`.
json improvement(double before, double after) {
  if (before == after) return 0.0;
  if (before == 0.0) return nullptr;
  return 100.0 * (before - after) / before;
}

struct EvalArgs {
  ConfigOptions cfg;
  std::string ckpt, compare, data, out, bins_csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig c = a.cfg.resolve("");
  const std::vector<double> edges = bin_edges(c);
  const SelectionMode primary = selection_mode(c);
  require_file(a.data);
  require_file(a.ckpt);
  if (!a.compare.empty()) require_file(a.compare);
  const DualLabeledFile data = load_dual_labeled(a.data);
  if (data.observations.empty()) throw InputError("evaluation set is empty");
  const std::size_t d = data.observations.front().x1.size();

  struct Model {
    std::string role, path;
    MetricReport by_mode[2];
  };
  std::vector<Model> models;
  if (a.compare.empty()) {
    models.push_back({"model", a.ckpt, {}});
  } else {
    models.push_back({"before", a.ckpt, {}});
    models.push_back({"after", a.compare, {}});
  }
  const SelectionMode modes[2] = {SelectionMode::kPredicted, SelectionMode::kLabel};
  json inputs = {{"data", file_digest(a.data)}};
  for (auto& m : models) {
    const Checkpoint ck = load_checkpoint(m.path);
    if (ck.params.arch().input_dim != d)
      throw ArchitectureMismatch("checkpoint " + m.path + " expects " +
                                 std::to_string(ck.params.arch().input_dim) +
                                 " features, data has " + std::to_string(d));
    const auto preds = predict_all(ck.params, data.observations);
    for (int i = 0; i < 2; ++i) m.by_mode[i] = evaluate(preds, data.labels, edges, modes[i]);
    inputs[m.role] = file_digest(m.path);
  }
  const json prov = provenance("eval", c, inputs);

  json report = {{"format", "gazeadapt.report"},
                 {"version", kArtifactFormatVersion},
                 {"provenance", prov},
                 {"units", "degrees"},
                 {"samples", data.observations.size()},
                 {"primary_selection_mode", std::string(to_string(primary))}};
  json results = json::object();
  for (const auto& m : models) {
    json per = json::object();
    for (int i = 0; i < 2; ++i) per[std::string(to_string(modes[i]))] = metrics_json(m.by_mode[i]);
    results[m.role] = per;
  }
  report["results"] = results;
  if (models.size() == 2) {
    json imp = json::object();
    for (int i = 0; i < 2; ++i) {
      const MetricReport& b = models[0].by_mode[i];
      const MetricReport& f = models[1].by_mode[i];
      imp[std::string(to_string(modes[i]))] = {{"mono", improvement(b.mono, f.mono)},
                                               {"dual_s", improvement(b.dual_s, f.dual_s)},
                                               {"dual_a", improvement(b.dual_a, f.dual_a)},
                                               {"hpose", improvement(b.hpose, f.hpose)},
                                               {"consistency",
                                                improvement(b.consistency, f.consistency)}};
    }
    report["improvement_percent"] = imp;
  }
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");

  if (!a.bins_csv.empty()) {
    std::ostringstream csv;
    csv << "# format_version=" << kArtifactFormatVersion << "\n";
    csv << "# provenance=" << prov.dump() << "\n";
    csv << "model,selection_mode,lo_deg,hi_deg,count,mono_deg,dual_s_count,dual_s_deg\n";
    for (const auto& m : models) {
      for (int i = 0; i < 2; ++i) {
        const std::string prefix = m.role + "," + std::string(to_string(modes[i])) + ",";
        for (const auto& b : m.by_mode[i].bins.bins) {
          csv << prefix << fmt("%.2f", rad2deg(b.lo)) << "," << fmt("%.2f", rad2deg(b.hi)) << ","
              << b.count << "," << (b.mono ? fmt("%.2f", rad2deg(*b.mono)) : "") << ","
              << b.dual_s_count << "," << (b.dual_s ? fmt("%.2f", rad2deg(*b.dual_s)) : "") << "\n";
        }
        csv << prefix << "outside,," << m.by_mode[i].bins.outside << ",,,\n";
      }
    }
    write_text(a.bins_csv, csv.str());
  }

  const int pi = primary == SelectionMode::kPredicted ? 0 : 1;
  out << "eval (" << to_string(primary) << " selection, " << data.observations.size()
      << " pairs, degrees)\n";
  out << "  model    mono   dual-s  dual-a  hpose  consistency\n";
  for (const auto& m : models) {
    const MetricReport& r = m.by_mode[pi];
    char line[160];
    std::snprintf(line, sizeof line, "  %-7s %6.2f %7.2f %7.2f %6.2f %8.2f\n", m.role.c_str(),
                  rad2deg(r.mono), rad2deg(r.dual_s), rad2deg(r.dual_a), rad2deg(r.hpose),
                  rad2deg(r.consistency));
    out << line;
  }
  if (models.size() == 2) {
    const json& imp = report["improvement_percent"][std::string(to_string(primary))];
    auto pct = [](const json& v) { return v.is_null() ? std::string("n/a") : fmt("%+.1f%%", v.get<double>()); };
    out << "  improvement: mono " << pct(imp["mono"]) << ", dual-s " << pct(imp["dual_s"])
        << ", dual-a " << pct(imp["dual_a"]) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// refine

struct RefineArgs {
  ConfigOptions cfg;
  std::string recording, out;
};

int cmd_refine(const RefineArgs& a, std::ostream& out) {
  const RunConfig c = a.cfg.resolve("refine.seed");
  const RotationRefineOptions opt = refine_options(c);
  require_file(a.recording);
  const RecordingFile file = load_recording(a.recording);
  const MultiCamRecording& rec = file.recording;
  const auto positions = refine_head_positions(rec);
  const std::size_t k = rec.cameras.size();

  json frames = json::array();
  double before_sum = 0.0, after_sum = 0.0, max_corr = 0.0;
  const std::vector<Eigen::Vector3d> zero(k, Eigen::Vector3d::Zero());
  for (std::size_t f = 0; f < rec.frames.size(); ++f) {
    const RecordingFrame& fr = rec.frames[f];
    std::vector<Eigen::Vector3d> raw_pos(k);
    for (std::size_t i = 0; i < k; ++i) raw_pos[i] = fr.labels[i].position;
    const double before = head_frame_gaze_variance(fr, raw_pos, zero);
    const FrameRefinement r = refine_head_rotations(fr, positions[f], opt);
    before_sum += before;
    after_sum += r.variance_final;
    json labels = json::array();
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Vector3d rot = fr.labels[i].rotation + r.corrections[i];
      max_corr = std::max(max_corr, r.corrections[i].cwiseAbs().maxCoeff());
      labels.push_back({{"position", vec3_to_json(positions[f][i])},
                        {"rotation_deg", vec3_to_json(rot * (180.0 / kPi))},
                        {"correction_deg", vec3_to_json(r.corrections[i] * (180.0 / kPi))}});
    }
    frames.push_back({{"frame", f},
                      {"variance_before", before},
                      {"variance_after_positions", r.variance_initial},
                      {"variance_after", r.variance_final},
                      {"labels", labels}});
  }
  const double n = static_cast<double>(std::max<std::size_t>(rec.frames.size(), 1));
  const double vb = before_sum / n, va = after_sum / n;
  const json summary = {{"frames", rec.frames.size()},
                        {"cameras", k},
                        {"delta", opt.delta},
                        {"variance_before_mean", vb},
                        {"variance_after_mean", va},
                        {"reduction_percent", vb > 0.0 ? 100.0 * (vb - va) / vb : 0.0},
                        {"max_abs_correction_deg", rad2deg(max_corr)}};
  const json doc = {{"format", "gazeadapt.refined"},
                    {"version", kArtifactFormatVersion},
                    {"provenance", provenance("refine", c, {{"recording", file_digest(a.recording)}})},
                    {"delta", opt.delta},
                    {"summary", summary},
                    {"frames", frames}};
  write_text(a.out, doc.dump() + "\n");
  out << "refine: " << rec.frames.size() << " frames x " << k << " cameras, delta "
      << fmt("%g", opt.delta) << ", variance " << fmt("%.4g", vb) << " -> " << fmt("%.4g", va)
      << " (" << fmt("%.1f", summary["reduction_percent"].get<double>())
      << "% reduction), max correction " << fmt("%.3f", rad2deg(max_corr)) << " deg\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const GradcheckOptions& opt, const std::string& out_path, std::ostream& out) {
  const GradcheckReport rep = run_gradcheck(opt);
  json suites = json::array();
  for (const auto& s : rep.suites) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %s  max rel error %.3e over %zu coordinates", s.name.c_str(),
                  s.passed ? "PASS" : "FAIL", s.max_rel_error, s.coordinates);
    out << line;
    if (!s.passed) {
      out << "  worst: config " << s.worst.configuration << " index " << s.worst.index
          << " analytic " << fmt("%.10g", s.worst.analytic) << " numeric "
          << fmt("%.10g", s.worst.numeric);
    }
    out << "\n";
    suites.push_back({{"name", s.name},
                      {"passed", s.passed},
                      {"configurations", s.configurations},
                      {"coordinates", s.coordinates},
                      {"max_rel_error", s.max_rel_error},
                      {"worst",
                       {{"configuration", s.worst.configuration},
                        {"index", s.worst.index},
                        {"analytic", s.worst.analytic},
                        {"numeric", s.worst.numeric}}}});
  }
  if (!out_path.empty()) {
    const json doc = {{"format", "gazeadapt.gradcheck"},
                      {"version", kArtifactFormatVersion},
                      {"seed", opt.seed},
                      {"step", opt.step},
                      {"tolerance", opt.tolerance},
                      {"passed", rep.passed()},
                      {"suites", suites}};
    write_text(out_path, doc.dump(2) + "\n");
  }
  out << (rep.passed() ? "gradcheck: all suites passed\n" : "gradcheck: FAILED\n");
  return rep.passed() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-view gaze estimator adaptation toolkit", "gazeadapt"};
  app.require_subcommand(1);

  SimArgs sim;
  auto* s = app.add_subcommand("sim", "generate synthetic datasets");
  sim.cfg.attach(s, true);
  s->add_option("--out", sim.out, "output directory")->required();
  s->add_option("--rig-yaw-deg", sim.rig_yaw_deg, "relative yaw of the second camera");
  s->add_flag("--random-rig", sim.random_rig, "draw the rig from sim.rig_seed");
  s->add_flag("--multicam", sim.multicam, "also write a multi-camera recording");

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "supervised single-view training");
  pre.cfg.attach(p, true);
  p->add_option("--data", pre.data, "single-view dataset")->required();
  p->add_option("--out", pre.out, "checkpoint path")->required();
  p->add_option("--log", pre.log, "per-iteration log (JSON lines)");

  AdaptArgs ad;
  auto* a = app.add_subcommand("adapt", "unsupervised adaptation to a dual-camera rig");
  ad.cfg.attach(a, true);
  a->add_option("--init", ad.init, "pre-trained checkpoint")->required();
  a->add_option("--rig", ad.rig, "dual-view observations")->required();
  a->add_option("--pretrain-data", ad.pretrain_data, "labelled single-view set for the anchor term");
  a->add_option("--probe", ad.probe, "held-out dual-view set for consistency tracking");
  a->add_option("--out", ad.out, "checkpoint path")->required();
  a->add_option("--log", ad.log, "per-iteration log (JSON lines)");
  a->add_flag("--no-stb", ad.no_stb, "disable the stabilization term");
  a->add_flag("--no-pre", ad.no_pre, "disable the pre-training anchor term");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "metrics on a labelled dual-view set");
  ev.cfg.attach(e, false);
  e->add_option("--ckpt", ev.ckpt, "checkpoint (the 'before' model with --compare)")->required();
  e->add_option("--compare", ev.compare, "second checkpoint (the 'after' model)");
  e->add_option("--data", ev.data, "labelled dual-view set")->required();
  e->add_option("--out", ev.out, "report path (JSON)");
  e->add_option("--bins-csv", ev.bins_csv, "per head-angle bin table");

  RefineArgs rf;
  auto* r = app.add_subcommand("refine", "multi-camera label refinement");
  rf.cfg.attach(r, false);
  r->add_option("--recording", rf.recording, "multi-camera recording")->required();
  r->add_option("--out", rf.out, "refined labels path")->required();

  GradcheckOptions gc;
  std::string gc_out, gc_corrupt;
  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  g->add_option("--configs", gc.configurations, "configurations per suite");
  g->add_option("--seed", gc.seed, "seed");
  g->add_option("--out", gc_out, "report path (JSON)");
  g->add_option("--corrupt", gc_corrupt, "")->group("");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_sim(sim, out);
    if (p->parsed()) return cmd_pretrain(pre, out);
    if (a->parsed()) return cmd_adapt(ad, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (r->parsed()) return cmd_refine(rf, out);
    if (g->parsed()) {
      if (!gc_corrupt.empty()) gc.corrupt = gc_corrupt;
      return cmd_gradcheck(gc, gc_out, out);
    }
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ArchitectureMismatch& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const IoError& ex) {
    err << "I/O error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const FormatError& ex) {
    err << "format error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace gazeadapt::cli
