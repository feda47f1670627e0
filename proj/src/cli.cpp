#include "polarguide/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "polarguide/analysis.hpp"
#include "polarguide/bridge_protocol.hpp"
#include "polarguide/config.hpp"
#include "polarguide/decomposition.hpp"
#include "polarguide/io.hpp"
#include "polarguide/metrics.hpp"
#include "polarguide/parallel.hpp"
#include "polarguide/version.hpp"

namespace polarguide::cli {
namespace fs = std::filesystem;
using config::Json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumeric:
      return kExitNumeric;
    case ErrorKind::kIo:
    case ErrorKind::kShape:
      return kExitIo;
    case ErrorKind::kConfig:
    case ErrorKind::kDomain:
      return kExitConfig;
    case ErrorKind::kBridge:
    case ErrorKind::kCapability:
      return kExitBridge;
  }
  return kExitConfig;
}

namespace {

// Flags shared by every command that runs guidance.
struct GuidanceFlags {
  std::string config;
  std::optional<double> eta;
  std::optional<int> steps;
  std::optional<int> activation;
  std::optional<double> lr_ls;
  std::optional<double> lr_ox;
  std::optional<double> lr_on;
  std::string camera;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "Guidance config (JSON)");
    app->add_option("--eta", eta, "Refractive index");
    app->add_option("--steps", steps, "Optimization steps T");
    app->add_option("--activation-step", activation, "First step that updates O_n");
    app->add_option("--lr-ls", lr_ls, "Adam learning rate for L_s");
    app->add_option("--lr-ox", lr_ox, "Adam learning rate for O_x");
    app->add_option("--lr-on", lr_on, "Adam learning rate for O_n");
    app->add_option("--camera", camera, "ortho or fov:<deg>");
    app->add_option("--seed", seed, "Run seed");
  }

  GuidanceConfig resolve(int width, int height) const {
    GuidanceConfig cfg;
    if (!config.empty()) cfg = config::parse_guidance(config::load_json(config), width, height);
    if (eta) cfg.material.eta = *eta;
    if (steps) {
      cfg.steps = *steps;
      if (!activation) cfg.on_activation_step = std::min(cfg.on_activation_step, std::max(cfg.steps, 0));
    }
    if (activation) cfg.on_activation_step = *activation;
    if (lr_ls) cfg.lr_ls = *lr_ls;
    if (lr_ox) cfg.lr_ox = *lr_ox;
    if (lr_on) cfg.lr_on = *lr_on;
    if (!camera.empty()) cfg.camera = config::parse_camera_flag(camera, width, height);
    if (seed) cfg.seed = *seed;
    try {
      check_config(cfg);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, e.what());
    }
    return cfg;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::string hash_json(const Json& j) {
  const std::string text = j.dump();
  return io::hex64(bridge::checksum(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
}

// Records what was run and a checksum of every output. Nothing here depends
// on wall time, paths of the output folder, or the thread count.
class Manifest {
 public:
  Manifest(const fs::path& dir, std::string command) : dir_(dir) {
    j_["command"] = std::move(command);
    j_["version"] = POLARGUIDE_VERSION;
    j_["outputs"] = Json::object();
  }
  void config(const Json& c) {
    j_["config"] = c;
    j_["config_hash"] = hash_json(c);
  }
  void set(const std::string& key, const Json& v) { j_[key] = v; }
  void input(const std::string& name, const fs::path& path) { j_["inputs"][name] = io::file_checksum(path); }
  fs::path out(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }
  void write() {
    for (const std::string& name : names_) j_["outputs"][name] = io::file_checksum(dir_ / name);
    std::ofstream f(dir_ / "manifest.json");
    f << j_.dump(2) << "\n";
    if (!f) fail(ErrorKind::kIo, "cannot write " + (dir_ / "manifest.json").string());
  }

 private:
  fs::path dir_;
  Json j_;
  std::vector<std::string> names_;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
}

Json metrics_json(const NormalMetrics& m) {
  return {{"mae_deg", m.mean},   {"median_deg", m.median}, {"rmse_deg", m.rmse}, {"acc_11_25", m.acc_1125},
          {"acc_22_5", m.acc_225}, {"acc_30", m.acc_30},     {"n_valid", m.n_valid}};
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      fail(ErrorKind::kConfig, flag + ": cannot parse \"" + item + "\"");
    }
  }
  if (out.empty()) fail(ErrorKind::kConfig, flag + ": empty list");
  return out;
}

bool has_capture(const fs::path& dir) {
  for (const char* name : {"i000.pfm", "i045.pfm", "i090.pfm", "i135.pfm"}) {
    if (fs::exists(dir / name)) return true;
  }
  return false;
}

// Capture files win over stored Stokes maps.
StokesMap load_observed(const fs::path& dir, Manifest* manifest) {
  if (has_capture(dir)) {
    const IntensityCapture cap = io::read_capture(dir);
    if (manifest) {
      for (const char* name : {"i000.pfm", "i045.pfm", "i090.pfm", "i135.pfm"}) manifest->input(name, dir / name);
    }
    return stokes_from_capture(cap);
  }
  if (fs::exists(dir / "stokes_s0.pfm")) {
    StokesMap s = io::read_stokes(dir);
    if (manifest) {
      for (const char* name : {"stokes_s0.pfm", "stokes_s1.pfm", "stokes_s2.pfm"}) manifest->input(name, dir / name);
    }
    return s;
  }
  fail(ErrorKind::kIo, "no capture (i000/i045/i090/i135.pfm) or stokes_s*.pfm in " + dir.string());
}

// `x` is the image the backbone is fed before any offset, already clamped.
std::unique_ptr<Backbone> make_backbone(const std::string& spec, int height, int width, int channels,
                                        const Image& x, double input_min, double input_max, Json& record) {
  record = spec;
  if (spec == "smoother") return std::make_unique<LinearSmoother>(height, width, channels);
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "smoother" && !arg.empty()) {
    const Json j = config::load_json(arg);
    record = {{"type", "smoother"}, {"config", j}};
    return std::make_unique<LinearSmoother>(height, width, channels, config::parse_smoother(j));
  }
  if (kind == "oracle" && !arg.empty()) {
    const Json j = config::load_json(arg);
    const config::OracleFile file = config::parse_oracle(j, fs::path(arg).parent_path());
    const NormalMap gt = io::read_pfm(file.gt);
    record = {{"type", "oracle"}, {"config", j}, {"gt_checksum", io::file_checksum(file.gt)}};
    if (!file.anchor) return std::make_unique<CorruptedOracle>(gt, x, file.spec);
    Image anchor = io::read_pfm(*file.anchor);
    require_same_shape(anchor, x, "oracle anchor");
    for (std::size_t i = 0; i < anchor.size(); ++i) anchor[i] = std::clamp(anchor[i], input_min, input_max);
    record["anchor_checksum"] = io::file_checksum(*file.anchor);
    return std::make_unique<CorruptedOracle>(gt, anchor, file.spec);
  }
  if (kind == "bridge" && !arg.empty()) {
    return std::make_unique<BridgeBackbone>(arg, height, width, channels);
  }
  fail(ErrorKind::kConfig, "--backbone: expected smoother, smoother:<json>, oracle:<json> or bridge:<cmd>, got \"" +
                               spec + "\"");
}

void write_trace(const fs::path& path, const GuidanceTrace& trace) {
  io::CsvTable csv{{"step", "loss", "mae_deg"}, {}};
  for (const TraceEntry& e : trace.entries) {
    csv.rows.push_back({std::to_string(e.step), io::format_number(e.loss), e.mae ? io::format_number(*e.mae) : ""});
  }
  io::write_csv(path, csv);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string preset = "sphere";
  std::string config;
  std::string out;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SceneSpec spec = a.config.empty() ? config::preset(a.preset) : config::parse_scene(config::load_json(a.config));
  if (a.noise < 0.0) fail(ErrorKind::kConfig, "--noise must be non-negative");
  Scene scene = generate(spec);
  if (a.noise > 0.0) {
    scene.capture = add_noise(scene.capture, a.noise, a.seed);
    for (Image* img : {&scene.capture.i000, &scene.capture.i045, &scene.capture.i090, &scene.capture.i135}) {
      quantize_to_float(*img);
    }
    scene.stokes = stokes_from_capture(scene.capture);
    scene.mask = validity_mask(scene.stokes);
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "synth");
  const Json scene_json = config::scene_to_json(spec);
  m.config({{"scene", scene_json}, {"noise_sigma", a.noise}});
  m.set("seeds", {{"noise", a.seed}});

  io::write_pfm(m.out("gt_normals.pfm"), scene.gt);
  io::write_pfm(m.out("gt_l_d.pfm"), scene.l_d);
  io::write_pfm(m.out("gt_l_s.pfm"), scene.l_s);
  io::write_capture(dir, scene.capture);
  for (const char* name : {"i000.pfm", "i045.pfm", "i090.pfm", "i135.pfm"}) m.out(name);
  io::write_stokes(dir, scene.stokes);
  for (const char* name : {"stokes_s0.pfm", "stokes_s1.pfm", "stokes_s2.pfm"}) m.out(name);
  io::write_mask(m.out("mask.pfm"), scene.mask);
  io::write_png(m.out("gt_normals.png"), io::normals_visual(scene.gt));
  write_json(m.out("scene.json"), scene_json);
  m.write();
  out << "synth: " << spec.height << "x" << spec.width << "x" << spec.channels() << ", " << scene.mask.count()
      << " valid pixels -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- refine

struct RefineArgs {
  std::string input;
  std::string out;
  std::string backbone = "smoother";
  std::string gt;
  bool no_gt = false;
  GuidanceFlags guidance;
};

int cmd_refine(const RefineArgs& a, std::ostream& out) {
  const fs::path in(a.input);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "refine");
  const StokesMap observed = load_observed(in, &m);
  const int h = observed.s0.height();
  const int w = observed.s0.width();
  const int c = observed.s0.channels();
  const GuidanceConfig cfg = a.guidance.resolve(w, h);

  std::optional<NormalMap> gt;
  fs::path gt_path = a.gt.empty() ? in / "gt_normals.pfm" : fs::path(a.gt);
  if (!a.no_gt && (!a.gt.empty() || fs::exists(gt_path))) {
    gt = io::read_pfm(gt_path);
    require_shape(*gt, h, w, 3, "ground-truth normals");
    m.input("gt_normals", gt_path);
  }

  Image x = observed.s0;
  for (double& v : x.data()) v = std::clamp(v, cfg.input_min, cfg.input_max);
  Json backbone_record;
  std::unique_ptr<Backbone> backbone =
      make_backbone(a.backbone, h, w, c, x, cfg.input_min, cfg.input_max, backbone_record);
  m.config({{"guidance", config::guidance_to_json(cfg)}, {"backbone", backbone_record}});
  m.set("seeds", {{"guidance", cfg.seed}});

  const NormalMap unguided = backbone->forward(x);
  RefineResult result;
  try {
    result = refine(observed, *backbone, cfg, gt ? &*gt : nullptr);
  } catch (const GuidanceError& e) {
    write_trace(dir / "trace_partial.csv", e.partial_trace());
    throw;
  }

  io::write_pfm(m.out("normals.pfm"), result.normals);
  io::write_png(m.out("normals.png"), io::normals_visual(result.normals));
  io::write_pfm(m.out("backbone_normals.pfm"), unguided);
  io::write_pfm(m.out("l_d.pfm"), result.split.l_d);
  io::write_pfm(m.out("l_s.pfm"), result.split.l_s);
  io::write_stokes(dir, result.predicted, "pred_");
  for (const char* name : {"pred_s0.pfm", "pred_s1.pfm", "pred_s2.pfm"}) m.out(name);
  io::write_mask(m.out("mask.pfm"), result.mask);
  write_trace(m.out("trace.csv"), result.trace);

  const double final_loss = result.trace.entries.back().loss;
  out << "refine: " << cfg.steps << " steps, loss " << result.trace.entries.front().loss << " -> " << final_loss
      << "\n";
  if (gt) {
    const Image err = angular_error_map(result.normals, *gt, result.mask);
    io::write_pfm(m.out("error_map.pfm"), err);
    io::write_png(m.out("error_map.png"), io::error_visual(err));
    const NormalMetrics guided = summarize(err, result.mask);
    const NormalMetrics before = evaluate(unguided, *gt, result.mask);
    write_json(m.out("metrics.json"),
               {{"guided", metrics_json(guided)}, {"unguided", metrics_json(before)}, {"final_loss", final_loss}});
    out << "refine: MAE " << before.mean << " -> " << guided.mean << " deg over " << guided.n_valid << " pixels\n";
  }
  m.write();
  return kExitOk;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string pred;
  std::string gt;
  std::string mask;
  std::string out;
  std::string error_map;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  const NormalMap pred = io::read_pfm(a.pred);
  const NormalMap gt = io::read_pfm(a.gt);
  require_same_shape(pred, gt, "pred vs gt");
  const Mask mask = a.mask.empty() ? Mask(gt.height(), gt.width(), true) : io::read_mask(a.mask);
  const Image err = angular_error_map(pred, gt, mask);
  const Json j = metrics_json(summarize(err, mask));
  if (!a.out.empty()) write_json(a.out, j);
  if (!a.error_map.empty()) io::write_pfm(a.error_map, err);
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- stokes

int cmd_stokes(const std::string& input, const std::string& out_dir, std::ostream& out) {
  const fs::path in(input);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  Manifest m(dir, "stokes");
  m.config(Json::object());
  const IntensityCapture cap = io::read_capture(in);
  for (const char* name : {"i000.pfm", "i045.pfm", "i090.pfm", "i135.pfm"}) m.input(name, in / name);
  const StokesMap s = stokes_from_capture(cap);
  const PolarizationMap p = dolp_aolp(s);
  io::write_stokes(dir, s);
  for (const char* name : {"stokes_s0.pfm", "stokes_s1.pfm", "stokes_s2.pfm"}) m.out(name);
  io::write_pfm(m.out("dolp.pfm"), p.dolp);
  io::write_pfm(m.out("aolp.pfm"), p.aolp);
  const ValidityMask mask = validity_mask(s);
  io::write_mask(m.out("mask.pfm"), mask);
  io::write_png(m.out("polarization.png"), polarization_visual(s));
  m.write();
  out << "stokes: " << mask.count() << " valid pixels -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- jacobian

struct JacobianArgs {
  std::string input;
  std::string out;
  std::string backbone = "smoother";
  int row = 0;
  int col = 0;
  bool normalize = false;
};

int cmd_jacobian(const JacobianArgs& a, std::ostream& out) {
  const fs::path in(a.input);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "jacobian");
  const StokesMap observed = load_observed(in, &m);
  const GuidanceConfig defaults;
  Image x = observed.s0;
  for (double& v : x.data()) v = std::clamp(v, defaults.input_min, defaults.input_max);
  Json record;
  auto backbone =
      make_backbone(a.backbone, x.height(), x.width(), x.channels(), x, defaults.input_min, defaults.input_max, record);
  m.config({{"backbone", record}, {"row", a.row}, {"col", a.col}, {"normalize_p99", a.normalize}});
  if (a.row < 0 || a.row >= x.height() || a.col < 0 || a.col >= x.width()) {
    fail(ErrorKind::kConfig, "--row/--col outside the image");
  }
  const Image map = sensitivity_map(*backbone, x, a.row, a.col, a.normalize);
  io::write_pfm(m.out("sensitivity.pfm"), map);
  double peak = 0.0;
  for (double v : map.data()) peak = std::max(peak, v);
  io::write_png(m.out("sensitivity.png"), io::grey_visual(map, peak > 0.0 ? 1.0 / peak : 1.0));
  m.write();
  out << "jacobian: peak sensitivity " << peak << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string kind;
  std::string preset = "sphere";
  std::string scene;
  std::string out;
  std::string backbone = "oracle";
  double blur = 12.0;
  double gain = 100.0;
  double density = 0.01;
  std::uint64_t oracle_seed = 0;
  std::string values;
  std::uint64_t noise_seed = 0;
  GuidanceFlags guidance;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const SceneSpec spec = a.scene.empty() ? config::preset(a.preset) : config::parse_scene(config::load_json(a.scene));
  const GuidanceConfig cfg = a.guidance.resolve(spec.width, spec.height);

  BackboneFactory factory;
  Json backbone_record;
  if (a.backbone == "oracle") {
    CorruptedOracleSpec os;
    os.corruption.stages.push_back(BlurCorruption{a.blur});
    os.gain = a.gain;
    os.density = a.density;
    os.seed = a.oracle_seed;
    factory = oracle_factory(os);
    backbone_record = {{"type", "oracle"}, {"corruption", config::corruption_to_json(os.corruption)},
                       {"gain", a.gain},   {"density", a.density}, {"seed", a.oracle_seed}};
  } else if (a.backbone == "smoother") {
    factory = [](const Scene& s, const Image&) -> std::unique_ptr<Backbone> {
      return std::make_unique<LinearSmoother>(s.gt.height(), s.gt.width(), s.stokes.s0.channels());
    };
    backbone_record = "smoother";
  } else {
    fail(ErrorKind::kConfig, "--backbone: sweeps support oracle or smoother");
  }

  SweepTable table;
  std::vector<double> values;
  if (a.kind == "noise") {
    values = a.values.empty() ? std::vector<double>{0.0, 0.05, 0.1, 0.2} : parse_list(a.values, "--values");
    table = noise_sweep(generate(spec), factory, cfg, values, a.noise_seed);
  } else if (a.kind == "eta") {
    values = a.values.empty() ? std::vector<double>{1.3, 1.5, 2.0, 3.2} : parse_list(a.values, "--values");
    table = eta_sweep(generate(spec), factory, cfg, values);
  } else if (a.kind == "ablation") {
    table = variant_ablation(generate(spec), factory, cfg);
  } else if (a.kind == "material") {
    table = material_sweep(spec, factory, cfg);
  } else {
    fail(ErrorKind::kConfig, "sweep: expected noise, eta, ablation or material, got \"" + a.kind + "\"");
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "sweep");
  m.config({{"kind", a.kind},
            {"scene", config::scene_to_json(spec)},
            {"guidance", config::guidance_to_json(cfg)},
            {"backbone", backbone_record},
            {"values", values}});
  m.set("seeds", {{"guidance", cfg.seed}, {"noise", a.noise_seed}, {"oracle", a.oracle_seed}});
  io::write_csv(m.out("sweep.csv"), io::sweep_csv(table));

  io::PlotSeries unguided{{}, {}, {0.55, 0.55, 0.55}};
  io::PlotSeries guided{{}, {}, {0.85, 0.2, 0.1}};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double xv = (a.kind == "noise" || a.kind == "eta") ? table.rows[i].value : static_cast<double>(i);
    unguided.x.push_back(xv);
    unguided.y.push_back(table.rows[i].mae_unguided);
    guided.x.push_back(xv);
    guided.y.push_back(table.rows[i].mae_guided);
  }
  io::write_png(m.out("sweep.png"), io::line_plot({unguided, guided}));
  m.write();
  for (const SweepRow& r : table.rows) {
    out << "sweep " << a.kind << " " << r.label << ": " << r.mae_unguided << " -> " << r.mae_guided << " deg\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- decompose

struct DecomposeArgs {
  std::string input;
  std::string refined;
  std::string out;
  std::optional<double> eta;
  std::string camera = "ortho";
};

int cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "decompose");
  const StokesMap observed = load_observed(a.input, &m);
  const fs::path refined(a.refined);
  const NormalMap normals = io::read_pfm(refined / "normals.pfm");
  const Image l_s = io::read_pfm(refined / "l_s.pfm");
  m.input("normals.pfm", refined / "normals.pfm");
  m.input("l_s.pfm", refined / "l_s.pfm");
  MaterialParams mat;
  if (a.eta) mat.eta = *a.eta;
  const int h = observed.s0.height();
  const int w = observed.s0.width();
  const CameraModel cam = config::parse_camera_flag(a.camera, w, h);
  m.config({{"eta", mat.eta}, {"camera", cam.to_string()}});

  const Decomposition d = decompose(observed, normals, l_s, view_field(cam, h, w), mat);
  io::write_pfm(m.out("l_d.pfm"), d.split.l_d);
  io::write_pfm(m.out("l_s.pfm"), d.split.l_s);
  io::write_stokes(dir, d.diffuse, "diffuse_");
  io::write_stokes(dir, d.specular, "specular_");
  for (const char* p : {"diffuse_", "specular_"}) {
    for (const char* s : {"s0.pfm", "s1.pfm", "s2.pfm"}) m.out(std::string(p) + s);
  }
  io::write_png(m.out("polarization_diffuse.png"), d.vis_diffuse);
  io::write_png(m.out("polarization_specular.png"), d.vis_specular);
  io::write_png(m.out("polarization_combined.png"), d.vis_combined);
  io::write_png(m.out("l_d.png"), d.split.l_d);
  io::write_png(m.out("l_s.png"), d.split.l_s);
  m.write();
  out << "decompose: wrote components to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- edit

struct EditArgs {
  std::string refined;
  std::string out;
  std::string op;
  std::string scale;
  double hue = 0.0;
  std::string tint;
  double gain = 1.0;
};

int cmd_edit(const EditArgs& a, std::ostream& out) {
  const fs::path refined(a.refined);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m(dir, "edit");
  RadianceSplit split{io::read_pfm(refined / "l_d.pfm"), io::read_pfm(refined / "l_s.pfm")};
  require_same_shape(split.l_d, split.l_s, "l_d vs l_s");
  m.input("l_d.pfm", refined / "l_d.pfm");
  m.input("l_s.pfm", refined / "l_s.pfm");
  const std::size_t c = static_cast<std::size_t>(split.l_d.channels());

  auto per_channel = [&](const std::string& text, const std::string& flag) {
    if (text.empty()) return std::vector<double>(c, 1.0);
    std::vector<double> v = parse_list(text, flag);
    if (v.size() == 1) v.assign(c, v[0]);
    if (v.size() != c) fail(ErrorKind::kConfig, flag + ": expected 1 or " + std::to_string(c) + " values");
    return v;
  };

  EditOp op;
  Json record;
  if (a.op == "recolor") {
    RecolorEdit e{per_channel(a.scale, "--scale"), a.hue};
    record = {{"op", "recolor"}, {"scale", e.diffuse_scale}, {"hue_shift_deg", e.hue_shift_deg}};
    op = e;
  } else if (a.op == "metallic") {
    MetallicEdit e{per_channel(a.tint, "--tint"), a.gain};
    record = {{"op", "metallic"}, {"tint", e.specular_tint}, {"gain", e.gain}};
    op = e;
  } else {
    fail(ErrorKind::kConfig, "--op: expected recolor or metallic");
  }
  m.config(record);
  const Image edited = edit(split, op);
  Image original = split.l_d;
  for (std::size_t i = 0; i < original.size(); ++i) original[i] += split.l_s[i];
  io::write_pfm(m.out("edited.pfm"), edited);
  io::write_png(m.out("edited.png"), edited);
  io::write_png(m.out("original.png"), original);
  m.write();
  out << "edit: " << a.op << " -> " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polarization-guided refinement of surface-normal maps", "polarguide"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", POLARGUIDE_VERSION);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it");

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Render a synthetic scene and its polarization capture");
  s->add_option("--preset", synth.preset, "sphere, plane or bumpy_sphere");
  s->add_option("--config", synth.config, "Scene config (JSON); overrides --preset");
  s->add_option("--out", synth.out, "Output folder")->required();
  s->add_option("--noise", synth.noise, "Gaussian sigma added to the four captures");
  s->add_option("--seed", synth.seed, "Noise seed");

  RefineArgs refine_args;
  CLI::App* r = app.add_subcommand("refine", "Refine backbone normals against a polarization capture");
  r->add_option("--input", refine_args.input, "Folder with i000..i135.pfm or stokes_s*.pfm")->required();
  r->add_option("--out", refine_args.out, "Output folder")->required();
  r->add_option("--backbone", refine_args.backbone, "smoother | smoother:<json> | oracle:<json> | bridge:<cmd>");
  r->add_option("--gt", refine_args.gt, "Ground-truth normals (default: <input>/gt_normals.pfm when present)");
  r->add_flag("--no-gt", refine_args.no_gt, "Ignore ground truth even if present");
  refine_args.guidance.add_to(r);

  MetricsArgs metrics;
  CLI::App* me = app.add_subcommand("metrics", "Angular error statistics between two normal maps");
  me->add_option("--pred", metrics.pred, "Predicted normals (PFM)")->required();
  me->add_option("--gt", metrics.gt, "Ground-truth normals (PFM)")->required();
  me->add_option("--mask", metrics.mask, "Mask (PFM); default all pixels");
  me->add_option("--out", metrics.out, "Write metrics JSON here");
  me->add_option("--error-map", metrics.error_map, "Write the per-pixel error map (PFM) here");

  std::string stokes_in, stokes_out;
  CLI::App* st = app.add_subcommand("stokes", "Stokes, DoLP, AoLP and validity mask of a capture");
  st->add_option("--input", stokes_in, "Folder with i000..i135.pfm")->required();
  st->add_option("--out", stokes_out, "Output folder")->required();

  JacobianArgs jac;
  CLI::App* j = app.add_subcommand("jacobian", "Sensitivity of every output normal to one input pixel");
  j->add_option("--input", jac.input, "Folder with a capture or Stokes maps")->required();
  j->add_option("--out", jac.out, "Output folder")->required();
  j->add_option("--backbone", jac.backbone, "smoother | smoother:<json> | oracle:<json> | bridge:<cmd>");
  j->add_option("--row", jac.row, "Input pixel row")->required();
  j->add_option("--col", jac.col, "Input pixel column")->required();
  j->add_flag("--normalize", jac.normalize, "Divide by the 99th percentile");

  SweepArgs sweep;
  CLI::App* sw = app.add_subcommand("sweep", "Noise, eta, variant or material sweeps");
  sw->add_option("kind", sweep.kind, "noise | eta | ablation | material")->required();
  sw->add_option("--preset", sweep.preset, "Scene preset");
  sw->add_option("--scene", sweep.scene, "Scene config (JSON); overrides --preset");
  sw->add_option("--out", sweep.out, "Output folder")->required();
  sw->add_option("--backbone", sweep.backbone, "oracle or smoother");
  sw->add_option("--blur-sigma", sweep.blur, "Oracle blur corruption sigma (pixels)");
  sw->add_option("--gain", sweep.gain, "Oracle input coupling gain");
  sw->add_option("--density", sweep.density, "Oracle global tap density");
  sw->add_option("--oracle-seed", sweep.oracle_seed, "Oracle seed");
  sw->add_option("--values", sweep.values, "Comma-separated sweep values");
  sw->add_option("--noise-seed", sweep.noise_seed, "Base seed for capture noise");
  sweep.guidance.add_to(sw);

  DecomposeArgs dec;
  CLI::App* d = app.add_subcommand("decompose", "Diffuse/specular Stokes components of a refined scene");
  d->add_option("--input", dec.input, "Capture folder")->required();
  d->add_option("--refined", dec.refined, "Folder with normals.pfm and l_s.pfm")->required();
  d->add_option("--out", dec.out, "Output folder")->required();
  d->add_option("--eta", dec.eta, "Refractive index");
  d->add_option("--camera", dec.camera, "ortho or fov:<deg>");

  EditArgs ed;
  CLI::App* e = app.add_subcommand("edit", "Recolor the diffuse or retint the specular component");
  e->add_option("--refined", ed.refined, "Folder with l_d.pfm and l_s.pfm")->required();
  e->add_option("--out", ed.out, "Output folder")->required();
  e->add_option("--op", ed.op, "recolor or metallic")->required();
  e->add_option("--scale", ed.scale, "Per-channel diffuse scale (recolor)");
  e->add_option("--hue", ed.hue, "Hue rotation in degrees (recolor)");
  e->add_option("--tint", ed.tint, "Per-channel specular tint (metallic)");
  e->add_option("--gain", ed.gain, "Specular gain (metallic)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    set_thread_count(threads);
    if (*s) return cmd_synth(synth, out);
    if (*r) return cmd_refine(refine_args, out);
    if (*me) return cmd_metrics(metrics, out);
    if (*st) return cmd_stokes(stokes_in, stokes_out, out);
    if (*j) return cmd_jacobian(jac, out);
    if (*sw) return cmd_sweep(sweep, out);
    if (*d) return cmd_decompose(dec, out);
    if (*e) return cmd_edit(ed, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace polarguide::cli
