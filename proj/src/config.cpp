#include "polarguide/config.hpp"

#include <fstream>
#include <set>

#include "polarguide/error.hpp"

namespace polarguide::config {
namespace fs = std::filesystem;

namespace {

// Typed, path-tracking view over one JSON object.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::kConfig, where() + ": expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  std::string where() const { return path_.empty() ? "/" : path_; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(ErrorKind::kConfig, at(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key) {
    if (!has(key)) fail(ErrorKind::kConfig, at(key) + ": required key missing");
    return number(key, 0.0);
  }
  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(ErrorKind::kConfig, at(key) + ": expected an integer");
    return v.get<long long>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_string()) fail(ErrorKind::kConfig, at(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback, std::size_t min_len = 0,
                              std::size_t max_len = 1u << 20) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_array()) fail(ErrorKind::kConfig, at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(ErrorKind::kConfig, at(key) + "/" + std::to_string(i) + ": expected a number");
      out.push_back(v[i].get<double>());
    }
    if (out.size() < min_len || out.size() > max_len) {
      fail(ErrorKind::kConfig, at(key) + ": expected " + std::to_string(min_len) +
                                   (min_len == max_len ? "" : " to " + std::to_string(max_len)) + " entries");
    }
    return out;
  }
  Vec3 vec3(const std::string& key, Vec3 fallback) {
    const auto v = numbers(key, {fallback[0], fallback[1], fallback[2]}, 3, 3);
    return {v[0], v[1], v[2]};
  }
  const Json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorKind::kConfig, at(it.key()) + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) fail(ErrorKind::kConfig, where + ": " + what);
}

CameraModel parse_camera(const Json& j, const std::string& path, int width, int height) {
  Reader r(j, path);
  const std::string type = r.string("type", "ortho");
  CameraModel cam;
  if (type == "ortho" || type == "orthographic") {
    cam = CameraModel::orthographic();
  } else if (type == "perspective") {
    const double fov = r.number("fov_deg");
    require(fov > 0.0 && fov < 180.0, r.at("fov_deg"), "must lie in (0, 180)");
    const auto pp = r.numbers("principal_point", {0.5 * (width - 1), 0.5 * (height - 1)}, 2, 2);
    cam = CameraModel::perspective(fov, width, height, pp[0], pp[1]);
  } else {
    fail(ErrorKind::kConfig, r.at("type") + ": expected \"ortho\" or \"perspective\"");
  }
  r.finish();
  return cam;
}

Json camera_to_json(const CameraModel& cam) {
  if (!cam.is_perspective()) return {{"type", "ortho"}};
  return {{"type", "perspective"}, {"fov_deg", cam.fov_deg()}, {"principal_point", {cam.cx(), cam.cy()}}};
}

}  // namespace

SceneSpec parse_scene(const Json& j) {
  Reader r(j, "");
  SceneSpec spec;
  spec.height = static_cast<int>(r.integer("height", spec.height));
  spec.width = static_cast<int>(r.integer("width", spec.width));
  require(spec.height > 0 && spec.height <= 8192, r.at("height"), "must lie in [1, 8192]");
  require(spec.width > 0 && spec.width <= 8192, r.at("width"), "must lie in [1, 8192]");

  if (const Json* g = r.child("geometry")) {
    Reader gr(*g, "/geometry");
    const std::string type = gr.string("type", "sphere");
    const double cx = 0.5 * (spec.width - 1);
    const double cy = 0.5 * (spec.height - 1);
    if (type == "sphere") {
      SphereGeometry s;
      s.radius = gr.number("radius", 0.375 * std::min(spec.width, spec.height));
      const auto c = gr.numbers("center", {cx, cy}, 2, 2);
      s.cx = c[0];
      s.cy = c[1];
      require(s.radius > 0.0, gr.at("radius"), "must be positive");
      spec.geometry = s;
    } else if (type == "plane") {
      PlaneGeometry p;
      p.tilt_deg = gr.number("tilt_deg", p.tilt_deg);
      p.azimuth_deg = gr.number("azimuth_deg", p.azimuth_deg);
      require(p.tilt_deg >= 0.0 && p.tilt_deg < 90.0, gr.at("tilt_deg"), "must lie in [0, 90)");
      spec.geometry = p;
    } else if (type == "bumpy_sphere") {
      BumpySphereGeometry b;
      b.radius = gr.number("radius", 0.375 * std::min(spec.width, spec.height));
      const auto c = gr.numbers("center", {cx, cy}, 2, 2);
      b.cx = c[0];
      b.cy = c[1];
      b.amplitude = gr.number("amplitude", b.amplitude);
      b.frequency = gr.number("frequency", b.frequency);
      b.seed = static_cast<std::uint64_t>(gr.integer("seed", 0));
      require(b.radius > 0.0, gr.at("radius"), "must be positive");
      require(b.amplitude >= 0.0, gr.at("amplitude"), "must be non-negative");
      spec.geometry = b;
    } else {
      fail(ErrorKind::kConfig, gr.at("type") + ": expected sphere, plane or bumpy_sphere");
    }
    gr.finish();
  } else {
    spec.geometry = SphereGeometry{0.375 * std::min(spec.width, spec.height), 0.5 * (spec.width - 1),
                                   0.5 * (spec.height - 1)};
  }

  if (const Json* s = r.child("shading")) {
    Reader sr(*s, "/shading");
    spec.shading.light = sr.vec3("light", spec.shading.light);
    spec.shading.albedo = sr.numbers("albedo", spec.shading.albedo, 1, 3);
    require(spec.shading.albedo.size() == 1 || spec.shading.albedo.size() == 3, sr.at("albedo"),
            "expected 1 or 3 entries");
    for (double a : spec.shading.albedo) require(a >= 0.0 && a <= 1.0, sr.at("albedo"), "entries must lie in [0, 1]");
    spec.shading.ambient = sr.number("ambient", spec.shading.ambient);
    require(spec.shading.ambient >= 0.0 && spec.shading.ambient <= 1.0, sr.at("ambient"), "must lie in [0, 1]");
    sr.finish();
  }

  if (const Json* s = r.child("specular")) {
    Reader sr(*s, "/specular");
    const std::string type = sr.string("type", "none");
    if (type == "none") {
      spec.specular = SpecularNone{};
    } else if (type == "lobe") {
      SpecularLobe l;
      const auto c = sr.numbers("center", {0.5 * (spec.width - 1), 0.5 * (spec.height - 1)}, 2, 2);
      l.cx = c[0];
      l.cy = c[1];
      l.width = sr.number("width", l.width);
      l.peak = sr.number("peak", l.peak);
      require(l.width > 0.0, sr.at("width"), "must be positive");
      require(l.peak >= 0.0, sr.at("peak"), "must be non-negative");
      spec.specular = l;
    } else if (type == "band") {
      SpecularBand b;
      b.center = sr.number("center", b.center);
      b.width = sr.number("width", b.width);
      b.peak = sr.number("peak", b.peak);
      require(b.width > 0.0, sr.at("width"), "must be positive");
      require(b.peak >= 0.0, sr.at("peak"), "must be non-negative");
      spec.specular = b;
    } else {
      fail(ErrorKind::kConfig, sr.at("type") + ": expected none, lobe or band");
    }
    sr.finish();
  }

  if (const Json* c = r.child("camera")) spec.camera = parse_camera(*c, "/camera", spec.width, spec.height);
  spec.material.eta = r.number("eta", spec.material.eta);
  require(spec.material.eta > 1.0, r.at("eta"), "must exceed 1");
  r.finish();
  return spec;
}

Json scene_to_json(const SceneSpec& spec) {
  Json j;
  j["height"] = spec.height;
  j["width"] = spec.width;
  std::visit(
      [&j](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, SphereGeometry>) {
          j["geometry"] = {{"type", "sphere"}, {"radius", g.radius}, {"center", {g.cx, g.cy}}};
        } else if constexpr (std::is_same_v<G, PlaneGeometry>) {
          j["geometry"] = {{"type", "plane"}, {"tilt_deg", g.tilt_deg}, {"azimuth_deg", g.azimuth_deg}};
        } else {
          j["geometry"] = {{"type", "bumpy_sphere"}, {"radius", g.radius},       {"center", {g.cx, g.cy}},
                           {"amplitude", g.amplitude}, {"frequency", g.frequency}, {"seed", g.seed}};
        }
      },
      spec.geometry);
  j["shading"] = {{"light", spec.shading.light}, {"albedo", spec.shading.albedo}, {"ambient", spec.shading.ambient}};
  std::visit(
      [&j](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SpecularNone>) {
          j["specular"] = {{"type", "none"}};
        } else if constexpr (std::is_same_v<S, SpecularLobe>) {
          j["specular"] = {{"type", "lobe"}, {"center", {s.cx, s.cy}}, {"width", s.width}, {"peak", s.peak}};
        } else {
          j["specular"] = {{"type", "band"}, {"center", s.center}, {"width", s.width}, {"peak", s.peak}};
        }
      },
      spec.specular);
  j["camera"] = camera_to_json(spec.camera);
  j["eta"] = spec.material.eta;
  return j;
}

CorruptionSpec parse_corruption(const Json& j, const std::string& where) {
  CorruptionSpec spec;
  if (!j.is_array()) fail(ErrorKind::kConfig, where + ": expected an array of stages");
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], where + "/" + std::to_string(i));
    const std::string type = r.string("type", "");
    if (type == "blur") {
      const double sigma = r.number("sigma");
      require(sigma >= 0.0, r.at("sigma"), "must be non-negative");
      spec.stages.push_back(BlurCorruption{sigma});
    } else if (type == "azimuth_flip") {
      spec.stages.push_back(AzimuthFlip{});
    } else if (type == "angular_noise") {
      const double sigma = r.number("sigma_deg");
      require(sigma >= 0.0, r.at("sigma_deg"), "must be non-negative");
      spec.stages.push_back(AngularNoise{sigma, static_cast<std::uint64_t>(r.integer("seed", 0))});
    } else {
      fail(ErrorKind::kConfig, r.at("type") + ": expected blur, azimuth_flip or angular_noise");
    }
    r.finish();
  }
  return spec;
}

Json corruption_to_json(const CorruptionSpec& spec) {
  Json out = Json::array();
  for (const CorruptionStage& stage : spec.stages) {
    if (const auto* b = std::get_if<BlurCorruption>(&stage)) {
      out.push_back({{"type", "blur"}, {"sigma", b->sigma}});
    } else if (std::holds_alternative<AzimuthFlip>(stage)) {
      out.push_back({{"type", "azimuth_flip"}});
    } else if (const auto* a = std::get_if<AngularNoise>(&stage)) {
      out.push_back({{"type", "angular_noise"}, {"sigma_deg", a->sigma_deg}, {"seed", a->seed}});
    }
  }
  return out;
}

GuidanceConfig parse_guidance(const Json& j, int width, int height) {
  Reader r(j, "");
  GuidanceConfig cfg;
  cfg.steps = static_cast<int>(r.integer("steps", cfg.steps));
  cfg.on_activation_step = static_cast<int>(r.integer("activation_step", cfg.on_activation_step));
  cfg.lr_ls = r.number("lr_ls", cfg.lr_ls);
  cfg.lr_ox = r.number("lr_ox", cfg.lr_ox);
  cfg.lr_on = r.number("lr_on", cfg.lr_on);
  if (const Json* a = r.child("adam")) {
    Reader ar(*a, "/adam");
    cfg.adam.beta1 = ar.number("beta1", cfg.adam.beta1);
    cfg.adam.beta2 = ar.number("beta2", cfg.adam.beta2);
    cfg.adam.eps = ar.number("eps", cfg.adam.eps);
    ar.finish();
  }
  cfg.material.eta = r.number("eta", cfg.material.eta);
  cfg.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
  const std::string camera = r.string("camera", "ortho");
  if (camera != "ortho") {
    require(width > 0 && height > 0, r.at("camera"), "perspective cameras need the image size");
    try {
      cfg.camera = parse_camera_flag(camera, width, height);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, r.at("camera") + ": " + e.what());
    }
  }
  const auto range = r.numbers("input_range", {cfg.input_min, cfg.input_max}, 2, 2);
  cfg.input_min = range[0];
  cfg.input_max = range[1];
  r.finish();
  try {
    check_config(cfg);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("/: ") + e.what());
  }
  return cfg;
}

Json guidance_to_json(const GuidanceConfig& cfg) {
  return {{"steps", cfg.steps},
          {"activation_step", cfg.on_activation_step},
          {"lr_ls", cfg.lr_ls},
          {"lr_ox", cfg.lr_ox},
          {"lr_on", cfg.lr_on},
          {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}},
          {"eta", cfg.material.eta},
          {"camera", cfg.camera.to_string()},
          {"seed", cfg.seed},
          {"input_range", {cfg.input_min, cfg.input_max}}};
}

CameraModel parse_camera_flag(const std::string& text, int width, int height) {
  if (text == "ortho") return CameraModel::orthographic();
  if (text.rfind("fov:", 0) == 0) {
    double fov = 0.0;
    try {
      std::size_t used = 0;
      fov = std::stod(text.substr(4), &used);
      if (used != text.size() - 4) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      fail(ErrorKind::kConfig, "--camera: cannot parse \"" + text + "\"");
    }
    require(fov > 0.0 && fov < 180.0, "--camera", "fov must lie in (0, 180)");
    return CameraModel::perspective(fov, width, height);
  }
  fail(ErrorKind::kConfig, "--camera: expected ortho or fov:<deg>, got \"" + text + "\"");
}

LinearSmootherSpec parse_smoother(const Json& j) {
  Reader r(j, "");
  LinearSmootherSpec spec;
  spec.radius = static_cast<int>(r.integer("radius", spec.radius));
  require(spec.radius >= 0, r.at("radius"), "must be non-negative");
  spec.mixing = r.numbers("mixing", {});
  spec.bias = r.vec3("bias", spec.bias);
  r.finish();
  return spec;
}

OracleFile parse_oracle(const Json& j, const fs::path& base_dir) {
  Reader r(j, "");
  OracleFile out;
  const std::string gt = r.string("gt", "");
  require(!gt.empty(), r.at("gt"), "required key missing");
  out.gt = fs::path(gt).is_absolute() ? fs::path(gt) : base_dir / gt;
  const std::string anchor = r.string("anchor", "");
  if (!anchor.empty()) out.anchor = fs::path(anchor).is_absolute() ? fs::path(anchor) : base_dir / anchor;
  if (const Json* c = r.child("corruption")) out.spec.corruption = parse_corruption(*c, "/corruption");
  out.spec.gain = r.number("gain", out.spec.gain);
  out.spec.density = r.number("density", out.spec.density);
  out.spec.self_weight = r.number("self_weight", out.spec.self_weight);
  out.spec.global_weight = r.number("global_weight", out.spec.global_weight);
  out.spec.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
  require(out.spec.density >= 0.0 && out.spec.density <= 1.0, r.at("density"), "must lie in [0, 1]");
  r.finish();
  return out;
}

Json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
}

SceneSpec preset(const std::string& name) {
  SceneSpec spec;
  spec.shading.light = {0.3, 0.4, 1.0};
  if (name == "sphere") {
    spec.specular = SpecularLobe{50.0, 45.0, 10.0, 0.2};
  } else if (name == "plane") {
    spec.geometry = PlaneGeometry{};
    spec.specular = SpecularNone{};
    spec.shading.light = {0.0, 0.0, 1.0};
  } else if (name == "bumpy_sphere") {
    spec.geometry = BumpySphereGeometry{};
    spec.specular = SpecularBand{};
  } else {
    fail(ErrorKind::kConfig, "unknown preset \"" + name + "\" (expected sphere, plane or bumpy_sphere)");
  }
  return spec;
}

}  // namespace polarguide::config
