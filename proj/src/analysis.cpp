#include "polarguide/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>

#include "polarguide/error.hpp"
#include "polarguide/metrics.hpp"

namespace polarguide {

Image sensitivity_map(Backbone& backbone, const Image& x, int row, int col, bool normalize_p99) {
  const BackboneInfo& info = backbone.info();
  require_shape(x, info.height, info.width, info.channels, "sensitivity input");
  if (row < 0 || row >= x.height() || col < 0 || col >= x.width()) {
    fail(ErrorKind::kDomain, "sensitivity pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                                 ") lies outside the image");
  }
  if (!info.has_jvp && x.pixels() > kFiniteDifferenceCap) {
    fail(ErrorKind::kCapability, "backbone has no JVP and the image exceeds the finite-difference cap");
  }
  Image out(x.height(), x.width(), 1);
  Image tangent(x.height(), x.width(), x.channels());
  for (int k = 0; k < x.channels(); ++k) {
    tangent(row, col, k) = 1.0;
    const Image column = info.has_jvp ? backbone.jvp_input(x, tangent) : finite_difference_jvp(backbone, x, tangent);
    tangent(row, col, k) = 0.0;
    for (std::size_t p = 0; p < out.pixels(); ++p) {
      for (int o = 0; o < 3; ++o) out[p] += column[3 * p + o] * column[3 * p + o];
    }
  }
  for (double& v : out.data()) v = std::sqrt(v);
  if (normalize_p99) {
    std::vector<double> sorted(out.data().begin(), out.data().end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * sorted.size()));
    const double p99 = sorted[std::max<std::size_t>(rank, 1) - 1];
    if (p99 > 0.0) {
      for (double& v : out.data()) v /= p99;
    }
  }
  return out;
}

BackboneFactory oracle_factory(CorruptedOracleSpec spec) {
  return [spec](const Scene& scene, const Image& x) -> std::unique_ptr<Backbone> {
    return std::make_unique<CorruptedOracle>(scene.gt, x, spec);
  };
}

namespace {

// The oracle is anchored at the scene's clean S0 (clamped as guidance clamps
// it); the backbone is fed the observed S0, so capture noise reaches it.
SweepRow run_point(const Scene& scene, const StokesMap& observed, const BackboneFactory& factory,
                   const GuidanceConfig& cfg) {
  auto clamped = [&cfg](Image img) {
    for (double& v : img.data()) v = std::clamp(v, cfg.input_min, cfg.input_max);
    return img;
  };
  std::unique_ptr<Backbone> backbone = factory(scene, clamped(scene.stokes.s0));
  const RefineResult r = refine(observed, *backbone, cfg, &scene.gt);
  SweepRow row;
  row.mae_unguided = mean_angular_error(backbone->forward(clamped(observed.s0)), scene.gt, scene.mask);
  row.mae_guided = mean_angular_error(r.normals, scene.gt, scene.mask);
  row.final_loss = r.trace.entries.back().loss;
  return row;
}

std::string label(const char* name, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%g", name, v);
  return buf;
}

}  // namespace

SweepTable noise_sweep(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg,
                       const std::vector<double>& sigmas, std::uint64_t seed) {
  SweepTable table{"sigma", {}};
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const IntensityCapture noisy = add_noise(scene.capture, sigmas[i], seed + i);
    SweepRow row = run_point(scene, stokes_from_capture(noisy), factory, cfg);
    row.label = label("sigma", sigmas[i]);
    row.value = sigmas[i];
    table.rows.push_back(row);
  }
  return table;
}

SweepTable eta_sweep(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg,
                     const std::vector<double>& etas) {
  SweepTable table{"eta", {}};
  for (double eta : etas) {
    GuidanceConfig c = cfg;
    c.material.eta = eta;
    SweepRow row = run_point(scene, scene.stokes, factory, c);
    row.label = label("eta", eta);
    row.value = eta;
    table.rows.push_back(row);
  }
  return table;
}

SweepTable variant_ablation(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg) {
  SweepTable table{"variant", {}};
  GuidanceConfig none = cfg;
  none.steps = 0;
  none.on_activation_step = 0;
  GuidanceConfig image = cfg;
  image.on_activation_step = cfg.steps;
  const std::pair<const char*, GuidanceConfig> variants[] = {{"none", none}, {"image", image}, {"joint", cfg}};
  for (const auto& [label, c] : variants) {
    SweepRow row = run_point(scene, scene.stokes, factory, c);
    row.label = label;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<std::pair<std::string, SceneSpec>> material_presets(const SceneSpec& base) {
  SceneSpec diffuse = base;
  diffuse.specular = SpecularNone{};

  // Specular-only: no diffuse albedo, a broad environment band everywhere.
  SceneSpec specular = base;
  specular.shading.albedo.assign(base.shading.albedo.size(), 0.0);
  specular.specular = SpecularBand{0.3, 0.8, 0.6};

  SceneSpec mixed = base;
  mixed.specular = SpecularBand{0.5, 0.25, 0.2};
  return {{"diffuse", diffuse}, {"specular", specular}, {"mixed", mixed}};
}

SweepTable material_sweep(const SceneSpec& base, const BackboneFactory& factory, const GuidanceConfig& cfg) {
  SweepTable table{"material", {}};
  for (const auto& [label, spec] : material_presets(base)) {
    const Scene scene = generate(spec);
    SweepRow row = run_point(scene, scene.stokes, factory, cfg);
    row.label = label;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace polarguide
