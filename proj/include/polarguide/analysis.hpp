#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "polarguide/backbone.hpp"
#include "polarguide/guidance.hpp"
#include "polarguide/synth.hpp"

namespace polarguide {

// Frobenius norm of the 3 x C block d n(q) / d x(p) for every output pixel q,
// given one input pixel p = (row, col). Uses the backbone JVP, or central
// differences when the backbone has none and the image is within the
// finite-difference cap. With `normalize_p99` the map is divided by its
// 99th percentile (nearest rank) when that is positive.
Image sensitivity_map(Backbone& backbone, const Image& x, int row, int col, bool normalize_p99 = false);

// Builds the backbone used for one sweep point from the scene and its clean
// S0 image, clamped to the guidance input range.
using BackboneFactory = std::function<std::unique_ptr<Backbone>(const Scene&, const Image&)>;

// Oracle factory anchored at the clean image: the unguided estimate is
// corrupt(gt) on clean captures and degrades with input noise.
BackboneFactory oracle_factory(CorruptedOracleSpec spec);

struct SweepRow {
  std::string label;
  double value = 0.0;  // swept parameter (sigma, eta, ...); 0 for labelled variants
  double mae_unguided = 0.0;
  double mae_guided = 0.0;
  double final_loss = 0.0;
};

struct SweepTable {
  std::string parameter;
  std::vector<SweepRow> rows;
};

// All sweeps score against the scene's GT over the clean-capture validity mask.

// Gaussian capture noise of each sigma (seeded per index). The noisy S0 is
// both the loss target and the backbone input.
SweepTable noise_sweep(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg,
                       const std::vector<double>& sigmas, std::uint64_t seed);

// Refine with each eta against captures rendered at the scene's eta.
SweepTable eta_sweep(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg,
                     const std::vector<double>& etas);

// Rows "none" (T = 0), "image" (O_n never activates) and "joint" (cfg staging).
SweepTable variant_ablation(const Scene& scene, const BackboneFactory& factory, const GuidanceConfig& cfg);

// Diffuse-only, specular-only and mixed presets sharing the base geometry.
std::vector<std::pair<std::string, SceneSpec>> material_presets(const SceneSpec& base);
SweepTable material_sweep(const SceneSpec& base, const BackboneFactory& factory, const GuidanceConfig& cfg);

}  // namespace polarguide
