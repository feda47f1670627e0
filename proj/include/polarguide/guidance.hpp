#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "polarguide/backbone.hpp"
#include "polarguide/error.hpp"
#include "polarguide/fresnel.hpp"
#include "polarguide/image.hpp"
#include "polarguide/polarimetry.hpp"

namespace polarguide {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Image m;
  Image v;
};

// One bias-corrected Adam update at step t (1-based). Moments are created on
// first use.
void adam_step(Image& param, const Image& grad, AdamMoments& moments, double lr, const AdamParams& adam, int t);

struct GuidanceConfig {
  int steps = 100;
  int on_activation_step = 50;  // O_n stays zero for t < this; == steps disables it
  double lr_ls = 0.01;
  double lr_ox = 1e-4;
  double lr_on = 1e-3;
  AdamParams adam;
  MaterialParams material;
  CameraModel camera;
  std::uint64_t seed = 0;
  // The backbone sees x + O_x clamped to this range.
  double input_min = 0.0;
  double input_max = 1.5;
};

void check_config(const GuidanceConfig& cfg);

struct GuidanceState {
  Image o_x;  // image-shaped
  Image o_n;  // H x W x 3
  Image l_s;  // H x W x C
  AdamMoments m_ox;
  AdamMoments m_on;
  AdamMoments m_ls;
  int step = 0;
};

struct TraceEntry {
  int step = 0;
  double loss = 0.0;
  std::optional<double> mae;
  double wall_seconds = 0.0;
};

// Step 0 is the evaluation before any update; entry T is the final state.
struct GuidanceTrace {
  std::vector<TraceEntry> entries;
};

struct LossResult {
  double value = 0.0;
  StokesMap cotangent;  // dL/d(predicted), zero on masked pixels
};

// sum_p M(p) sum_i |S_i(p) - S^_i(p)| over all channels. The gradient is
// sign(pred - obs), 0 at exact ties. The sum is taken row by row in a fixed
// order so the value does not depend on the thread count.
LossResult polarization_loss(const StokesMap& observed, const StokesMap& predicted, const ValidityMask& mask);

struct RefineResult {
  NormalMap normals;  // unit per pixel
  RadianceSplit split;
  StokesMap predicted;
  GuidanceTrace trace;
  GuidanceState state;
  ValidityMask mask;
};

// Raised when a run stops early; carries the steps completed so far.
class GuidanceError : public Error {
 public:
  GuidanceError(ErrorKind kind, const std::string& what, GuidanceTrace partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const GuidanceTrace& partial_trace() const { return partial_; }

 private:
  GuidanceTrace partial_;
};

// Test-time guidance: staged Adam over (L_s, O_x, O_n) against the masked
// polarization loss. The backbone input is x = observed S0 unless `image`
// is given. `gt` only feeds the per-step MAE in the trace.
RefineResult refine(const StokesMap& observed, Backbone& backbone, const GuidanceConfig& cfg,
                    const NormalMap* gt = nullptr, const Image* image = nullptr);

}  // namespace polarguide
