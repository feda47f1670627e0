#pragma once

#include <variant>
#include <vector>

#include "polarguide/fresnel.hpp"
#include "polarguide/image.hpp"
#include "polarguide/polarimetry.hpp"

namespace polarguide {

struct Decomposition {
  RadianceSplit split;
  StokesMap diffuse;
  StokesMap specular;
  // H x W x 3 RGB in [0, 1]: hue encodes AoLP, value encodes DoLP.
  Image vis_diffuse;
  Image vis_specular;
  Image vis_combined;
};

// Requires 0 <= l_s <= s0 everywhere (kDomain otherwise).
Decomposition decompose(const StokesMap& observed, const NormalMap& normals, const Image& l_s, const ViewField& view,
                        const MaterialParams& mat);

// AoLP x DoLP visualization of a Stokes map. Channels are averaged first.
// AoLP in [-pi/2, pi/2) maps linearly onto hue [0, 360) degrees, saturation
// is 1 and value is DoLP clamped to [0, 1].
Image polarization_visual(const StokesMap& s);

Vec3 hsv_to_rgb(double hue_deg, double saturation, double value);

// Scales L_d per channel and rotates its hue about the grey axis.
struct RecolorEdit {
  std::vector<double> diffuse_scale;  // one entry per channel
  double hue_shift_deg = 0.0;         // 3-channel images only
};

// Multiplies L_s by a per-channel tint and a global gain.
struct MetallicEdit {
  std::vector<double> specular_tint;
  double gain = 1.0;
};

using EditOp = std::variant<RecolorEdit, MetallicEdit>;

// Applies the edit to its component and returns L_d' + L_s'. Throws kDomain
// if an edited radiance drops below -1e-12; smaller residues become 0.
Image edit(const RadianceSplit& split, const EditOp& op);

// Peak signal-to-noise ratio in dB over masked pixels (all channels).
double psnr(const Image& a, const Image& b, const Mask& mask, double peak = 1.0);

}  // namespace polarguide
