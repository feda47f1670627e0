#include "polarguide/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polarguide/error.hpp"

namespace polarguide {

Vec3 hsv_to_rgb(double hue_deg, double saturation, double value) {
  const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = value * (1.0 - saturation);
  const double q = value * (1.0 - saturation * f);
  const double t = value * (1.0 - saturation * (1.0 - f));
  switch (sector) {
    case 0: return {value, t, p};
    case 1: return {q, value, p};
    case 2: return {p, value, t};
    case 3: return {p, q, value};
    case 4: return {t, p, value};
    default: return {value, p, q};
  }
}

Image polarization_visual(const StokesMap& s) {
  check_stokes(s);
  const int ch = s.channels();
  Image out(s.height(), s.width(), 3);
  for (std::size_t p = 0; p < s.s0.pixels(); ++p) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < ch; ++k) {
      s0 += s.s0[p * ch + k];
      s1 += s.s1[p * ch + k];
      s2 += s.s2[p * ch + k];
    }
    const double dolp = std::clamp(dolp_from(s0 / ch, s1 / ch, s2 / ch), 0.0, 1.0);
    const double aolp = aolp_from(s1, s2);
    const double hue = (aolp + std::numbers::pi / 2) / std::numbers::pi * 360.0;
    const Vec3 rgb = hsv_to_rgb(hue, 1.0, dolp);
    for (int c = 0; c < 3; ++c) out[3 * p + c] = rgb[c];
  }
  return out;
}

Decomposition decompose(const StokesMap& observed, const NormalMap& normals, const Image& l_s, const ViewField& view,
                        const MaterialParams& mat) {
  check_stokes(observed);
  require_same_shape(observed.s0, l_s, "specular radiance");
  for (std::size_t i = 0; i < l_s.size(); ++i) {
    if (!(l_s[i] >= 0.0 && l_s[i] <= observed.s0[i])) {
      fail(ErrorKind::kDomain, "specular radiance violates 0 <= l_s <= s0 at element " + std::to_string(i));
    }
  }
  Decomposition d;
  d.split = split_radiance(observed.s0, l_s);
  auto [diffuse, specular] = component_stokes(normals, d.split.l_d, d.split.l_s, view, mat);
  d.diffuse = std::move(diffuse);
  d.specular = std::move(specular);
  StokesMap combined = d.diffuse;
  for (std::size_t i = 0; i < combined.s0.size(); ++i) {
    combined.s0[i] += d.specular.s0[i];
    combined.s1[i] += d.specular.s1[i];
    combined.s2[i] += d.specular.s2[i];
  }
  d.vis_diffuse = polarization_visual(d.diffuse);
  d.vis_specular = polarization_visual(d.specular);
  d.vis_combined = polarization_visual(combined);
  return d;
}

namespace {

Image recolor(const Image& l_d, const RecolorEdit& op) {
  const int ch = l_d.channels();
  if (op.diffuse_scale.size() != static_cast<std::size_t>(ch)) {
    fail(ErrorKind::kConfig, "recolor needs one diffuse scale per channel");
  }
  Image out = l_d;
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int k = 0; k < ch; ++k) out[p * ch + k] *= op.diffuse_scale[k];
  }
  if (op.hue_shift_deg == 0.0) return out;
  if (ch != 3) fail(ErrorKind::kConfig, "hue shift needs a 3-channel image");
  // Rodrigues rotation about (1, 1, 1) / sqrt(3).
  const double a = op.hue_shift_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a) / std::sqrt(3.0);
  const double t = (1.0 - c) / 3.0;
  const double m[3][3] = {{c + t, t - s, t + s}, {t + s, c + t, t - s}, {t - s, t + s, c + t}};
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    const double rgb[3] = {out[3 * p], out[3 * p + 1], out[3 * p + 2]};
    for (int r = 0; r < 3; ++r) out[3 * p + r] = m[r][0] * rgb[0] + m[r][1] * rgb[1] + m[r][2] * rgb[2];
  }
  return out;
}

Image metallic(const Image& l_s, const MetallicEdit& op) {
  const int ch = l_s.channels();
  if (op.specular_tint.size() != static_cast<std::size_t>(ch)) {
    fail(ErrorKind::kConfig, "metallic edit needs one tint entry per channel");
  }
  Image out = l_s;
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int k = 0; k < ch; ++k) out[p * ch + k] *= op.specular_tint[k] * op.gain;
  }
  return out;
}

// Rounding residue of the hue rotation (|v| <= 1e-12) snaps to zero.
void require_non_negative(Image& img, const char* what) {
  for (double& v : img.data()) {
    if (v < -1e-12) fail(ErrorKind::kDomain, std::string("negative radiance after edit in ") + what);
    v = std::max(v, 0.0);
  }
}

}  // namespace

Image edit(const RadianceSplit& split, const EditOp& op) {
  require_same_shape(split.l_d, split.l_s, "specular radiance");
  Image l_d = split.l_d;
  Image l_s = split.l_s;
  if (const auto* r = std::get_if<RecolorEdit>(&op)) {
    l_d = recolor(split.l_d, *r);
    require_non_negative(l_d, "L_d");
  } else if (const auto* m = std::get_if<MetallicEdit>(&op)) {
    l_s = metallic(split.l_s, *m);
    require_non_negative(l_s, "L_s");
  }
  Image out(l_d.height(), l_d.width(), l_d.channels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = l_d[i] + l_s[i];
  return out;
}

double psnr(const Image& a, const Image& b, const Mask& mask, double peak) {
  require_same_shape(a, b, "psnr operand");
  if (mask.height() != a.height() || mask.width() != a.width()) fail(ErrorKind::kShape, "psnr mask mismatch");
  double sq = 0.0;
  std::size_t n = 0;
  const int ch = a.channels();
  for (std::size_t p = 0; p < a.pixels(); ++p) {
    if (!mask[p]) continue;
    for (int k = 0; k < ch; ++k) {
      const double d = a[p * ch + k] - b[p * ch + k];
      sq += d * d;
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::kDomain, "no valid pixels");
  if (sq == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (sq / n));
}

}  // namespace polarguide
