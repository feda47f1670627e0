#pragma once

#include <utility>

#include "polarguide/image.hpp"
#include "polarguide/polarimetry.hpp"

namespace polarguide {

// Per-pixel viewing-ray model. Orthographic is the default: every ray is
// (0, 0, 1). Perspective derives per-pixel rays from a horizontal field of
// view with f = W / (2 tan(fov / 2)), f_x = f, f_y = f * H / W.
class CameraModel {
 public:
  enum class Kind { kOrthographic, kPerspective };

  static CameraModel orthographic() { return CameraModel(); }
  // Principal point defaults to the image center ((W - 1) / 2, (H - 1) / 2).
  static CameraModel perspective(double fov_deg, int width, int height);
  static CameraModel perspective(double fov_deg, int width, int height, double cx, double cy);

  Kind kind() const { return kind_; }
  bool is_perspective() const { return kind_ == Kind::kPerspective; }
  double fov_deg() const { return fov_deg_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double focal() const;
  double fx() const { return focal(); }
  double fy() const { return focal() * height_ / width_; }

  // "ortho" or "fov:<deg>".
  std::string to_string() const;

 private:
  Kind kind_ = Kind::kOrthographic;
  double fov_deg_ = 0.0;
  int width_ = 0;
  int height_ = 0;
  double cx_ = 0.0;
  double cy_ = 0.0;
};

// H x W x 3 grid of unit vectors pointing from the surface toward the camera.
using ViewField = Image;

// Pixel (row, col) maps to u = col and v = H - 1 - row so that v points up.
ViewField view_field(const CameraModel& cam, int height, int width);

struct SphericalField {
  Image theta;  // [0, pi]
  Image psi;    // (-pi, pi]; 0 where n_x = n_y = 0
};

SphericalField to_spherical(const NormalMap& n, const ViewField& v);

struct MaterialParams {
  double eta = 1.5;
};

void check_material(const MaterialParams& mat);

// Fresnel degree of polarization for diffuse and specular reflection.
// theta beyond pi/2 is clamped to pi/2; rho_s is clamped to [0, 1].
double dolp_diffuse(double theta, const MaterialParams& mat);
double dolp_specular(double theta, const MaterialParams& mat);

// Both DoLPs and their derivatives with respect to cos(theta). The argument
// is clamped to [0, 1] and derivatives vanish outside that interval.
struct FresnelTerms {
  double rho_d = 0.0;
  double drho_d = 0.0;
  double rho_s = 0.0;
  double drho_s = 0.0;
};
FresnelTerms fresnel_terms(double cos_theta, double eta);

struct RadianceSplit {
  Image l_d;
  Image l_s;
};

// Predicted Stokes for normals n (H x W x 3), specular radiance l_s and
// observed S0 (H x W x C). L_d = s0_obs - l_s, and
//   s1 = (L_d rho_d - L_s rho_s) cos 2psi,  s2 = (L_d rho_d - L_s rho_s) sin 2psi.
// The predicted s0 equals s0_obs.
StokesMap render_stokes(const NormalMap& n, const Image& l_s, const Image& s0_obs, const ViewField& v,
                        const MaterialParams& mat);

struct RenderGradients {
  Image grad_n;   // H x W x 3, with respect to the raw components of n
  Image grad_ls;  // H x W x C
};

// Reverse-mode derivative of <cotangent, render_stokes(...)>. The s0
// cotangent is ignored because predicted s0 does not depend on n or l_s.
RenderGradients render_stokes_vjp(const NormalMap& n, const Image& l_s, const Image& s0_obs, const ViewField& v,
                                  const MaterialParams& mat, const StokesMap& cotangent);

// The diffuse and specular addends of the rendered Stokes vector.
std::pair<StokesMap, StokesMap> component_stokes(const NormalMap& n, const Image& l_d, const Image& l_s,
                                                 const ViewField& v, const MaterialParams& mat);

}  // namespace polarguide

namespace polarguide {

// Builds (s0 - l_s, l_s) such that l_d + l_s == s0 holds exactly in floating
// point. l_s may move by at most half an ulp of s0 to make that hold.
RadianceSplit split_radiance(const Image& s0, const Image& l_s);

}  // namespace polarguide
