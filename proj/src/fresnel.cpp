#include "polarguide/fresnel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "polarguide/error.hpp"
#include "polarguide/parallel.hpp"

namespace polarguide {

CameraModel CameraModel::perspective(double fov_deg, int width, int height) {
  return perspective(fov_deg, width, height, 0.5 * (width - 1), 0.5 * (height - 1));
}

CameraModel CameraModel::perspective(double fov_deg, int width, int height, double cx, double cy) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    fail(ErrorKind::kDomain, "camera fov_deg must lie in (0, 180), got " + std::to_string(fov_deg));
  }
  if (width <= 0 || height <= 0) fail(ErrorKind::kDomain, "camera width and height must be positive");
  CameraModel cam;
  cam.kind_ = Kind::kPerspective;
  cam.fov_deg_ = fov_deg;
  cam.width_ = width;
  cam.height_ = height;
  cam.cx_ = cx;
  cam.cy_ = cy;
  return cam;
}

double CameraModel::focal() const {
  if (!is_perspective()) return 0.0;
  const double half = 0.5 * fov_deg_ * std::numbers::pi / 180.0;
  return width_ / (2.0 * std::tan(half));
}

std::string CameraModel::to_string() const {
  if (!is_perspective()) return "ortho";
  char buf[64];
  std::snprintf(buf, sizeof buf, "fov:%.17g", fov_deg_);
  return buf;
}

ViewField view_field(const CameraModel& cam, int height, int width) {
  ViewField v(height, width, 3);
  if (!cam.is_perspective()) {
    for (std::size_t i = 0; i < v.pixels(); ++i) v[3 * i + 2] = 1.0;
    return v;
  }
  if (cam.width() != width || cam.height() != height) {
    fail(ErrorKind::kShape, "camera is " + std::to_string(cam.height()) + "x" + std::to_string(cam.width()) +
                                " but scene is " + std::to_string(height) + "x" + std::to_string(width));
  }
  const double fx = cam.fx();
  const double fy = cam.fy();
  for (int row = 0; row < height; ++row) {
    const double vv = height - 1 - row;
    for (int col = 0; col < width; ++col) {
      const Vec3 d = normalized({(cam.cx() - col) / fx, (cam.cy() - vv) / fy, 1.0});
      double* p = v.pixel(row, col);
      p[0] = d[0];
      p[1] = d[1];
      p[2] = d[2];
    }
  }
  return v;
}

SphericalField to_spherical(const NormalMap& n, const ViewField& v) {
  require_shape(n, n.height(), n.width(), 3, "normals");
  require_same_shape(n, v, "view field");
  SphericalField out{Image(n.height(), n.width(), 1), Image(n.height(), n.width(), 1)};
  for (std::size_t i = 0; i < n.pixels(); ++i) {
    const double* np = n.data().data() + 3 * i;
    const double* vp = v.data().data() + 3 * i;
    const double c = std::clamp(np[0] * vp[0] + np[1] * vp[1] + np[2] * vp[2], -1.0, 1.0);
    out.theta[i] = std::acos(c);
    double psi = (np[0] == 0.0 && np[1] == 0.0) ? 0.0 : std::atan2(np[1], np[0]);
    if (psi <= -std::numbers::pi) psi = std::numbers::pi;
    out.psi[i] = psi;
  }
  return out;
}

void check_material(const MaterialParams& mat) {
  if (!(mat.eta > 1.0) || !std::isfinite(mat.eta)) {
    fail(ErrorKind::kDomain, "refractive index must exceed 1, got " + std::to_string(mat.eta));
  }
}

FresnelTerms fresnel_terms(double cos_theta, double eta) {
  const bool active = cos_theta > 0.0 && cos_theta < 1.0;
  const double c = std::clamp(cos_theta, 0.0, 1.0);
  const double q = 1.0 - c * c;  // sin^2
  const double eta2 = eta * eta;
  const double r = std::sqrt(eta2 - q);
  const double dq = -2.0 * c;
  const double dr = c / r;

  const double k1 = (eta - 1.0 / eta) * (eta - 1.0 / eta);
  const double k2 = (eta + 1.0 / eta) * (eta + 1.0 / eta);
  const double num_d = k1 * q;
  const double den_d = 2.0 + 2.0 * eta2 - k2 * q + 4.0 * c * r;
  const double dnum_d = k1 * dq;
  const double dden_d = -k2 * dq + 4.0 * r + 4.0 * c * dr;

  const double num_s = 2.0 * q * c * r;
  const double den_s = eta2 - q - eta2 * q + 2.0 * q * q;
  const double dnum_s = 2.0 * (dq * c * r + q * r + q * c * dr);
  const double dden_s = (-1.0 - eta2 + 4.0 * q) * dq;

  FresnelTerms t;
  t.rho_d = num_d / den_d;
  const double rho_s = num_s / den_s;
  t.rho_s = std::clamp(rho_s, 0.0, 1.0);
  if (active) {
    t.drho_d = (dnum_d * den_d - num_d * dden_d) / (den_d * den_d);
    if (rho_s >= 0.0 && rho_s <= 1.0) t.drho_s = (dnum_s * den_s - num_s * dden_s) / (den_s * den_s);
  }
  return t;
}

double dolp_diffuse(double theta, const MaterialParams& mat) {
  return fresnel_terms(std::cos(std::min(theta, std::numbers::pi / 2)), mat.eta).rho_d;
}

double dolp_specular(double theta, const MaterialParams& mat) {
  return fresnel_terms(std::cos(std::min(theta, std::numbers::pi / 2)), mat.eta).rho_s;
}

namespace {

// Everything the forward model needs from one pixel's normal and ray.
struct PixelGeometry {
  FresnelTerms fresnel;
  double cos2 = 1.0;  // cos 2psi
  double sin2 = 0.0;  // sin 2psi
};

PixelGeometry pixel_geometry(const double* n, const double* v, double eta) {
  PixelGeometry g;
  g.fresnel = fresnel_terms(n[0] * v[0] + n[1] * v[1] + n[2] * v[2], eta);
  const double rxy2 = n[0] * n[0] + n[1] * n[1];
  if (rxy2 > 0.0) {
    g.cos2 = (n[0] * n[0] - n[1] * n[1]) / rxy2;
    g.sin2 = 2.0 * n[0] * n[1] / rxy2;
  }
  return g;
}

void check_render_inputs(const NormalMap& n, const Image& l_s, const Image& s0_obs, const ViewField& v,
                         const MaterialParams& mat) {
  require_shape(n, n.height(), n.width(), 3, "normals");
  require_same_shape(n, v, "view field");
  require_same_shape(s0_obs, l_s, "specular radiance");
  if (!s0_obs.same_extent(n)) {
    fail(ErrorKind::kShape, "radiance grid " + s0_obs.shape_string() + " does not match normals " + n.shape_string());
  }
  check_material(mat);
}

}  // namespace

StokesMap render_stokes(const NormalMap& n, const Image& l_s, const Image& s0_obs, const ViewField& v,
                        const MaterialParams& mat) {
  check_render_inputs(n, l_s, s0_obs, v, mat);
  const int h = n.height();
  const int w = n.width();
  const int ch = s0_obs.channels();
  StokesMap out{s0_obs, Image(h, w, ch), Image(h, w, ch)};
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const PixelGeometry g = pixel_geometry(n.pixel(y, x), v.pixel(y, x), mat.eta);
      for (int k = 0; k < ch; ++k) {
        const double ls = l_s(y, x, k);
        const double ld = s0_obs(y, x, k) - ls;
        const double dd = ld * g.fresnel.rho_d;
        const double ss = ls * g.fresnel.rho_s;
        out.s1(y, x, k) = dd * g.cos2 + ss * -g.cos2;
        out.s2(y, x, k) = dd * g.sin2 + ss * -g.sin2;
      }
    }
  });
  return out;
}

RenderGradients render_stokes_vjp(const NormalMap& n, const Image& l_s, const Image& s0_obs, const ViewField& v,
                                  const MaterialParams& mat, const StokesMap& cotangent) {
  check_render_inputs(n, l_s, s0_obs, v, mat);
  require_same_shape(s0_obs, cotangent.s1, "cotangent s1");
  require_same_shape(s0_obs, cotangent.s2, "cotangent s2");
  const int h = n.height();
  const int w = n.width();
  const int ch = s0_obs.channels();
  RenderGradients out{Image(h, w, 3), Image(h, w, ch)};
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double* np = n.pixel(y, x);
      const double* vp = v.pixel(y, x);
      const PixelGeometry g = pixel_geometry(np, vp, mat.eta);
      const FresnelTerms& f = g.fresnel;
      double g_cos_theta = 0.0;
      double g_cos2 = 0.0;
      double g_sin2 = 0.0;
      for (int k = 0; k < ch; ++k) {
        const double g1 = cotangent.s1(y, x, k);
        const double g2 = cotangent.s2(y, x, k);
        const double ls = l_s(y, x, k);
        const double ld = s0_obs(y, x, k) - ls;
        const double amp = ld * f.rho_d - ls * f.rho_s;
        const double g_amp = g1 * g.cos2 + g2 * g.sin2;
        out.grad_ls(y, x, k) = -g_amp * (f.rho_d + f.rho_s);
        g_cos_theta += g_amp * (ld * f.drho_d - ls * f.drho_s);
        g_cos2 += g1 * amp;
        g_sin2 += g2 * amp;
      }
      double* gn = out.grad_n.pixel(y, x);
      gn[0] = g_cos_theta * vp[0];
      gn[1] = g_cos_theta * vp[1];
      gn[2] = g_cos_theta * vp[2];
      const double nx = np[0];
      const double ny = np[1];
      const double rxy2 = nx * nx + ny * ny;
      if (rxy2 > 0.0) {
        const double inv4 = 1.0 / (rxy2 * rxy2);
        // d(cos 2psi) = 4 nx ny (ny dnx - nx dny) / r^4
        // d(sin 2psi) = 2 (nx^2 - ny^2) (nx dny - ny dnx) / r^4
        const double dcos_dx = 4.0 * nx * ny * ny * inv4;
        const double dcos_dy = -4.0 * nx * nx * ny * inv4;
        const double dsin_dx = 2.0 * ny * (ny * ny - nx * nx) * inv4;
        const double dsin_dy = 2.0 * nx * (nx * nx - ny * ny) * inv4;
        gn[0] += g_cos2 * dcos_dx + g_sin2 * dsin_dx;
        gn[1] += g_cos2 * dcos_dy + g_sin2 * dsin_dy;
      }
    }
  });
  return out;
}

std::pair<StokesMap, StokesMap> component_stokes(const NormalMap& n, const Image& l_d, const Image& l_s,
                                                 const ViewField& v, const MaterialParams& mat) {
  require_same_shape(l_d, l_s, "specular radiance");
  check_render_inputs(n, l_s, l_d, v, mat);
  const int h = n.height();
  const int w = n.width();
  const int ch = l_d.channels();
  StokesMap diffuse{l_d, Image(h, w, ch), Image(h, w, ch)};
  StokesMap specular{l_s, Image(h, w, ch), Image(h, w, ch)};
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const PixelGeometry g = pixel_geometry(n.pixel(y, x), v.pixel(y, x), mat.eta);
      for (int k = 0; k < ch; ++k) {
        const double dd = l_d(y, x, k) * g.fresnel.rho_d;
        const double ss = l_s(y, x, k) * g.fresnel.rho_s;
        // Specular AoLP is rotated by pi/2, which negates cos 2phi and sin 2phi.
        diffuse.s1(y, x, k) = dd * g.cos2;
        diffuse.s2(y, x, k) = dd * g.sin2;
        specular.s1(y, x, k) = ss * -g.cos2;
        specular.s2(y, x, k) = ss * -g.sin2;
      }
    }
  });
  return {std::move(diffuse), std::move(specular)};
}

}  // namespace polarguide

namespace polarguide {

RadianceSplit split_radiance(const Image& s0, const Image& l_s) {
  require_same_shape(s0, l_s, "specular radiance");
  RadianceSplit out{Image(s0.height(), s0.width(), s0.channels()), l_s};
  for (std::size_t i = 0; i < s0.size(); ++i) {
    // Sterbenz: once the subtrahend is within a factor two of s0 the
    // difference is exact, so recomputing the smaller part from the larger
    // one makes the sum reproduce s0.
    const double d = s0[i] - l_s[i];
    out.l_d[i] = d;
    if (2.0 * l_s[i] < s0[i]) out.l_s[i] = s0[i] - d;
  }
  return out;
}

}  // namespace polarguide
