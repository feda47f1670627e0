#pragma once

#include <cmath>
#include <algorithm>
#include <random>

#include "polarguide/image.hpp"

namespace testing {

using polarguide::Image;

inline Image random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w, c);
  for (double& v : img.data()) v = u(rng);
  return img;
}

// Unit normals facing the camera (n_z >= min_z).
inline Image random_normals(int h, int w, std::uint64_t seed, double min_z = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Image n(h, w, 3);
  for (std::size_t p = 0; p < n.pixels(); ++p) {
    double x, y, z;
    do {
      x = u(rng);
      y = u(rng);
      z = std::abs(u(rng));
      const double len = std::sqrt(x * x + y * y + z * z);
      x /= len;
      y /= len;
      z /= len;
    } while (z < min_z);
    n[3 * p] = x;
    n[3 * p + 1] = y;
    n[3 * p + 2] = z;
  }
  return n;
}

inline double inner(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Image& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace testing

#include "polarguide/fresnel.hpp"

namespace testing {

// |a - b| / max(|a|, |b|, floor), maximized over entries.
inline double max_rel_error(const Image& a, const Image& b, double floor = 1e-6) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    m = std::max(m, d / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
  }
  return m;
}

// Random scene for render_stokes: unit normals, s0 in (0.05, 1), l_s in
// [0, s0] and a random cotangent. Returns the worst relative error of the
// analytic VJP against central differences of <cotangent, render>.
inline double render_vjp_error(int h, int w, const polarguide::CameraModel& cam, double eta, std::uint64_t seed,
                               double step = 1e-5) {
  using namespace polarguide;
  const int c = 3;
  const Image n = random_normals(h, w, seed, 0.3);
  const Image s0 = random_image(h, w, c, seed + 1, 0.05, 1.0);
  Image ls = random_image(h, w, c, seed + 2);
  for (std::size_t i = 0; i < ls.size(); ++i) ls[i] *= s0[i];
  const StokesMap cot{random_image(h, w, c, seed + 3, -1, 1), random_image(h, w, c, seed + 4, -1, 1),
                      random_image(h, w, c, seed + 5, -1, 1)};
  const ViewField v = view_field(cam, h, w);
  const MaterialParams mat{eta};
  auto objective = [&](const Image& nn, const Image& l) {
    const StokesMap s = render_stokes(nn, l, s0, v, mat);
    return inner(cot.s0, s.s0) + inner(cot.s1, s.s1) + inner(cot.s2, s.s2);
  };
  const RenderGradients g = render_stokes_vjp(n, ls, s0, v, mat, cot);
  Image fd_n(h, w, 3), fd_ls(h, w, c);
  for (std::size_t i = 0; i < n.size(); ++i) {
    Image up = n, dn = n;
    up[i] += step;
    dn[i] -= step;
    fd_n[i] = (objective(up, ls) - objective(dn, ls)) / (2 * step);
  }
  for (std::size_t i = 0; i < ls.size(); ++i) {
    Image up = ls, dn = ls;
    up[i] += step;
    dn[i] -= step;
    fd_ls[i] = (objective(n, up) - objective(n, dn)) / (2 * step);
  }
  return std::max(max_rel_error(g.grad_n, fd_n), max_rel_error(g.grad_ls, fd_ls));
}

}  // namespace testing

namespace testing {

// Elevation in [0, atan(eta)] whose specular DoLP equals `target` (bisection).
inline double specular_angle_for(double target, double eta) {
  double lo = 0.0, hi = std::atan(eta);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (polarguide::dolp_specular(mid, {eta}) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// A diffuse-only pixel at (theta, psi) and a specular-only pixel at
// psi + pi/2 whose specular DoLP matches; returns max |delta s1|, |delta s2|.
inline double half_pi_ambiguity_gap(double theta, double psi, double radiance, double eta) {
  using namespace polarguide;
  const double rd = dolp_diffuse(theta, {eta});
  const double theta_s = specular_angle_for(rd, eta);
  NormalMap n(1, 2, 3);
  n(0, 0, 0) = std::sin(theta) * std::cos(psi);
  n(0, 0, 1) = std::sin(theta) * std::sin(psi);
  n(0, 0, 2) = std::cos(theta);
  const double psi_s = psi + std::acos(-1.0) / 2;
  n(0, 1, 0) = std::sin(theta_s) * std::cos(psi_s);
  n(0, 1, 1) = std::sin(theta_s) * std::sin(psi_s);
  n(0, 1, 2) = std::cos(theta_s);
  const Image s0(1, 2, 1, radiance);
  Image ls(1, 2, 1, 0.0);
  ls(0, 1, 0) = radiance;
  const StokesMap s = render_stokes(n, ls, s0, view_field(CameraModel::orthographic(), 1, 2), {eta});
  return std::max(std::abs(s.s1[0] - s.s1[1]), std::abs(s.s2[0] - s.s2[1]));
}

}  // namespace testing
