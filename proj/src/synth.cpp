#include "polarguide/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "polarguide/error.hpp"

namespace polarguide {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct GeometrySample {
  bool inside = false;
  Vec3 normal{0.0, 0.0, 1.0};
};

GeometrySample sample(const SphereGeometry& g, int row, int col) {
  const double x = (col - g.cx) / g.radius;
  const double y = (g.cy - row) / g.radius;
  const double r2 = x * x + y * y;
  if (r2 >= 1.0) return {};
  return {true, normalized({x, y, std::sqrt(1.0 - r2)})};
}

GeometrySample sample(const PlaneGeometry& g, int, int) {
  const double t = g.tilt_deg * kDeg;
  const double a = g.azimuth_deg * kDeg;
  return {true, normalized({std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), std::cos(t)})};
}

struct BumpPhases {
  double px = 0.0;
  double py = 0.0;
};

GeometrySample sample(const BumpySphereGeometry& g, const BumpPhases& ph, int row, int col) {
  const double x = (col - g.cx) / g.radius;
  const double y = (g.cy - row) / g.radius;
  const double r2 = x * x + y * y;
  if (r2 >= 1.0) return {};
  // z(x, y) = sqrt(1 - x^2 - y^2) + a sin(kx + px) sin(ky + py); the normal
  // (-dz/dx, -dz/dy, 1) is scaled by h = sqrt(1 - r^2) to stay finite at the rim.
  const double h = std::sqrt(1.0 - r2);
  const double k = 2.0 * std::numbers::pi * g.frequency;
  const double bx = g.amplitude * k * std::cos(k * x + ph.px) * std::sin(k * y + ph.py);
  const double by = g.amplitude * k * std::sin(k * x + ph.px) * std::cos(k * y + ph.py);
  return {true, normalized({x + h * bx, y + h * by, h})};
}

double specular_at(const SpecularPattern& pattern, int row, int col, const Vec3& n) {
  if (const auto* lobe = std::get_if<SpecularLobe>(&pattern)) {
    const double dx = col - lobe->cx;
    const double dy = row - lobe->cy;
    return lobe->peak * std::exp(-(dx * dx + dy * dy) / (2.0 * lobe->width * lobe->width));
  }
  if (const auto* band = std::get_if<SpecularBand>(&pattern)) {
    const double d = n[1] - band->center;
    return band->peak * std::exp(-(d * d) / (2.0 * band->width * band->width));
  }
  return 0.0;
}

}  // namespace

void quantize_to_float(Image& img) {
  for (double& v : img.data()) v = static_cast<double>(static_cast<float>(v));
}

Scene generate(const SceneSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) fail(ErrorKind::kDomain, "scene height and width must be positive");
  const int ch = spec.channels();
  if (ch != 1 && ch != 3) fail(ErrorKind::kDomain, "albedo must have 1 or 3 entries");
  check_material(spec.material);
  const int h = spec.height;
  const int w = spec.width;

  BumpPhases phases;
  if (const auto* b = std::get_if<BumpySphereGeometry>(&spec.geometry)) {
    std::mt19937_64 rng(b->seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    phases.px = u(rng);
    phases.py = u(rng);
  }

  Scene scene;
  scene.gt = NormalMap(h, w, 3);
  scene.object = Mask(h, w);
  scene.l_d = Image(h, w, ch);
  scene.l_s = Image(h, w, ch);
  const Vec3 light = normalized(spec.shading.light);
  const double ambient = spec.shading.ambient;

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const GeometrySample s = std::visit(
          [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, BumpySphereGeometry>) {
              return sample(g, phases, row, col);
            } else {
              return sample(g, row, col);
            }
          },
          spec.geometry);
      double* np = scene.gt.pixel(row, col);
      np[0] = s.normal[0];
      np[1] = s.normal[1];
      np[2] = s.normal[2];
      if (!s.inside) continue;
      scene.object.set(row, col, true);
      const double shade = ambient + (1.0 - ambient) * std::max(0.0, dot(s.normal, light));
      const double spec_l = specular_at(spec.specular, row, col, s.normal);
      for (int k = 0; k < ch; ++k) {
        const double ld = spec.shading.albedo[k] * shade;
        const double s0 = ld + spec_l;
        if (!(s0 > 0.0 && s0 <= 1.0)) {
          fail(ErrorKind::kDomain, "unrenderable scene: s0 = " + std::to_string(s0) + " at pixel (" +
                                       std::to_string(row) + ", " + std::to_string(col) + ")");
        }
        scene.l_d(row, col, k) = ld;
        scene.l_s(row, col, k) = spec_l;
      }
    }
  }

  Image s0(h, w, ch);
  for (std::size_t i = 0; i < s0.size(); ++i) s0[i] = scene.l_d[i] + scene.l_s[i];
  const ViewField v = view_field(spec.camera, h, w);
  const StokesMap rendered = render_stokes(scene.gt, scene.l_s, s0, v, spec.material);

  // Synthesize captures from Stokes, store them at float precision and derive
  // the reference Stokes back from them so the pair inverts exactly.
  scene.capture = capture_from_stokes(rendered);
  for (Image* img : {&scene.capture.i000, &scene.capture.i045, &scene.capture.i090, &scene.capture.i135}) {
    quantize_to_float(*img);
  }
  scene.stokes = stokes_from_capture(scene.capture);
  scene.mask = validity_mask(scene.stokes);
  return scene;
}

namespace {

NormalMap blur(const NormalMap& n, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;
  const int h = n.height();
  const int w = n.width();
  NormalMap tmp(h, w, 3);
  NormalMap out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        for (int c = 0; c < 3; ++c) tmp(y, x, c) += kernel[i + radius] * n(y, xx, c);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        for (int c = 0; c < 3; ++c) out(y, x, c) += kernel[i + radius] * tmp(yy, x, c);
      }
    }
  }
  return normalize_normals(out);
}

NormalMap flip(const NormalMap& n, const Mask& region) {
  const bool whole = region.pixels() == 0;
  if (!whole && (region.height() != n.height() || region.width() != n.width())) {
    fail(ErrorKind::kShape, "azimuth_flip region does not match the normal map");
  }
  NormalMap out = n;
  for (int y = 0; y < n.height(); ++y) {
    for (int x = 0; x < n.width(); ++x) {
      if (!whole && !region(y, x)) continue;
      out(y, x, 0) = -out(y, x, 0);
      out(y, x, 1) = -out(y, x, 1);
    }
  }
  return out;
}

NormalMap angular_noise(const NormalMap& n, const AngularNoise& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  const double scale = spec.sigma_deg * kDeg * std::sqrt(std::numbers::pi / 2.0);
  NormalMap out(n.height(), n.width(), 3);
  for (std::size_t i = 0; i < n.pixels(); ++i) {
    const Vec3 nn = normalized({n[3 * i], n[3 * i + 1], n[3 * i + 2]});
    const double angle = scale * std::abs(normal(rng));
    const double dir = uniform(rng);
    // Orthonormal tangent frame around nn.
    const Vec3 helper = std::abs(nn[2]) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
    const Vec3 t1 = normalized({helper[1] * nn[2] - helper[2] * nn[1], helper[2] * nn[0] - helper[0] * nn[2],
                                helper[0] * nn[1] - helper[1] * nn[0]});
    const Vec3 t2{nn[1] * t1[2] - nn[2] * t1[1], nn[2] * t1[0] - nn[0] * t1[2], nn[0] * t1[1] - nn[1] * t1[0]};
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double cd = std::cos(dir);
    const double sd = std::sin(dir);
    const Vec3 r = normalized({ca * nn[0] + sa * (cd * t1[0] + sd * t2[0]), ca * nn[1] + sa * (cd * t1[1] + sd * t2[1]),
                               ca * nn[2] + sa * (cd * t1[2] + sd * t2[2])});
    out[3 * i] = r[0];
    out[3 * i + 1] = r[1];
    out[3 * i + 2] = r[2];
  }
  return out;
}

}  // namespace

NormalMap corrupt(const NormalMap& n, const CorruptionSpec& spec) {
  require_shape(n, n.height(), n.width(), 3, "normals");
  NormalMap out = n;
  for (const CorruptionStage& stage : spec.stages) {
    if (const auto* b = std::get_if<BlurCorruption>(&stage)) {
      if (b->sigma < 0.0) fail(ErrorKind::kDomain, "blur sigma must be non-negative");
      if (b->sigma > 0.0) out = blur(out, b->sigma);
    } else if (const auto* f = std::get_if<AzimuthFlip>(&stage)) {
      out = flip(out, f->region);
    } else if (const auto* a = std::get_if<AngularNoise>(&stage)) {
      if (a->sigma_deg < 0.0) fail(ErrorKind::kDomain, "angular noise sigma must be non-negative");
      if (a->sigma_deg > 0.0) out = angular_noise(out, *a);
    }
  }
  return out;
}

IntensityCapture add_noise(const IntensityCapture& cap, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) fail(ErrorKind::kDomain, "noise sigma must be non-negative");
  IntensityCapture out = cap;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Image* img : {&out.i000, &out.i045, &out.i090, &out.i135}) {
    for (double& v : img->data()) v = std::max(0.0, v + normal(rng));
  }
  return out;
}

}  // namespace polarguide
