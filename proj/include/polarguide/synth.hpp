#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "polarguide/fresnel.hpp"
#include "polarguide/image.hpp"
#include "polarguide/polarimetry.hpp"

namespace polarguide {

// Geometry in pixel units; centers are (col, row).
struct SphereGeometry {
  double radius = 48.0;
  double cx = 63.5;
  double cy = 63.5;
};

// Uniformly tilted plane covering the frame. azimuth 90 tilts toward +y.
struct PlaneGeometry {
  double tilt_deg = 45.0;
  double azimuth_deg = 90.0;
};

// Sphere whose height field carries a sinusoidal bump pattern with
// seeded phases. amplitude is relative to the radius, frequency is in
// cycles per radius.
struct BumpySphereGeometry {
  double radius = 48.0;
  double cx = 63.5;
  double cy = 63.5;
  double amplitude = 0.03;
  double frequency = 3.0;
  std::uint64_t seed = 0;
};

using Geometry = std::variant<SphereGeometry, PlaneGeometry, BumpySphereGeometry>;

// Lambertian diffuse radiance albedo * (ambient + (1 - ambient) max(0, n.l)).
// The number of albedo entries sets the channel count (1 or 3).
struct Shading {
  Vec3 light{0.0, 0.0, 1.0};
  std::vector<double> albedo{0.7, 0.55, 0.45};
  double ambient = 0.15;
};

struct SpecularNone {};
// Gaussian highlight centered at pixel (cx, cy).
struct SpecularLobe {
  double cx = 0.0;
  double cy = 0.0;
  double width = 8.0;
  double peak = 0.2;
};
// Reflection of a horizontal bright band: Gaussian in the normal's y component.
struct SpecularBand {
  double center = 0.5;
  double width = 0.15;
  double peak = 0.15;
};

using SpecularPattern = std::variant<SpecularNone, SpecularLobe, SpecularBand>;

struct SceneSpec {
  int height = 128;
  int width = 128;
  Geometry geometry = SphereGeometry{};
  Shading shading;
  SpecularPattern specular = SpecularNone{};
  CameraModel camera;
  MaterialParams material;

  int channels() const { return static_cast<int>(shading.albedo.size()); }
};

struct Scene {
  NormalMap gt;             // background pixels carry (0, 0, 1)
  Mask object;              // pixels covered by the geometry
  Image l_d;                // GT diffuse radiance
  Image l_s;                // GT specular radiance
  IntensityCapture capture;  // float32-representable values
  StokesMap stokes;         // exactly stokes_from_capture(capture)
  ValidityMask mask;
};

Scene generate(const SceneSpec& spec);

struct BlurCorruption {
  double sigma = 2.0;  // pixels
};
// Negates the azimuth, (nx, ny, nz) -> (-nx, -ny, nz). An empty region flips
// the whole image.
struct AzimuthFlip {
  Mask region;
};
// Rotates each normal about a uniformly random tangent axis by an angle
// whose mean is sigma_deg (half-normal magnitude).
struct AngularNoise {
  double sigma_deg = 10.0;
  std::uint64_t seed = 0;
};

using CorruptionStage = std::variant<BlurCorruption, AzimuthFlip, AngularNoise>;

// Stages apply in order. No stages means no corruption; several stages form
// a composite.
struct CorruptionSpec {
  std::vector<CorruptionStage> stages;
};

NormalMap corrupt(const NormalMap& n, const CorruptionSpec& spec);

// Independent zero-mean Gaussian noise per pixel, channel and polarizer
// angle, clamped at zero.
IntensityCapture add_noise(const IntensityCapture& cap, double sigma, std::uint64_t seed);

// Rounds every value to the nearest float.
void quantize_to_float(Image& img);

}  // namespace polarguide
