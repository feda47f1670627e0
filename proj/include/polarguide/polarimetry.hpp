#pragma once

#include "polarguide/image.hpp"

namespace polarguide {

// Four linear-polarizer captures at 0, 45, 90 and 135 degrees, each H x W x C
// in normalized radiance units.
struct IntensityCapture {
  Image i000;
  Image i045;
  Image i090;
  Image i135;
};

// Linear Stokes components. Circular polarization is not modelled.
struct StokesMap {
  Image s0;
  Image s1;
  Image s2;

  int height() const { return s0.height(); }
  int width() const { return s0.width(); }
  int channels() const { return s0.channels(); }

  friend bool operator==(const StokesMap&, const StokesMap&) = default;
};

struct PolarizationMap {
  Image dolp;  // [0, 1]
  Image aolp;  // radians, [-pi/2, pi/2)
};

using ValidityMask = Mask;

// Guard on the DoLP division; pixels with s0 at or below it report rho = 0.
inline constexpr double kDolpEpsilon = 1e-8;
// Signal and saturation thresholds of the validity mask (strict).
inline constexpr double kMinSignal = 0.01;
inline constexpr double kSaturation = 1.0;

// Throws kShape naming the offending component when shapes differ.
void check_stokes(const StokesMap& s);

StokesMap stokes_from_capture(const IntensityCapture& cap);

// Inverse of stokes_from_capture: i000 = (s0 + s1) / 2, i090 = (s0 - s1) / 2,
// i045 = (s0 + s2) / 2, i135 = (s0 - s2) / 2.
IntensityCapture capture_from_stokes(const StokesMap& s);

// Half-angle wrapped into [-pi/2, pi/2).
double aolp_from(double s1, double s2);
double dolp_from(double s0, double s1, double s2);

PolarizationMap dolp_aolp(const StokesMap& s);

// A pixel is valid iff 0.01 < s0 < 1 and s1^2 + s2^2 <= s0^2 in every channel.
ValidityMask validity_mask(const StokesMap& s);

}  // namespace polarguide
