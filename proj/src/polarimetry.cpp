#include "polarguide/polarimetry.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "polarguide/error.hpp"

namespace polarguide {

void check_stokes(const StokesMap& s) {
  require_same_shape(s.s0, s.s1, "stokes s1");
  require_same_shape(s.s0, s.s2, "stokes s2");
}

StokesMap stokes_from_capture(const IntensityCapture& cap) {
  require_same_shape(cap.i000, cap.i045, "capture i045");
  require_same_shape(cap.i000, cap.i090, "capture i090");
  require_same_shape(cap.i000, cap.i135, "capture i135");
  for (auto [img, name] : {std::pair{&cap.i000, "i000"}, {&cap.i045, "i045"}, {&cap.i090, "i090"}, {&cap.i135, "i135"}}) {
    if (!img->all_finite()) fail(ErrorKind::kDomain, std::string("capture ") + name + " contains non-finite values");
  }
  const Image& a = cap.i000;
  StokesMap s{Image(a.height(), a.width(), a.channels()), Image(a.height(), a.width(), a.channels()),
              Image(a.height(), a.width(), a.channels())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.s0[i] = cap.i000[i] + cap.i090[i];
    s.s1[i] = cap.i000[i] - cap.i090[i];
    s.s2[i] = cap.i045[i] - cap.i135[i];
  }
  return s;
}

IntensityCapture capture_from_stokes(const StokesMap& s) {
  check_stokes(s);
  const Image& a = s.s0;
  IntensityCapture cap{Image(a.height(), a.width(), a.channels()), Image(a.height(), a.width(), a.channels()),
                       Image(a.height(), a.width(), a.channels()), Image(a.height(), a.width(), a.channels())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    cap.i000[i] = 0.5 * (s.s0[i] + s.s1[i]);
    cap.i090[i] = 0.5 * (s.s0[i] - s.s1[i]);
    cap.i045[i] = 0.5 * (s.s0[i] + s.s2[i]);
    cap.i135[i] = 0.5 * (s.s0[i] - s.s2[i]);
  }
  return cap;
}

double aolp_from(double s1, double s2) {
  if (s1 == 0.0 && s2 == 0.0) return 0.0;
  double phi = 0.5 * std::atan2(s2, s1);  // (-pi/2, pi/2]
  if (phi >= std::numbers::pi / 2) phi -= std::numbers::pi;
  return phi;
}

double dolp_from(double s0, double s1, double s2) {
  if (!(s0 > kDolpEpsilon)) return 0.0;
  return std::sqrt(s1 * s1 + s2 * s2) / s0;
}

PolarizationMap dolp_aolp(const StokesMap& s) {
  check_stokes(s);
  PolarizationMap p{Image(s.height(), s.width(), s.channels()), Image(s.height(), s.width(), s.channels())};
  for (std::size_t i = 0; i < s.s0.size(); ++i) {
    p.dolp[i] = dolp_from(s.s0[i], s.s1[i], s.s2[i]);
    p.aolp[i] = aolp_from(s.s1[i], s.s2[i]);
  }
  return p;
}

ValidityMask validity_mask(const StokesMap& s) {
  check_stokes(s);
  ValidityMask m(s.height(), s.width());
  const int c = s.channels();
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      bool ok = c > 0;
      for (int k = 0; k < c && ok; ++k) {
        const double s0 = s.s0(y, x, k);
        const double s1 = s.s1(y, x, k);
        const double s2 = s.s2(y, x, k);
        ok = s0 > kMinSignal && s0 < kSaturation && s1 * s1 + s2 * s2 <= s0 * s0;
      }
      m.set(y, x, ok);
    }
  }
  return m;
}

}  // namespace polarguide
