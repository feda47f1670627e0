#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "polarguide/error.hpp"
#include "polarguide/metrics.hpp"
#include "support.hpp"

using namespace polarguide;

namespace {

// Normal at `deg` degrees from +z, tilted toward +x.
void set_tilted(NormalMap& n, std::size_t p, double deg) {
  const double a = deg * std::numbers::pi / 180.0;
  n[3 * p] = std::sin(a);
  n[3 * p + 1] = 0.0;
  n[3 * p + 2] = std::cos(a);
}

NormalMap facing(int h, int w) {
  NormalMap n(h, w, 3);
  for (std::size_t p = 0; p < n.pixels(); ++p) n[3 * p + 2] = 1.0;
  return n;
}

}  // namespace

TEST_CASE("three-pixel oracle") {
  NormalMap gt = facing(1, 3), pred = facing(1, 3);
  set_tilted(pred, 0, 0.0);
  set_tilted(pred, 1, 10.0);
  set_tilted(pred, 2, 20.0);
  const NormalMetrics m = evaluate(pred, gt, Mask(1, 3, true));
  CHECK(m.mean == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(m.median == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(m.rmse == doctest::Approx(std::sqrt(500.0 / 3.0)).epsilon(1e-12));
  CHECK(m.acc_1125 == doctest::Approx(2.0 / 3.0));
  CHECK(m.acc_225 == 1.0);
  CHECK(m.acc_30 == 1.0);
  CHECK(m.n_valid == 3);
}

TEST_CASE("identical maps score zero") {
  const NormalMap n = testing::random_normals(16, 16, 3);
  const NormalMetrics m = evaluate(n, n, Mask(16, 16, true));
  CHECK(m.mean == 0.0);
  CHECK(m.median == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.acc_1125 == 1.0);
}

TEST_CASE("accuracy thresholds are strict") {
  const std::vector<double> errs{11.25, 22.5, 30.0, std::nextafter(11.25, 0.0)};
  const NormalMetrics m = summarize(errs);
  CHECK(m.acc_1125 == 0.25);
  CHECK(m.acc_225 == 0.5);
  CHECK(m.acc_30 == 0.75);
  CHECK(m.median == doctest::Approx(0.5 * (11.25 + 22.5)));
}

TEST_CASE("angles at the extremes") {
  NormalMap a = facing(1, 2), b = facing(1, 2);
  b[2] = -1.0;
  b[3] = 1e-9;
  b[5] = 1.0;
  const double norm = std::sqrt(1.0 + 1e-18);
  b[3] /= norm;
  b[5] /= norm;
  const Image e = angular_error_map(b, a, Mask(1, 2, true));
  CHECK(e[0] == 180.0);
  CHECK(e[1] == doctest::Approx(1e-9 * 180.0 / std::numbers::pi).epsilon(1e-6));
  CHECK(e[1] > 0.0);
}

TEST_CASE("masked pixels are ignored") {
  NormalMap gt = facing(2, 2), pred = facing(2, 2);
  set_tilted(pred, 3, 90.0);
  Mask mask(2, 2, true);
  mask.set(1, 1, false);
  const Image e = angular_error_map(pred, gt, mask);
  CHECK(std::isnan(e[3]));
  CHECK(evaluate(pred, gt, mask).mean == 0.0);
  CHECK(evaluate(pred, gt, Mask(2, 2, true)).mean == doctest::Approx(22.5));
}

TEST_CASE("empty mask and shape errors") {
  const NormalMap n = facing(2, 2);
  CHECK_THROWS_AS(evaluate(n, n, Mask(2, 2, false)), Error);
  try {
    evaluate(n, n, Mask(2, 2, false));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDomain);
  }
  CHECK_THROWS_AS(evaluate(n, facing(2, 3), Mask(2, 2, true)), Error);
  CHECK_THROWS_AS(evaluate(n, n, Mask(3, 2, true)), Error);
}

TEST_CASE("statistics do not depend on pixel order") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  std::vector<double> errs(501);
  for (double& e : errs) e = u(rng);
  const NormalMetrics a = summarize(errs);
  std::shuffle(errs.begin(), errs.end(), rng);
  const NormalMetrics b = summarize(errs);
  CHECK(a.median == b.median);
  CHECK(a.acc_30 == b.acc_30);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-14));
  std::vector<double> sorted = errs;
  std::sort(sorted.begin(), sorted.end());
  CHECK(a.median == sorted[250]);
}
