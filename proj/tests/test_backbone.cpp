#include <cmath>

#include "doctest.h"
#include "polarguide/backbone.hpp"
#include "polarguide/config.hpp"
#include "polarguide/error.hpp"
#include "polarguide/metrics.hpp"
#include "support.hpp"

using namespace polarguide;
using testing::inner;
using testing::random_image;

namespace {

double norm_error(const NormalMap& n) {
  double m = 0.0;
  for (std::size_t p = 0; p < n.pixels(); ++p) {
    const double len = std::sqrt(n[3 * p] * n[3 * p] + n[3 * p + 1] * n[3 * p + 1] + n[3 * p + 2] * n[3 * p + 2]);
    m = std::max(m, std::abs(len - 1.0));
  }
  return m;
}

double adjoint_gap(Backbone& f, const Image& x, std::uint64_t seed) {
  const BackboneInfo& i = f.info();
  const Image v = random_image(i.height, i.width, i.channels, seed, -1, 1);
  const Image u = random_image(i.height, i.width, 3, seed + 1, -1, 1);
  const double lhs = inner(f.jvp_input(x, v), u);
  const double rhs = inner(v, f.vjp_input(x, u));
  return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
}

CorruptedOracleSpec oracle_spec(double gain) {
  CorruptedOracleSpec s;
  s.corruption.stages = {BlurCorruption{2.0}};
  s.gain = gain;
  s.density = 0.05;
  s.seed = 4;
  return s;
}

}  // namespace

TEST_CASE("smoother on a constant image gives the head's normal") {
  LinearSmoother f(6, 5, 3, {0, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0.0, 0.0, 1.0}});
  const NormalMap n = f.forward(Image(6, 5, 3, 0.5));
  const double len = std::sqrt(0.5 * 0.5 * 2 + 1.5 * 1.5);
  for (std::size_t p = 0; p < n.pixels(); ++p) {
    CHECK(n[3 * p] == doctest::Approx(0.5 / len).epsilon(1e-15));
    CHECK(n[3 * p + 1] == doctest::Approx(0.5 / len).epsilon(1e-15));
    CHECK(n[3 * p + 2] == doctest::Approx(1.5 / len).epsilon(1e-15));
  }
}

TEST_CASE("smoother outputs unit normals deterministically") {
  LinearSmoother f(20, 24, 3);
  const Image x = random_image(20, 24, 3, 1);
  const NormalMap a = f.forward(x);
  CHECK(norm_error(a) < 1e-12);
  CHECK(f.forward(x) == a);
}

TEST_CASE("smoother VJP matches finite differences") {
  for (int ch : {1, 3}) {
    LinearSmoother f(8, 9, ch, {2});
    const Image x = random_image(8, 9, ch, 2);
    const Image cot = random_image(8, 9, 3, 3, -1, 1);
    const Image analytic = f.vjp_input(x, cot);
    const Image fd = finite_difference_vjp(f, x, cot, 1e-5);
    CHECK(testing::max_rel_error(analytic, fd, 1e-3) < 1e-5);
  }
}

TEST_CASE("smoother JVP and VJP are adjoint") {
  for (int radius : {0, 1, 3}) {
    LinearSmoother f(12, 10, 3, {radius});
    const Image x = random_image(12, 10, 3, 5);
    CHECK(adjoint_gap(f, x, 6) < 1e-6);
    CHECK(testing::max_rel_error(f.jvp_input(x, random_image(12, 10, 3, 7)),
                                 finite_difference_jvp(f, x, random_image(12, 10, 3, 7), 1e-5), 1e-3) < 1e-5);
  }
}

TEST_CASE("one-hot tangent on the smoother gives the kernel column") {
  const int h = 9, w = 11, ch = 3;
  LinearSmoother f(h, w, ch, {2});
  const Image x = random_image(h, w, ch, 8);
  const Image raw = f.raw(x);
  const int py = 1, px = 9, c = 2;
  Image tangent(h, w, ch);
  tangent(py, px, c) = 1.0;
  const Image out = f.jvp_input(x, tangent);
  double worst = 0.0;
  for (int qy = 0; qy < h; ++qy) {
    for (int qx = 0; qx < w; ++qx) {
      const double k = f.kernel_weight(qy, qx, py, px);
      const double* r = raw.pixel(qy, qx);
      const double len = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
      double d[3], dn = 0.0;
      for (int o = 0; o < 3; ++o) {
        d[o] = k * f.mixing(o, c);
        dn += d[o] * r[o] / len;
      }
      for (int o = 0; o < 3; ++o) {
        const double expected = (d[o] - dn * r[o] / len) / len;
        worst = std::max(worst, std::abs(out(qy, qx, o) - expected));
      }
      if (k == 0.0) {
        for (int o = 0; o < 3; ++o) REQUIRE(out(qy, qx, o) == 0.0);
      }
    }
  }
  CHECK(worst < 1e-15);
}

TEST_CASE("zero tangents and cotangents give zero") {
  LinearSmoother f(6, 6, 3);
  const Image x = random_image(6, 6, 3, 9);
  CHECK(testing::max_abs(f.vjp_input(x, Image(6, 6, 3))) == 0.0);
  CHECK(testing::max_abs(f.jvp_input(x, Image(6, 6, 3))) == 0.0);
}

TEST_CASE("backbones reject mis-shaped inputs") {
  LinearSmoother f(6, 6, 3);
  CHECK_THROWS_AS(f.forward(Image(6, 5, 3)), Error);
  CHECK_THROWS_AS(f.forward(Image(6, 6, 1)), Error);
  CHECK_THROWS_AS(f.vjp_input(Image(6, 6, 3), Image(6, 6, 2)), Error);
  CHECK_THROWS_AS(LinearSmoother(6, 6, 3, {-1}), Error);
  CHECK_THROWS_AS(LinearSmoother(6, 6, 3, {1, {1.0, 2.0}}), Error);
}

TEST_CASE("oracle with zero gain returns the corrupted normals") {
  const NormalMap gt = testing::random_normals(10, 12, 1);
  const Image anchor = random_image(10, 12, 3, 2);
  CorruptedOracle f(gt, anchor, oracle_spec(0.0));
  const NormalMap expected = corrupt(gt, oracle_spec(0.0).corruption);
  CHECK(f.forward(random_image(10, 12, 3, 3)) == expected);
  CHECK(f.corrupted() == expected);
  CHECK(testing::max_abs(f.vjp_input(anchor, random_image(10, 12, 3, 4, -1, 1))) == 0.0);
  CHECK(testing::max_abs(f.jvp_input(anchor, random_image(10, 12, 3, 4, -1, 1))) == 0.0);
}

TEST_CASE("oracle reproduces the corruption at its anchor") {
  const NormalMap gt = testing::random_normals(10, 12, 1);
  const Image anchor = random_image(10, 12, 3, 2);
  CorruptedOracle f(gt, anchor, oracle_spec(50.0));
  CHECK(testing::max_abs_diff(f.forward(anchor), f.corrupted()) < 1e-15);
}

TEST_CASE("oracle derivatives") {
  for (int ch : {1, 3}) {
    const NormalMap gt = testing::random_normals(8, 8, 1);
    const Image anchor = random_image(8, 8, ch, 2);
    CorruptedOracle f(gt, anchor, oracle_spec(3.0));
    const Image x = random_image(8, 8, ch, 3);
    CHECK(norm_error(f.forward(x)) < 1e-12);
    CHECK(f.forward(x) == f.forward(x));
    CHECK(adjoint_gap(f, x, 10) < 1e-6);
    const Image cot = random_image(8, 8, 3, 11, -1, 1);
    CHECK(testing::max_rel_error(f.vjp_input(x, cot), finite_difference_vjp(f, x, cot, 1e-6), 1e-3) < 1e-5);
  }
}

TEST_CASE("oracle taps reach distant pixels") {
  const int h = 32, w = 32;
  const NormalMap gt = testing::random_normals(h, w, 1);
  CorruptedOracleSpec spec = oracle_spec(10.0);
  spec.density = 0.01;
  CorruptedOracle f(gt, Image(h, w, 3, 0.5), spec);
  CHECK(f.taps_per_pixel() == 10);
  Image tangent(h, w, 3);
  tangent(0, 0, 0) = 1.0;
  const Image out = f.jvp_input(Image(h, w, 3, 0.5), tangent);
  int reached = 0;
  for (std::size_t p = 1; p < out.pixels(); ++p) {
    if (out[3 * p] != 0.0 || out[3 * p + 1] != 0.0 || out[3 * p + 2] != 0.0) ++reached;
  }
  CHECK(reached >= 3);
  CHECK_THROWS_AS(CorruptedOracle(gt, Image(h, w - 1, 3), spec), Error);
  spec.density = 1.5;
  CHECK_THROWS_AS(CorruptedOracle(gt, Image(h, w, 3), spec), Error);
}

TEST_CASE("blurred oracle on the sphere has the pinned corruption level") {
  const Scene s = generate(config::preset("sphere"));
  CorruptedOracleSpec spec;
  spec.corruption.stages = {BlurCorruption{12.0}};
  spec.gain = 100.0;
  CorruptedOracle f(s.gt, s.stokes.s0, spec);
  const double mae = mean_angular_error(f.forward(s.stokes.s0), s.gt, s.mask);
  CHECK(mae == doctest::Approx(15.4525).epsilon(1e-4));
}

TEST_CASE("finite-difference VJP refuses large inputs") {
  LinearSmoother f(65, 64, 1);
  const Image x(65, 64, 1);
  try {
    finite_difference_vjp(f, x, Image(65, 64, 3));
    FAIL("expected a refusal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCapability);
  }
  LinearSmoother g(4, 4, 1);
  CHECK_NOTHROW(finite_difference_vjp(g, Image(4, 4, 1), Image(4, 4, 3)));
}
