#include <cmath>

#include "doctest.h"
#include "polarguide/config.hpp"
#include "polarguide/error.hpp"
#include "polarguide/guidance.hpp"
#include "polarguide/metrics.hpp"
#include "polarguide/parallel.hpp"
#include "support.hpp"

using namespace polarguide;

namespace {

SceneSpec sphere64() {
  SceneSpec spec = config::preset("sphere");
  spec.height = 64;
  spec.width = 64;
  spec.geometry = SphereGeometry{24.0, 31.5, 31.5};
  spec.specular = SpecularLobe{25.0, 22.0, 5.0, 0.2};
  return spec;
}

StokesMap one_pixel(double s0, double s1, double s2) {
  return {Image(1, 1, 1, s0), Image(1, 1, 1, s1), Image(1, 1, 1, s2)};
}

double norm_error(const NormalMap& n) {
  double m = 0.0;
  for (std::size_t p = 0; p < n.pixels(); ++p) {
    const double len = std::sqrt(n[3 * p] * n[3 * p] + n[3 * p + 1] * n[3 * p + 1] + n[3 * p + 2] * n[3 * p + 2]);
    m = std::max(m, std::abs(len - 1.0));
  }
  return m;
}

// A backbone that fails on its n-th forward call.
class FailingBackbone : public LinearSmoother {
 public:
  FailingBackbone(int h, int w, int c, int fail_at) : LinearSmoother(h, w, c), fail_at_(fail_at) {}
  NormalMap forward(const Image& x) override {
    if (calls_++ == fail_at_) fail(ErrorKind::kBridge, "connection lost");
    return LinearSmoother::forward(x);
  }

 private:
  int fail_at_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("adam single step") {
  Image p(1, 1, 1, 0.0);
  AdamMoments m;
  adam_step(p, Image(1, 1, 1, 1.0), m, 0.01, {}, 1);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(m.m[0] == doctest::Approx(0.1));
  CHECK(m.v[0] == doctest::Approx(0.001));
}

TEST_CASE("adam two identical steps move about lr each") {
  Image p(1, 1, 1, 0.0);
  AdamMoments m;
  adam_step(p, Image(1, 1, 1, 1.0), m, 0.01, {}, 1);
  const double first = p[0];
  adam_step(p, Image(1, 1, 1, 1.0), m, 0.01, {}, 2);
  CHECK(p[0] - first == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient leaves the parameter and decays moments") {
  Image p(1, 1, 1, 0.3);
  AdamMoments m{Image(1, 1, 1, 0.5), Image(1, 1, 1, 0.2)};
  adam_step(p, Image(1, 1, 1, 0.0), m, 0.01, {}, 3);
  CHECK(m.m[0] == doctest::Approx(0.45));
  CHECK(m.v[0] == doctest::Approx(0.1998));
  CHECK(p[0] < 0.3);  // the decayed first moment still moves the parameter
  Image q(1, 1, 1, 0.3);
  AdamMoments fresh;
  adam_step(q, Image(1, 1, 1, 0.0), fresh, 0.01, {}, 1);
  CHECK(q[0] == 0.3);
  CHECK(fresh.m[0] == 0.0);
  CHECK_THROWS_AS(adam_step(q, Image(1, 1, 1, 0.0), fresh, 0.01, {}, 0), Error);
  CHECK_THROWS_AS(adam_step(q, Image(1, 2, 1, 0.0), fresh, 0.01, {}, 1), Error);
}

TEST_CASE("polarization loss") {
  const StokesMap obs = one_pixel(0.5, 0.1, 0.2);
  const ValidityMask all(1, 1, true);

  SUBCASE("identity gives zero") {
    const LossResult r = polarization_loss(obs, obs, all);
    CHECK(r.value == 0.0);
    CHECK(r.cotangent.s1[0] == 0.0);
  }
  SUBCASE("single pixel residuals") {
    const LossResult r = polarization_loss(obs, one_pixel(0.6, -0.1, 0.25), all);
    CHECK(r.value == doctest::Approx(0.35).epsilon(1e-14));
    CHECK(r.cotangent.s0[0] == 1.0);
    CHECK(r.cotangent.s1[0] == -1.0);
    CHECK(r.cotangent.s2[0] == 1.0);
  }
  SUBCASE("masked pixels contribute nothing") {
    StokesMap o{Image(1, 2, 1, 0.5), Image(1, 2, 1, 0.1), Image(1, 2, 1, 0.0)};
    StokesMap pr = o;
    pr.s1[1] = 0.9;
    ValidityMask m(1, 2, true);
    m.set(0, 1, false);
    const LossResult r = polarization_loss(o, pr, m);
    CHECK(r.value == 0.0);
    CHECK(r.cotangent.s1[1] == 0.0);
  }
  SUBCASE("empty mask is an error") {
    try {
      polarization_loss(obs, obs, ValidityMask(1, 1, false));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDomain);
      CHECK(std::string(e.what()) == "no valid pixels");
    }
  }
  SUBCASE("shape mismatch is an error") {
    CHECK_THROWS_AS(polarization_loss(obs, one_pixel(0.5, 0.1, 0.2), ValidityMask(2, 1, true)), Error);
  }
}

TEST_CASE("loss is independent of the thread count") {
  const StokesMap a{testing::random_image(50, 40, 3, 1), testing::random_image(50, 40, 3, 2, -0.1, 0.1),
                    testing::random_image(50, 40, 3, 3, -0.1, 0.1)};
  const StokesMap b{a.s0, testing::random_image(50, 40, 3, 4, -0.1, 0.1), testing::random_image(50, 40, 3, 5, -0.1, 0.1)};
  const ValidityMask m(50, 40, true);
  set_thread_count(1);
  const double one = polarization_loss(a, b, m).value;
  set_thread_count(4);
  const double four = polarization_loss(a, b, m).value;
  set_thread_count(0);
  CHECK(one == four);
}

TEST_CASE("configuration invariants") {
  GuidanceConfig cfg;
  CHECK_NOTHROW(check_config(cfg));
  auto expect_config_error = [](const GuidanceConfig& c) {
    try {
      check_config(c);
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
    }
  };
  GuidanceConfig c = cfg;
  c.on_activation_step = 101;
  expect_config_error(c);
  c = cfg;
  c.on_activation_step = -1;
  expect_config_error(c);
  c = cfg;
  c.lr_ox = 0.0;
  expect_config_error(c);
  c = cfg;
  c.steps = 0;
  expect_config_error(c);
  c.on_activation_step = 0;
  CHECK_NOTHROW(check_config(c));
  c = cfg;
  c.adam.beta1 = 1.0;
  expect_config_error(c);
}

TEST_CASE("refine") {
  const Scene scene = generate(sphere64());
  const Image& x = scene.stokes.s0;
  CorruptedOracleSpec ospec;
  ospec.corruption.stages = {BlurCorruption{6.0}};
  ospec.gain = 100.0;
  CorruptedOracle oracle(scene.gt, x, ospec);
  GuidanceConfig cfg;

  SUBCASE("zero steps is a passthrough") {
    cfg.steps = 0;
    cfg.on_activation_step = 0;
    LinearSmoother smoother(64, 64, 3);
    const RefineResult r = refine(scene.stokes, smoother, cfg);
    CHECK(r.normals == normalize_normals(smoother.forward(x)));
    CHECK(testing::max_abs(r.state.l_s) == 0.0);
    CHECK(r.split.l_d == x);
    CHECK(r.trace.entries.size() == 1);
  }
  SUBCASE("step-0 loss is the diffuse-only baseline") {
    cfg.steps = 3;
    cfg.on_activation_step = 1;
    const RefineResult r = refine(scene.stokes, oracle, cfg, &scene.gt);
    const StokesMap base = render_stokes(oracle.corrupted(), Image(64, 64, 3), x,
                                         view_field(cfg.camera, 64, 64), cfg.material);
    CHECK(r.trace.entries[0].loss ==
          doctest::Approx(polarization_loss(scene.stokes, base, scene.mask).value).epsilon(1e-12));
    CHECK(r.trace.entries.size() == 4);
  }
  SUBCASE("normal offset stays zero before activation") {
    cfg.steps = 50;
    cfg.on_activation_step = 50;
    const RefineResult r = refine(scene.stokes, oracle, cfg);
    for (double v : r.state.o_n.data()) REQUIRE(v == 0.0);
    CHECK(testing::max_abs(r.state.o_x) > 0.0);
    CHECK(testing::max_abs(r.state.l_s) > 0.0);
  }
  SUBCASE("default run: bounds, unit normals, improvement, determinism") {
    const RefineResult r = refine(scene.stokes, oracle, cfg, &scene.gt);
    REQUIRE(r.trace.entries.size() == 101);
    CHECK(testing::max_abs(r.state.o_n) > 0.0);
    for (std::size_t i = 0; i < r.state.l_s.size(); ++i) {
      REQUIRE(r.state.l_s[i] >= 0.0);
      REQUIRE(r.state.l_s[i] <= x[i]);
    }
    CHECK(norm_error(r.normals) < 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(r.split.l_d[i] + r.split.l_s[i] == x[i]);
    const double first = *r.trace.entries.front().mae;
    const double last = *r.trace.entries.back().mae;
    CHECK(first == doctest::Approx(15.4317).epsilon(1e-4));
    CHECK(last == doctest::Approx(5.2018).epsilon(1e-3));
    CHECK(first > last);
    CHECK(r.trace.entries.back().loss < r.trace.entries.front().loss);
    const RefineResult again = refine(scene.stokes, oracle, cfg, &scene.gt);
    CHECK(again.normals == r.normals);
    for (std::size_t t = 0; t < r.trace.entries.size(); ++t) {
      REQUIRE(again.trace.entries[t].loss == r.trace.entries[t].loss);
      REQUIRE(*again.trace.entries[t].mae == *r.trace.entries[t].mae);
    }
  }
  SUBCASE("uncorrupted backbone stays close to the truth") {
    CorruptedOracle perfect(scene.gt, x, CorruptedOracleSpec{});
    const RefineResult r = refine(scene.stokes, perfect, cfg, &scene.gt);
    CHECK(*r.trace.entries.front().mae < 1e-6);
    CHECK(*r.trace.entries.back().mae == doctest::Approx(0.2192).epsilon(1e-3));
    // L1 with constant-rate Adam settles on a floor set by the step sizes.
    const double ratio = r.trace.entries.back().loss / r.trace.entries.front().loss;
    CHECK(ratio == doctest::Approx(0.0499).epsilon(1e-2));
  }
}

TEST_CASE("decoupled oracle fits normals directly on a diffuse scene") {
  SceneSpec spec = sphere64();
  spec.specular = SpecularNone{};
  const Scene scene = generate(spec);
  CorruptedOracleSpec s;
  s.corruption.stages = {BlurCorruption{2.0}};
  CorruptedOracle decoupled(scene.gt, scene.stokes.s0, s);
  GuidanceConfig cfg;
  cfg.steps = 400;
  cfg.on_activation_step = 0;
  const RefineResult r = refine(scene.stokes, decoupled, cfg, &scene.gt);
  CHECK(*r.trace.entries.front().mae > 5.0);
  CHECK(*r.trace.entries.back().mae < 1.0);
}

TEST_CASE("refine failures") {
  const Scene scene = generate(sphere64());
  GuidanceConfig cfg;
  cfg.steps = 10;
  cfg.on_activation_step = 5;

  SUBCASE("backbone failure carries the partial trace") {
    FailingBackbone f(64, 64, 3, 3);
    try {
      refine(scene.stokes, f, cfg);
      FAIL("expected a guidance error");
    } catch (const GuidanceError& e) {
      CHECK(e.kind() == ErrorKind::kBridge);
      CHECK(e.partial_trace().entries.size() == 3);
      CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    }
  }
  SUBCASE("shape mismatch") {
    LinearSmoother f(64, 63, 3);
    CHECK_THROWS_AS(refine(scene.stokes, f, cfg), Error);
  }
  SUBCASE("non-finite observations") {
    StokesMap bad = scene.stokes;
    bad.s1(3, 3, 0) = std::nan("");
    LinearSmoother f(64, 64, 3);
    try {
      refine(bad, f, cfg);
      FAIL("expected a domain error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDomain);
    }
  }
  SUBCASE("nothing valid") {
    StokesMap dark = scene.stokes;
    dark.s0.fill(0.0);
    LinearSmoother f(64, 64, 3);
    CHECK_THROWS_AS(refine(dark, f, cfg), Error);
  }
}
