#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "polarguide/analysis.hpp"
#include "polarguide/config.hpp"
#include "polarguide/error.hpp"
#include "support.hpp"

using namespace polarguide;

namespace {

// Smoother that only offers the forward pass.
class ForwardOnly : public LinearSmoother {
 public:
  ForwardOnly(int h, int w, int c) : LinearSmoother(h, w, c, {1}) {
    info_ = LinearSmoother::info();
    info_.has_jvp = false;
  }
  const BackboneInfo& info() const override { return info_; }

 private:
  BackboneInfo info_;
};

// Closed-form sensitivity of the smoother: the input pixel p feeds output q
// through kernel_weight(q, p) * M, then the normalization Jacobian.
Image smoother_sensitivity(const LinearSmoother& f, const Image& x, int row, int col) {
  const Image raw = f.raw(x);
  const int ch = x.channels();
  Image out(x.height(), x.width(), 1);
  for (int qy = 0; qy < x.height(); ++qy) {
    for (int qx = 0; qx < x.width(); ++qx) {
      const double k = f.kernel_weight(qy, qx, row, col);
      const double* r = raw.pixel(qy, qx);
      const double len = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
      double sq = 0.0;
      for (int c = 0; c < ch; ++c) {
        double d[3], dn = 0.0;
        for (int o = 0; o < 3; ++o) {
          d[o] = k * f.mixing(o, c);
          dn += d[o] * r[o] / len;
        }
        for (int o = 0; o < 3; ++o) {
          const double j = (d[o] - dn * r[o] / len) / len;
          sq += j * j;
        }
      }
      out(qy, qx, 0) = std::sqrt(sq);
    }
  }
  return out;
}

SceneSpec sphere32() {
  SceneSpec spec = config::preset("sphere");
  spec.height = 32;
  spec.width = 32;
  spec.geometry = SphereGeometry{12.0, 15.5, 15.5};
  spec.specular = SpecularLobe{13.0, 11.0, 3.0, 0.2};
  return spec;
}

}  // namespace

TEST_CASE("smoother sensitivity matches the closed form") {
  for (int ch : {1, 3}) {
    LinearSmoother f(20, 18, ch, {3});
    const Image x = testing::random_image(20, 18, ch, 1);
    for (auto [row, col] : {std::pair{0, 0}, std::pair{10, 9}, std::pair{19, 17}}) {
      const Image s = sensitivity_map(f, x, row, col);
      CHECK(testing::max_abs_diff(s, smoother_sensitivity(f, x, row, col)) < 1e-15);
      CHECK(s(row, col, 0) > 0.0);
      CHECK(s(0, 17, 0) * s(19, 0, 0) == 0.0);
    }
  }
}

TEST_CASE("sensitivity agrees with the adjoint") {
  const NormalMap gt = testing::random_normals(16, 16, 2);
  CorruptedOracleSpec spec;
  spec.gain = 20.0;
  spec.density = 0.05;
  CorruptedOracle f(gt, testing::random_image(16, 16, 3, 3), spec);
  const Image x = testing::random_image(16, 16, 3, 4);
  const int row = 5, col = 7;
  const Image s = sensitivity_map(f, x, row, col);
  for (auto [qy, qx] : {std::pair{0, 0}, std::pair{5, 7}, std::pair{12, 3}, std::pair{15, 15}}) {
    double sq = 0.0;
    for (int o = 0; o < 3; ++o) {
      Image u(16, 16, 3);
      u(qy, qx, o) = 1.0;
      const Image g = f.vjp_input(x, u);
      for (int c = 0; c < 3; ++c) sq += g(row, col, c) * g(row, col, c);
    }
    CHECK(s(qy, qx, 0) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
  }
}

TEST_CASE("decoupled oracle has no sensitivity") {
  const NormalMap gt = testing::random_normals(8, 8, 2);
  CorruptedOracle f(gt, Image(8, 8, 3), CorruptedOracleSpec{});
  CHECK(testing::max_abs(sensitivity_map(f, Image(8, 8, 3, 0.3), 4, 4, true)) == 0.0);
}

TEST_CASE("percentile normalization") {
  LinearSmoother f(30, 30, 3, {4});
  const Image x = testing::random_image(30, 30, 3, 5);
  const Image raw = sensitivity_map(f, x, 12, 12);
  const Image norm = sensitivity_map(f, x, 12, 12, true);
  std::vector<double> v(raw.data().begin(), raw.data().end());
  std::sort(v.begin(), v.end());
  const double p99 = v[static_cast<std::size_t>(std::ceil(0.99 * v.size())) - 1];
  REQUIRE(p99 > 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) REQUIRE(norm[i] == raw[i] / p99);
}

TEST_CASE("sensitivity without a JVP") {
  ForwardOnly f(12, 12, 3);
  LinearSmoother g(12, 12, 3, {1});
  const Image x = testing::random_image(12, 12, 3, 6);
  CHECK(testing::max_abs_diff(sensitivity_map(f, x, 3, 3), sensitivity_map(g, x, 3, 3)) < 1e-8);
  ForwardOnly big(65, 64, 1);
  try {
    sensitivity_map(big, Image(65, 64, 1), 0, 0);
    FAIL("expected a refusal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCapability);
  }
  CHECK_THROWS_AS(sensitivity_map(g, x, 12, 0), Error);
  CHECK_THROWS_AS(sensitivity_map(g, x, 0, -1), Error);
}

TEST_CASE("noise sweep with a decoupled oracle keeps the unguided error fixed") {
  const Scene scene = generate(sphere32());
  CorruptedOracleSpec spec;
  spec.corruption.stages = {BlurCorruption{3.0}};
  GuidanceConfig cfg;
  cfg.steps = 6;
  cfg.on_activation_step = 3;
  const SweepTable t = noise_sweep(scene, oracle_factory(spec), cfg, {0.0, 0.02, 0.05}, 1);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.parameter == "sigma");
  CHECK(t.rows[0].label == "sigma=0");
  CHECK(t.rows[2].label == "sigma=0.05");
  CHECK(t.rows[1].value == 0.02);
  CHECK(t.rows[0].mae_unguided == t.rows[1].mae_unguided);
  CHECK(t.rows[0].mae_unguided == t.rows[2].mae_unguided);
  const SweepTable again = noise_sweep(scene, oracle_factory(spec), cfg, {0.0, 0.02, 0.05}, 1);
  CHECK(again.rows[2].mae_guided == t.rows[2].mae_guided);
}

TEST_CASE("coupled oracle sees capture noise") {
  const Scene scene = generate(sphere32());
  CorruptedOracleSpec spec;
  spec.corruption.stages = {BlurCorruption{3.0}};
  spec.gain = 100.0;
  GuidanceConfig cfg;
  cfg.steps = 2;
  cfg.on_activation_step = 1;
  const SweepTable t = noise_sweep(scene, oracle_factory(spec), cfg, {0.0, 0.05}, 1);
  CHECK(t.rows[1].mae_unguided > t.rows[0].mae_unguided);
}

TEST_CASE("eta sweep favors the matched index") {
  SceneSpec spec = sphere32();
  spec.height = spec.width = 64;
  spec.geometry = SphereGeometry{24.0, 31.5, 31.5};
  spec.specular = SpecularLobe{25.0, 22.0, 5.0, 0.2};
  const Scene scene = generate(spec);
  CorruptedOracleSpec o;
  o.corruption.stages = {BlurCorruption{6.0}};
  o.gain = 100.0;
  const SweepTable t = eta_sweep(scene, oracle_factory(o), GuidanceConfig{}, {1.3, 1.5, 3.2});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[1].label == "eta=1.5");
  CHECK(t.rows[1].mae_guided < t.rows[0].mae_guided);
  CHECK(t.rows[1].mae_guided < t.rows[2].mae_guided);
  CHECK(t.rows[0].mae_unguided == t.rows[2].mae_unguided);
}

TEST_CASE("ablation variants") {
  const Scene scene = generate(sphere32());
  CorruptedOracleSpec o;
  o.corruption.stages = {BlurCorruption{3.0}};
  o.gain = 100.0;
  const SweepTable t = variant_ablation(scene, oracle_factory(o), GuidanceConfig{});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].label == "none");
  CHECK(t.rows[1].label == "image");
  CHECK(t.rows[2].label == "joint");
  CHECK(t.rows[0].mae_guided == doctest::Approx(t.rows[0].mae_unguided).epsilon(1e-12));
  CHECK(t.rows[2].mae_guided <= t.rows[1].mae_guided);
  CHECK(t.rows[1].mae_guided <= t.rows[0].mae_guided);
}

TEST_CASE("material presets share the geometry") {
  const auto presets = material_presets(sphere32());
  REQUIRE(presets.size() == 3);
  CHECK(presets[0].first == "diffuse");
  CHECK(presets[1].first == "specular");
  CHECK(presets[2].first == "mixed");
  for (const auto& [name, spec] : presets) {
    CHECK(spec.height == 32);
    CHECK_NOTHROW(generate(spec));
  }
  CHECK(std::holds_alternative<SpecularNone>(presets[0].second.specular));
}
