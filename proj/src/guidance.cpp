#include "polarguide/guidance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "polarguide/metrics.hpp"
#include "polarguide/parallel.hpp"

namespace polarguide {

void adam_step(Image& param, const Image& grad, AdamMoments& moments, double lr, const AdamParams& adam, int t) {
  require_same_shape(param, grad, "adam gradient");
  if (t < 1) fail(ErrorKind::kDomain, "adam step counter must be >= 1");
  if (moments.m.empty()) {
    moments.m = Image(param.height(), param.width(), param.channels());
    moments.v = Image(param.height(), param.width(), param.channels());
  }
  require_same_shape(param, moments.m, "adam first moment");
  require_same_shape(param, moments.v, "adam second moment");
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = adam.beta1 * moments.m[i] + (1.0 - adam.beta1) * g;
    moments.v[i] = adam.beta2 * moments.v[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
}

void check_config(const GuidanceConfig& cfg) {
  if (cfg.steps < 0) fail(ErrorKind::kConfig, "steps must be non-negative");
  if (cfg.on_activation_step < 0 || cfg.on_activation_step > cfg.steps) {
    fail(ErrorKind::kConfig, "activation step must lie in [0, steps]");
  }
  if (!(cfg.lr_ls > 0.0) || !(cfg.lr_ox > 0.0) || !(cfg.lr_on > 0.0) || !std::isfinite(cfg.lr_ls) ||
      !std::isfinite(cfg.lr_ox) || !std::isfinite(cfg.lr_on)) {
    fail(ErrorKind::kConfig, "learning rates must be positive and finite");
  }
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0) || !(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0) ||
      !(cfg.adam.eps > 0.0)) {
    fail(ErrorKind::kConfig, "adam betas must lie in [0, 1) and eps must be positive");
  }
  if (!(cfg.input_min < cfg.input_max)) fail(ErrorKind::kConfig, "input clamp range is empty");
  check_material(cfg.material);
}

LossResult polarization_loss(const StokesMap& observed, const StokesMap& predicted, const ValidityMask& mask) {
  check_stokes(observed);
  check_stokes(predicted);
  require_same_shape(observed.s0, predicted.s0, "predicted stokes");
  if (mask.height() != observed.height() || mask.width() != observed.width()) {
    fail(ErrorKind::kShape, "validity mask does not match the stokes map");
  }
  if (mask.count() == 0) fail(ErrorKind::kDomain, "no valid pixels");
  const int h = observed.height();
  const int w = observed.width();
  const int ch = observed.channels();
  LossResult out;
  out.cotangent = {Image(h, w, ch), Image(h, w, ch), Image(h, w, ch)};
  std::vector<double> row_sums(h, 0.0);
  const Image* obs[3] = {&observed.s0, &observed.s1, &observed.s2};
  const Image* pred[3] = {&predicted.s0, &predicted.s1, &predicted.s2};
  Image* cot[3] = {&out.cotangent.s0, &out.cotangent.s1, &out.cotangent.s2};
  parallel_for(0, h, [&](int y) {
    double acc = 0.0;
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < ch; ++k) {
          const double r = (*pred[i])(y, x, k) - (*obs[i])(y, x, k);
          acc += std::abs(r);
          (*cot[i])(y, x, k) = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        }
      }
    }
    row_sums[y] = acc;
  });
  for (double r : row_sums) out.value += r;
  return out;
}

RefineResult refine(const StokesMap& observed, Backbone& backbone, const GuidanceConfig& cfg, const NormalMap* gt,
                    const Image* image) {
  check_config(cfg);
  check_stokes(observed);
  if (!observed.s0.all_finite() || !observed.s1.all_finite() || !observed.s2.all_finite()) {
    fail(ErrorKind::kDomain, "observed stokes contain non-finite values");
  }
  const int h = observed.height();
  const int w = observed.width();
  const int ch = observed.channels();
  const Image& x = image ? *image : observed.s0;
  const BackboneInfo& info = backbone.info();
  if (info.height != h || info.width != w || info.channels != x.channels() || !x.same_extent(observed.s0)) {
    fail(ErrorKind::kShape, "backbone expects " + std::to_string(info.height) + "x" + std::to_string(info.width) +
                                "x" + std::to_string(info.channels) + " but the scene image is " + x.shape_string());
  }
  if (cfg.steps > 0 && !info.has_vjp) fail(ErrorKind::kCapability, "guidance needs a backbone with a VJP");
  if (gt) require_shape(*gt, h, w, 3, "ground-truth normals");

  RefineResult result;
  result.mask = validity_mask(observed);
  if (result.mask.count() == 0) fail(ErrorKind::kDomain, "no valid pixels");
  const ViewField view = view_field(cfg.camera, h, w);

  GuidanceState& st = result.state;
  st.o_x = Image(x.height(), x.width(), x.channels());
  st.o_n = Image(h, w, 3);
  st.l_s = Image(h, w, ch);
  const Image& s0 = observed.s0;
  GuidanceTrace& trace = result.trace;
  const auto start = std::chrono::steady_clock::now();

  Image input(x.height(), x.width(), x.channels());
  for (int t = 0; t <= cfg.steps; ++t) {
    st.step = t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      input[i] = std::clamp(x[i] + st.o_x[i], cfg.input_min, cfg.input_max);
    }
    NormalMap base;
    try {
      base = backbone.forward(input);
    } catch (const Error& e) {
      throw GuidanceError(e.kind(), "backbone forward failed at step " + std::to_string(t) + ": " + e.what(), trace);
    }
    Image raw = base;
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += st.o_n[i];
    const NormalMap n = normalize_normals(raw);
    StokesMap predicted = render_stokes(n, st.l_s, s0, view, cfg.material);
    LossResult loss = polarization_loss(observed, predicted, result.mask);
    if (!std::isfinite(loss.value)) {
      throw GuidanceError(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(t), trace);
    }
    TraceEntry entry;
    entry.step = t;
    entry.loss = loss.value;
    if (gt) entry.mae = mean_angular_error(n, *gt, result.mask);
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.entries.push_back(entry);

    if (t == cfg.steps) {
      result.normals = n;
      result.predicted = std::move(predicted);
      break;
    }

    const RenderGradients g = render_stokes_vjp(n, st.l_s, s0, view, cfg.material, loss.cotangent);
    // Chain through n = raw / |raw|.
    Image grad_raw(h, w, 3);
    for (std::size_t p = 0; p < n.pixels(); ++p) {
      const double* r = &raw[3 * p];
      const double len = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
      if (len == 0.0) continue;
      const double* np = &n[3 * p];
      const double* gp = &g.grad_n[3 * p];
      const double gn = gp[0] * np[0] + gp[1] * np[1] + gp[2] * np[2];
      for (int c = 0; c < 3; ++c) grad_raw[3 * p + c] = (gp[c] - gn * np[c]) / len;
    }
    Image grad_ox;
    try {
      grad_ox = backbone.vjp_input(input, grad_raw);
    } catch (const Error& e) {
      throw GuidanceError(e.kind(), "backbone VJP failed at step " + std::to_string(t) + ": " + e.what(), trace);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i] + st.o_x[i];
      if (v < cfg.input_min || v > cfg.input_max) grad_ox[i] = 0.0;
    }

    adam_step(st.l_s, g.grad_ls, st.m_ls, cfg.lr_ls, cfg.adam, t + 1);
    adam_step(st.o_x, grad_ox, st.m_ox, cfg.lr_ox, cfg.adam, t + 1);
    if (t >= cfg.on_activation_step) {
      adam_step(st.o_n, grad_raw, st.m_on, cfg.lr_on, cfg.adam, t - cfg.on_activation_step + 1);
    }
    for (std::size_t i = 0; i < st.l_s.size(); ++i) st.l_s[i] = std::clamp(st.l_s[i], 0.0, std::max(0.0, s0[i]));
  }

  result.split = split_radiance(s0, st.l_s);
  return result;
}

}  // namespace polarguide
