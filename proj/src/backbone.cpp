#include "polarguide/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polarguide/error.hpp"

namespace polarguide {
namespace {

// (I - n n^T) g / |raw|: derivative of raw / |raw| applied to g.
inline void project_normalization(const double* raw, const double* g, double* out) {
  const double len = std::sqrt(raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]);
  if (len == 0.0) {
    out[0] = out[1] = out[2] = 0.0;
    return;
  }
  const double n[3] = {raw[0] / len, raw[1] / len, raw[2] / len};
  const double gn = g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
  for (int c = 0; c < 3; ++c) out[c] = (g[c] - gn * n[c]) / len;
}

}  // namespace

void Backbone::check_input(const Image& x) const {
  const BackboneInfo& i = info();
  require_shape(x, i.height, i.width, i.channels, "backbone input");
}

Image finite_difference_vjp(Backbone& f, const Image& x, const Image& cotangent, double step,
                            std::size_t max_pixels) {
  if (x.pixels() > max_pixels) {
    fail(ErrorKind::kCapability, "finite-difference VJP refused: " + x.shape_string() + " exceeds the " +
                                     std::to_string(max_pixels) + "-pixel cap");
  }
  require_shape(cotangent, x.height(), x.width(), 3, "vjp cotangent");
  Image grad(x.height(), x.width(), x.channels());
  Image probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const NormalMap plus = f.forward(probe);
    probe[i] = x[i] - step;
    const NormalMap minus = f.forward(probe);
    probe[i] = x[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < plus.size(); ++j) acc += (plus[j] - minus[j]) * cotangent[j];
    grad[i] = acc / (2.0 * step);
  }
  return grad;
}

Image finite_difference_jvp(Backbone& f, const Image& x, const Image& tangent, double step) {
  require_same_shape(x, tangent, "jvp tangent");
  Image plus_in = x;
  Image minus_in = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus_in[i] += step * tangent[i];
    minus_in[i] -= step * tangent[i];
  }
  const NormalMap plus = f.forward(plus_in);
  const NormalMap minus = f.forward(minus_in);
  Image out(x.height(), x.width(), 3);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (plus[j] - minus[j]) / (2.0 * step);
  return out;
}

// ---------------------------------------------------------------------------
// LinearSmoother

std::vector<double> LinearSmoother::default_mixing(int channels) {
  if (channels == 3) {
    return {0.9, -0.4, 0.2,
            0.3, 0.8, -0.5,
            0.2, 0.3, 0.6};
  }
  if (channels == 1) return {0.6, -0.4, 0.3};
  std::vector<double> m(3 * channels, 0.0);
  for (int c = 0; c < channels; ++c) m[(c % 3) * channels + c] = 1.0;
  return m;
}

LinearSmoother::LinearSmoother(int height, int width, int channels, LinearSmootherSpec spec)
    : radius_(spec.radius), mixing_(std::move(spec.mixing)), bias_(spec.bias) {
  if (height <= 0 || width <= 0 || channels <= 0) fail(ErrorKind::kDomain, "smoother shape must be positive");
  if (radius_ < 0) fail(ErrorKind::kDomain, "smoother radius must be non-negative");
  if (mixing_.empty()) mixing_ = default_mixing(channels);
  if (mixing_.size() != static_cast<std::size_t>(3 * channels)) {
    fail(ErrorKind::kConfig, "smoother mixing matrix must have 3 x " + std::to_string(channels) + " entries");
  }
  info_ = {"smoother", height, width, channels, true, true, true};
}

double LinearSmoother::kernel_weight(int py, int px, int qy, int qx) const {
  if (std::abs(py - qy) > radius_ || std::abs(px - qx) > radius_) return 0.0;
  const int y0 = std::max(0, py - radius_), y1 = std::min(info_.height - 1, py + radius_);
  const int x0 = std::max(0, px - radius_), x1 = std::min(info_.width - 1, px + radius_);
  return 1.0 / ((y1 - y0 + 1) * (x1 - x0 + 1));
}

Image LinearSmoother::box(const Image& x) const {
  const int h = info_.height, w = info_.width, ch = info_.channels;
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius_), y1 = std::min(h - 1, y + radius_);
    for (int xx = 0; xx < w; ++xx) {
      const int x0 = std::max(0, xx - radius_), x1 = std::min(w - 1, xx + radius_);
      const double wgt = 1.0 / ((y1 - y0 + 1) * (x1 - x0 + 1));
      double* o = out.pixel(y, xx);
      for (int qy = y0; qy <= y1; ++qy) {
        for (int qx = x0; qx <= x1; ++qx) {
          const double* in = x.pixel(qy, qx);
          for (int c = 0; c < ch; ++c) o[c] += wgt * in[c];
        }
      }
    }
  }
  return out;
}

Image LinearSmoother::box_adjoint(const Image& g) const {
  const int h = info_.height, w = info_.width, ch = info_.channels;
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius_), y1 = std::min(h - 1, y + radius_);
    for (int xx = 0; xx < w; ++xx) {
      const int x0 = std::max(0, xx - radius_), x1 = std::min(w - 1, xx + radius_);
      const double wgt = 1.0 / ((y1 - y0 + 1) * (x1 - x0 + 1));
      const double* gp = g.pixel(y, xx);
      for (int qy = y0; qy <= y1; ++qy) {
        for (int qx = x0; qx <= x1; ++qx) {
          double* o = out.pixel(qy, qx);
          for (int c = 0; c < ch; ++c) o[c] += wgt * gp[c];
        }
      }
    }
  }
  return out;
}

Image LinearSmoother::raw(const Image& x) const {
  check_input(x);
  const Image smooth = box(x);
  const int ch = info_.channels;
  Image out(info_.height, info_.width, 3);
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int o = 0; o < 3; ++o) {
      double acc = bias_[o];
      for (int c = 0; c < ch; ++c) acc += mixing_[o * ch + c] * smooth[p * ch + c];
      out[3 * p + o] = acc;
    }
  }
  return out;
}

NormalMap LinearSmoother::forward(const Image& x) { return normalize_normals(raw(x)); }

Image LinearSmoother::vjp_input(const Image& x, const Image& cotangent) {
  require_shape(cotangent, info_.height, info_.width, 3, "vjp cotangent");
  const Image r = raw(x);
  const int ch = info_.channels;
  Image head(info_.height, info_.width, ch);
  for (std::size_t p = 0; p < r.pixels(); ++p) {
    double a[3];
    project_normalization(&r[3 * p], &cotangent[3 * p], a);
    for (int c = 0; c < ch; ++c) {
      head[p * ch + c] = mixing_[c] * a[0] + mixing_[ch + c] * a[1] + mixing_[2 * ch + c] * a[2];
    }
  }
  return box_adjoint(head);
}

Image LinearSmoother::jvp_input(const Image& x, const Image& tangent) {
  require_same_shape(x, tangent, "jvp tangent");
  const Image r = raw(x);
  const Image smooth = box(tangent);
  const int ch = info_.channels;
  Image out(info_.height, info_.width, 3);
  for (std::size_t p = 0; p < r.pixels(); ++p) {
    double d[3];
    for (int o = 0; o < 3; ++o) {
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) acc += mixing_[o * ch + c] * smooth[p * ch + c];
      d[o] = acc;
    }
    project_normalization(&r[3 * p], d, &out[3 * p]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CorruptedOracle

CorruptedOracle::CorruptedOracle(const NormalMap& gt, const Image& anchor, CorruptedOracleSpec spec)
    : spec_(std::move(spec)), anchor_(anchor) {
  require_shape(gt, gt.height(), gt.width(), 3, "oracle ground truth");
  if (!anchor.same_extent(gt) || anchor.channels() <= 0) {
    fail(ErrorKind::kShape, "oracle anchor " + anchor.shape_string() + " does not match " + gt.shape_string());
  }
  if (spec_.density < 0.0 || spec_.density > 1.0) fail(ErrorKind::kDomain, "oracle density must lie in [0, 1]");
  const int h = gt.height(), w = gt.width(), ch = anchor.channels();
  info_ = {"oracle", h, w, ch, true, true, true};
  base_ = corrupt(gt, spec_.corruption);

  std::mt19937_64 rng(spec_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t pixels = gt.pixels();
  taps_ = spec_.density > 0.0 ? std::max(1, static_cast<int>(std::lround(spec_.density * pixels))) : 0;
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(pixels - 1));
  const double scale = taps_ > 0 ? spec_.global_weight / std::sqrt(static_cast<double>(taps_)) : 0.0;
  taps_table_.resize(pixels * taps_);
  for (Tap& t : taps_table_) {
    t.source = pick(rng);
    t.weight = scale * normal(rng);
  }

  // Random 3 x C head with orthonormal rows (or columns when C < 3).
  mixing_.assign(3 * ch, 0.0);
  for (double& m : mixing_) m = normal(rng);
  if (ch >= 3) {
    for (int o = 0; o < 3; ++o) {
      double* row = &mixing_[o * ch];
      for (int prev = 0; prev < o; ++prev) {
        const double* pr = &mixing_[prev * ch];
        double d = 0.0;
        for (int c = 0; c < ch; ++c) d += row[c] * pr[c];
        for (int c = 0; c < ch; ++c) row[c] -= d * pr[c];
      }
      double len = 0.0;
      for (int c = 0; c < ch; ++c) len += row[c] * row[c];
      len = std::sqrt(len);
      for (int c = 0; c < ch; ++c) row[c] /= len;
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      double len = 0.0;
      for (int o = 0; o < 3; ++o) len += mixing_[o * ch + c] * mixing_[o * ch + c];
      len = std::sqrt(len);
      for (int o = 0; o < 3; ++o) mixing_[o * ch + c] /= len;
    }
  }
}

Image CorruptedOracle::couple(const Image& d) const {
  const int ch = info_.channels;
  Image u(info_.height, info_.width, ch);
  for (std::size_t p = 0; p < u.pixels(); ++p) {
    double* up = &u[p * ch];
    for (int c = 0; c < ch; ++c) up[c] = spec_.self_weight * d[p * ch + c];
    const Tap* taps = taps_table_.data() + p * taps_;
    for (int k = 0; k < taps_; ++k) {
      const double* src = &d[static_cast<std::size_t>(taps[k].source) * ch];
      for (int c = 0; c < ch; ++c) up[c] += taps[k].weight * src[c];
    }
  }
  return u;
}

Image CorruptedOracle::couple_adjoint(const Image& g) const {
  const int ch = info_.channels;
  Image out(info_.height, info_.width, ch);
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    const double* gp = &g[p * ch];
    double* op = &out[p * ch];
    for (int c = 0; c < ch; ++c) op[c] += spec_.self_weight * gp[c];
    const Tap* taps = taps_table_.data() + p * taps_;
    for (int k = 0; k < taps_; ++k) {
      double* dst = &out[static_cast<std::size_t>(taps[k].source) * ch];
      for (int c = 0; c < ch; ++c) dst[c] += taps[k].weight * gp[c];
    }
  }
  return out;
}

Image CorruptedOracle::raw(const Image& x) const {
  check_input(x);
  Image d = x;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= anchor_[i];
  const Image u = couple(d);
  const int ch = info_.channels;
  Image out = base_;
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int o = 0; o < 3; ++o) {
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) acc += mixing_[o * ch + c] * u[p * ch + c];
      out[3 * p + o] += spec_.gain * acc;
    }
  }
  return out;
}

NormalMap CorruptedOracle::forward(const Image& x) {
  if (spec_.gain == 0.0) {
    check_input(x);
    return base_;
  }
  return normalize_normals(raw(x));
}

Image CorruptedOracle::vjp_input(const Image& x, const Image& cotangent) {
  require_shape(cotangent, info_.height, info_.width, 3, "vjp cotangent");
  check_input(x);
  const int ch = info_.channels;
  if (spec_.gain == 0.0) return Image(info_.height, info_.width, ch);
  const Image r = raw(x);
  Image head(info_.height, info_.width, ch);
  for (std::size_t p = 0; p < r.pixels(); ++p) {
    double a[3];
    project_normalization(&r[3 * p], &cotangent[3 * p], a);
    for (int c = 0; c < ch; ++c) {
      head[p * ch + c] = spec_.gain * (mixing_[c] * a[0] + mixing_[ch + c] * a[1] + mixing_[2 * ch + c] * a[2]);
    }
  }
  return couple_adjoint(head);
}

Image CorruptedOracle::jvp_input(const Image& x, const Image& tangent) {
  require_same_shape(x, tangent, "jvp tangent");
  check_input(x);
  if (spec_.gain == 0.0) return Image(info_.height, info_.width, 3);
  const Image r = raw(x);
  const Image u = couple(tangent);
  const int ch = info_.channels;
  Image out(info_.height, info_.width, 3);
  for (std::size_t p = 0; p < r.pixels(); ++p) {
    double d[3];
    for (int o = 0; o < 3; ++o) {
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) acc += mixing_[o * ch + c] * u[p * ch + c];
      d[o] = spec_.gain * acc;
    }
    project_normalization(&r[3 * p], d, &out[3 * p]);
  }
  return out;
}

}  // namespace polarguide
