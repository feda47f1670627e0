#include "polarguide/image.hpp"

#include <algorithm>
#include <cmath>

#include "polarguide/error.hpp"

namespace polarguide {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    fail(ErrorKind::kShape, "negative image dimension");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::string Image::shape_string() const {
  return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Image::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Mask::Mask(int height, int width, bool fill)
    : height_(height), width_(width),
      bits_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void require_same_shape(const Image& a, const Image& b, const std::string& what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::kShape, what + ": shape " + b.shape_string() + " does not match " + a.shape_string());
  }
}

void require_shape(const Image& a, int height, int width, int channels, const std::string& what) {
  if (a.height() != height || a.width() != width || a.channels() != channels) {
    fail(ErrorKind::kShape, what + ": expected " + std::to_string(height) + "x" + std::to_string(width) +
                                "x" + std::to_string(channels) + ", got " + a.shape_string());
  }
}

Vec3 normalized(const Vec3& v) {
  const double len = std::sqrt(dot(v, v));
  if (len == 0.0) return {0.0, 0.0, 1.0};
  return {v[0] / len, v[1] / len, v[2] / len};
}

NormalMap normalize_normals(const Image& raw) {
  if (raw.channels() != 3) fail(ErrorKind::kShape, "normal map must have 3 channels, got " + raw.shape_string());
  NormalMap out(raw.height(), raw.width(), 3);
  for (std::size_t i = 0; i < raw.pixels(); ++i) {
    const Vec3 n = normalized({raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]});
    out[3 * i] = n[0];
    out[3 * i + 1] = n[1];
    out[3 * i + 2] = n[2];
  }
  return out;
}

}  // namespace polarguide
