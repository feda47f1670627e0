#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polarguide {

// Dense H x W x C grid of doubles, row-major, channel-last.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Pointer to the C values of pixel (y, x).
  double* pixel(int y, int x) { return data_.data() + index(y, x, 0); }
  const double* pixel(int y, int x) const { return data_.data() + index(y, x, 0); }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool same_extent(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }
  std::string shape_string() const;

  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Per-pixel unit 3-vectors in camera coordinates: x right, y up, z toward
// the camera.
using NormalMap = Image;

// H x W boolean grid.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return bits_.size(); }

  bool operator()(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Throws kShape naming `what` unless a and b share H, W and C.
void require_same_shape(const Image& a, const Image& b, const std::string& what);
// Throws kShape unless a is H x W x channels.
void require_shape(const Image& a, int height, int width, int channels, const std::string& what);

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& v);

// Per-pixel normalization of a 3-channel grid; zero vectors map to (0,0,1).
NormalMap normalize_normals(const Image& raw);

}  // namespace polarguide
