#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "polarguide/image.hpp"
#include "polarguide/synth.hpp"

namespace polarguide {

struct BackboneInfo {
  std::string name;
  int height = 0;
  int width = 0;
  int channels = 0;
  bool has_vjp = false;  // vjp_input is analytic or delegated, not a fallback
  bool has_jvp = false;
  bool is_deterministic = true;
};

// A frozen monocular normal estimator n = f(x). Implementations normalize
// their output per pixel and expose input-side derivatives.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual const BackboneInfo& info() const = 0;

  // H x W x C image -> H x W x 3 unit normals.
  virtual NormalMap forward(const Image& x) = 0;
  // (df/dx)^T cotangent; cotangent is H x W x 3, result is H x W x C.
  virtual Image vjp_input(const Image& x, const Image& cotangent) = 0;
  // (df/dx) tangent; tangent is H x W x C, result is H x W x 3.
  virtual Image jvp_input(const Image& x, const Image& tangent) = 0;

 protected:
  void check_input(const Image& x) const;
};

// Largest input (in pixels) accepted by the finite-difference fallbacks.
inline constexpr std::size_t kFiniteDifferenceCap = 64 * 64;

// Central-difference VJP, one pair of forwards per input element. Test-only;
// refuses inputs above `max_pixels`.
Image finite_difference_vjp(Backbone& f, const Image& x, const Image& cotangent, double step = 1e-4,
                            std::size_t max_pixels = kFiniteDifferenceCap);
// Central-difference JVP along `tangent` (two forwards).
Image finite_difference_jvp(Backbone& f, const Image& x, const Image& tangent, double step = 1e-4);

// n = normalize(bias + M * box(x)): a box filter of the given radius (mean
// over the in-bounds window) followed by a fixed 3 x C affine head.
struct LinearSmootherSpec {
  int radius = 2;
  std::vector<double> mixing;  // 3 x C row-major; empty selects the default head
  Vec3 bias{0.0, 0.0, 1.0};
};

class LinearSmoother : public Backbone {
 public:
  LinearSmoother(int height, int width, int channels, LinearSmootherSpec spec = {});

  const BackboneInfo& info() const override { return info_; }
  NormalMap forward(const Image& x) override;
  Image vjp_input(const Image& x, const Image& cotangent) override;
  Image jvp_input(const Image& x, const Image& tangent) override;

  // Pre-normalization output bias + M box(x).
  Image raw(const Image& x) const;
  // Box-filter weight that input pixel (qy, qx) carries in output pixel (py, px).
  double kernel_weight(int py, int px, int qy, int qx) const;
  double mixing(int out, int in) const { return mixing_[out * info_.channels + in]; }

  static std::vector<double> default_mixing(int channels);

 private:
  Image box(const Image& x) const;
  Image box_adjoint(const Image& g) const;

  BackboneInfo info_;
  int radius_;
  std::vector<double> mixing_;
  Vec3 bias_;
};

struct CorruptedOracleSpec {
  CorruptionSpec corruption;
  double gain = 0.0;          // input coupling strength
  double density = 0.01;      // global taps per output pixel, as a fraction of H * W
  double self_weight = 1.0;   // weight of the output pixel's own input
  double global_weight = 1.0; // RMS of the global tap weights times sqrt(taps)
  std::uint64_t seed = 0;
};

// normalize(corrupt(gt) + gain * M * (a d(p) + sum_k w_k d(q_k))) with
// d = x - anchor. Tap sources q_k are drawn uniformly over the whole image,
// so a single input pixel reaches distant outputs. The anchor is the image
// at which the backbone reproduces corrupt(gt) exactly.
class CorruptedOracle : public Backbone {
 public:
  CorruptedOracle(const NormalMap& gt, const Image& anchor, CorruptedOracleSpec spec);

  const BackboneInfo& info() const override { return info_; }
  NormalMap forward(const Image& x) override;
  Image vjp_input(const Image& x, const Image& cotangent) override;
  Image jvp_input(const Image& x, const Image& tangent) override;

  const NormalMap& corrupted() const { return base_; }
  int taps_per_pixel() const { return taps_; }

 private:
  struct Tap {
    std::uint32_t source;
    double weight;
  };

  Image raw(const Image& x) const;
  // u = a d(p) + sum_k w_k d(q_k), H x W x C.
  Image couple(const Image& d) const;
  Image couple_adjoint(const Image& g) const;

  BackboneInfo info_;
  CorruptedOracleSpec spec_;
  NormalMap base_;
  Image anchor_;
  int taps_ = 0;
  std::vector<Tap> taps_table_;
  std::vector<double> mixing_;  // 3 x C
};

// Backbone served by a child process over the binary frame protocol (see
// bridge_protocol.hpp). Without a delegated VJP the session refuses
// vjp_input unless `allow_fd_fallback` is set.
class BridgeBackbone : public Backbone {
 public:
  struct Options {
    double timeout_seconds = 60.0;
    bool allow_fd_fallback = false;
  };

  BridgeBackbone(const std::string& command, int height, int width, int channels, Options options);
  BridgeBackbone(const std::string& command, int height, int width, int channels)
      : BridgeBackbone(command, height, width, channels, Options{}) {}
  ~BridgeBackbone() override;

  BridgeBackbone(const BridgeBackbone&) = delete;
  BridgeBackbone& operator=(const BridgeBackbone&) = delete;

  const BackboneInfo& info() const override { return info_; }
  NormalMap forward(const Image& x) override;
  Image vjp_input(const Image& x, const Image& cotangent) override;
  Image jvp_input(const Image& x, const Image& tangent) override;

  // Checksums of the last tensor payload sent and received.
  std::uint64_t last_sent_checksum() const { return last_sent_; }
  std::uint64_t last_received_checksum() const { return last_received_; }

 private:
  struct Frame;
  Frame round_trip(std::uint32_t opcode, const std::vector<std::uint8_t>& payload, std::uint32_t expect);
  void write_all(const std::uint8_t* data, std::size_t n);
  void read_all(std::uint8_t* data, std::size_t n);
  void shutdown();

  BackboneInfo info_;
  Options options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::uint64_t last_sent_ = 0;
  std::uint64_t last_received_ = 0;
};

}  // namespace polarguide
