#include "polarguide/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "polarguide/error.hpp"

namespace polarguide {

double angle_between_deg(const double* a, const double* b) {
  const double cx = a[1] * b[2] - a[2] * b[1];
  const double cy = a[2] * b[0] - a[0] * b[2];
  const double cz = a[0] * b[1] - a[1] * b[0];
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::atan2(cross, d) * 180.0 / std::numbers::pi;
}

Image angular_error_map(const NormalMap& pred, const NormalMap& gt, const Mask& mask) {
  require_shape(pred, pred.height(), pred.width(), 3, "predicted normals");
  require_same_shape(pred, gt, "ground-truth normals");
  if (mask.height() != pred.height() || mask.width() != pred.width()) {
    fail(ErrorKind::kShape, "mask does not match the normal maps");
  }
  Image err(pred.height(), pred.width(), 1, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    if (mask[i]) err[i] = angle_between_deg(&pred[3 * i], &gt[3 * i]);
  }
  return err;
}

NormalMetrics summarize(std::span<const double> errors) {
  if (errors.empty()) fail(ErrorKind::kDomain, "no valid pixels to summarize");
  NormalMetrics m;
  m.n_valid = errors.size();
  double sum = 0.0;
  double sq = 0.0;
  std::size_t below[3] = {0, 0, 0};
  for (double e : errors) {
    sum += e;
    sq += e * e;
    below[0] += e < 11.25;
    below[1] += e < 22.5;
    below[2] += e < 30.0;
  }
  const double n = static_cast<double>(errors.size());
  m.mean = sum / n;
  m.rmse = std::sqrt(sq / n);
  m.acc_1125 = below[0] / n;
  m.acc_225 = below[1] / n;
  m.acc_30 = below[2] / n;
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  m.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return m;
}

NormalMetrics summarize(const Image& errors, const Mask& mask) {
  if (mask.height() != errors.height() || mask.width() != errors.width() || errors.channels() != 1) {
    fail(ErrorKind::kShape, "error map " + errors.shape_string() + " does not match the mask");
  }
  std::vector<double> values;
  values.reserve(mask.count());
  for (std::size_t i = 0; i < errors.pixels(); ++i) {
    if (mask[i]) values.push_back(errors[i]);
  }
  return summarize(values);
}

NormalMetrics evaluate(const NormalMap& pred, const NormalMap& gt, const Mask& mask) {
  return summarize(angular_error_map(pred, gt, mask), mask);
}

double mean_angular_error(const NormalMap& pred, const NormalMap& gt, const Mask& mask) {
  return evaluate(pred, gt, mask).mean;
}

}  // namespace polarguide
