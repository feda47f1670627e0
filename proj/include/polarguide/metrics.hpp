#pragma once

#include <cstddef>
#include <span>

#include "polarguide/image.hpp"

namespace polarguide {

struct NormalMetrics {
  double mean = 0.0;    // degrees
  double median = 0.0;  // degrees
  double rmse = 0.0;    // degrees
  double acc_1125 = 0.0;
  double acc_225 = 0.0;
  double acc_30 = 0.0;
  std::size_t n_valid = 0;
};

// Per-pixel angle between pred and gt in degrees (H x W x 1). Pixels outside
// the mask hold NaN.
Image angular_error_map(const NormalMap& pred, const NormalMap& gt, const Mask& mask);

// Statistics over masked pixels. Accuracy counts errors strictly below each
// threshold; the median is exact (full sort, mean of the middle pair).
NormalMetrics summarize(const Image& errors, const Mask& mask);
NormalMetrics summarize(std::span<const double> errors);

NormalMetrics evaluate(const NormalMap& pred, const NormalMap& gt, const Mask& mask);
double mean_angular_error(const NormalMap& pred, const NormalMap& gt, const Mask& mask);

// Angle in degrees between two 3-vectors, robust for small angles.
double angle_between_deg(const double* a, const double* b);

}  // namespace polarguide
