#pragma once

#include <limits>

#include "otfwi/field.hpp"

namespace otfwi {

inline constexpr double kPsnrCap = 99.0;

struct MetricsRecord {
  double e_l2 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// ‖truth - rec‖₂ / ‖truth‖₂
double rel_l2_error(const Field2D& rec, const Field2D& truth);

/// 10 log10(range² / MSE), capped at kPsnrCap. A NaN range means
/// max(truth) - min(truth).
double psnr(const Field2D& rec, const Field2D& truth, double data_range = std::numeric_limits<double>::quiet_NaN());

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = std::numeric_limits<double>::quiet_NaN();
};

/// Mean SSIM over every window position fully inside the field
/// (Gaussian-weighted local statistics, no sample-size correction).
double ssim(const Field2D& rec, const Field2D& truth, const SsimOptions& options = {});

/// All three metrics; PSNR and SSIM are NaN for a constant truth. The SSIM window shrinks to the largest odd size
/// that fits when the field is smaller than 11 nodes.
MetricsRecord compute_metrics(const Field2D& rec, const Field2D& truth);

}  // namespace otfwi
