#include "otfwi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "otfwi/error.hpp"

namespace otfwi {

namespace {

void require_same(const Field2D& a, const Field2D& b) {
  if (!a.same_shape(b)) throw InvalidArgument("metric inputs differ in shape");
  if (a.size() == 0) throw InvalidArgument("metric inputs are empty");
}

double default_range(const Field2D& truth, double range) {
  if (std::isnan(range)) {
    const auto [lo, hi] = std::ranges::minmax(truth.values());
    range = hi - lo;
  }
  if (!(range > 0.0) || !std::isfinite(range)) throw InvalidArgument("data range must be positive");
  return range;
}

}  // namespace

double rel_l2_error(const Field2D& rec, const Field2D& truth) {
  require_same(rec, truth);
  const double n = norm2(truth);
  if (!(n > 0.0)) throw InvalidArgument("relative error needs a nonzero truth");
  return norm2(truth - rec) / n;
}

double psnr(const Field2D& rec, const Field2D& truth, double data_range) {
  require_same(rec, truth);
  const double range = default_range(truth, data_range);
  double mse = 0.0;
  for (std::size_t j = 0; j < rec.size(); ++j) mse += (rec[j] - truth[j]) * (rec[j] - truth[j]);
  mse /= static_cast<double>(rec.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(range * range / mse));
}

double ssim(const Field2D& rec, const Field2D& truth, const SsimOptions& o) {
  require_same(rec, truth);
  if (o.window < 1 || o.window % 2 == 0) throw InvalidArgument("SSIM window must be odd and positive");
  if (o.window > rec.nx() || o.window > rec.nz()) throw InvalidArgument("SSIM window larger than the field");
  if (!(o.sigma > 0.0)) throw InvalidArgument("SSIM sigma must be positive");
  const double range = default_range(truth, o.data_range);
  const double c1 = (o.k1 * range) * (o.k1 * range), c2 = (o.k2 * range) * (o.k2 * range);

  const int w = o.window, r = w / 2;
  std::vector<double> k1d(w);
  double ksum = 0.0;
  for (int a = 0; a < w; ++a) ksum += (k1d[a] = std::exp(-0.5 * (a - r) * (a - r) / (o.sigma * o.sigma)));
  for (auto& k : k1d) k /= ksum;

  double total = 0.0;
  int count = 0;
  for (int cx = r; cx + r < rec.nx(); ++cx)
    for (int cz = r; cz + r < rec.nz(); ++cz) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b) {
          const double k = k1d[a] * k1d[b];
          const double x = rec(cx - r + a, cz - r + b), y = truth(cx - r + a, cz - r + b);
          mx += k * x;
          my += k * y;
          sxx += k * x * x;
          syy += k * y * y;
          sxy += k * x * y;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

MetricsRecord compute_metrics(const Field2D& rec, const Field2D& truth) {
  MetricsRecord m;
  m.e_l2 = rel_l2_error(rec, truth);
  const auto [lo, hi] = std::ranges::minmax(truth.values());
  if (!(hi > lo)) {
    // constant truth has no data range
    m.psnr = m.ssim = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  m.psnr = psnr(rec, truth);
  SsimOptions o;
  const int fit = std::min({o.window, rec.nx(), rec.nz()});
  o.window = fit % 2 ? fit : fit - 1;
  m.ssim = ssim(rec, truth, o);
  return m;
}

}  // namespace otfwi
