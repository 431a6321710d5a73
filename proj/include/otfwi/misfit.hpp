#pragma once

#include <span>
#include <string>
#include <vector>

#include "otfwi/field.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

enum class MisfitKind { mse, ot_raw, ot_enhanced };

/// What to do when a shifted synthetic trace dips below zero.
enum class NegativePolicy { error, clip };

struct MisfitSpec {
  MisfitKind kind = MisfitKind::ot_enhanced;
  double k = 100.0;
  int p = 2;
  int n_quantile = 1000;
  double sigma_weight = 1.0;  // Σ^{-1} as a scalar
  double shift_factor = 1.1;  // c' = shift_factor * |min d̃_obs| per trace
  NegativePolicy negative_policy = NegativePolicy::error;

  void validate() const;
};

/// Spec used by the inversion loops: clip negative shifted synthetics.
MisfitSpec inversion_misfit(MisfitKind kind = MisfitKind::ot_enhanced);

const char* misfit_kind_name(MisfitKind k) noexcept;
MisfitKind parse_misfit_kind(const std::string& s);

struct WeightField {
  Array3D values;
  double k = 0.0;
};

WeightField amplitude_weights(const ShotGather& d_obs, double k);
ShotGather apply_weights(const ShotGather& d, const WeightField& w);

inline constexpr double kDensityEps = 1e-9;

struct TraceDensity {
  std::vector<double> pdf;
  std::vector<double> cdf;
  double dt = 0.0;
  double c_prime = 0.0;
  double eps_prime = kDensityEps;

  double t_end() const noexcept { return dt * static_cast<double>(pdf.size() - 1); }
};

TraceDensity trace_to_density(std::span<const double> trace, double c_prime, double dt);
/// inf{t : F(t) >= xi} by linear interpolation of the discrete CDF on t_k = k*dt.
double quantile(const TraceDensity& density, double xi);
/// Quantiles at xi_j = j/(n-1), j = 0..n-1, in one sweep.
std::vector<double> quantiles(const TraceDensity& density, int n_xi);
double w2_distance(const TraceDensity& a, const TraceDensity& b, int n_xi);
double obs_scale(const std::vector<TraceDensity>& obs, int p, int n_xi = 1000);

double mse_misfit(const ShotGather& d_syn, const ShotGather& d_obs, double sigma_weight);
double ot_objective(const ShotGather& d_syn, const ShotGather& d_obs, const MisfitSpec& spec);
Array3D misfit_trace_gradient(const ShotGather& d_syn, const ShotGather& d_obs, const MisfitSpec& spec);

/// Observation-side quantities (weights, shifts, quantiles, scale) computed
/// once and reused for every synthetic gather.
class MisfitEvaluator {
 public:
  MisfitEvaluator(const ShotGather& d_obs, const MisfitSpec& spec);

  double value(const ShotGather& d_syn) const;
  /// Returns the misfit; writes ∂Φ/∂d_syn into `grad` (resized as needed).
  double value_and_gradient(const ShotGather& d_syn, Array3D& grad) const;

  /// Contribution of shot `s`; the misfit is the sum over shots.
  double shot_value(int s, const TraceArray& syn, TraceArray* grad) const;

  const MisfitSpec& spec() const noexcept { return spec_; }
  /// S_obs for OT_ENHANCED, Σ∫Q_obs² for OT_RAW, 1 for MSE.
  double normalizer() const noexcept { return norm_; }

 private:
  double evaluate(const ShotGather& d_syn, Array3D* grad) const;

  ShotGather obs_;
  MisfitSpec spec_;
  Array3D weights_;                          // empty unless OT_ENHANCED
  std::vector<double> shift_;                // per (s, r)
  std::vector<std::vector<double>> q_obs_;   // per (s, r), n_quantile values
  std::vector<double> xi_weight_;            // trapezoid weights on the ξ grid
  double norm_ = 1.0;
};

}  // namespace otfwi
