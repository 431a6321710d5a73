#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "otfwi/adjoint.hpp"
#include "otfwi/diffusion.hpp"
#include "otfwi/error.hpp"
#include "otfwi/metrics.hpp"

namespace otfwi {

/// Failure inside a reverse step; `step()` is the diffusion index i.
class SamplerError : public Error {
 public:
  SamplerError(int step, const std::string& what)
      : Error("reverse step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

enum class ChainRule { exact_vjp, scaled_identity };

struct GuidanceConfig {
  double rho0 = 1.0;
  double c = 0.1;
  double tau = 0.0;
  double gamma = 0.0;
  double eps = 1e-4;
  double kappa_max = 1e3;
  /// DPS step: one value for every step, or N values with zeta[i-1] at step i.
  std::vector<double> zeta{1.0};
  MisfitSpec misfit = inversion_misfit();
  ChainRule chain_rule = ChainRule::exact_vjp;
  /// Use the scaled identity instead of failing when the model has no vjp.
  bool vjp_fallback = false;

  void validate(int n_steps) const;
  double zeta_at(int i) const;
};

double tv_indicator(const Field2D& v);
/// ρ₀ exp(-(tv - τ)₊ / c)
double guidance_scale(double tv, const GuidanceConfig& config);
/// κ_j = ((‖g‖∞ + ε) / (|g_j| + ε))^γ clipped to [1, κ_max].
Field2D diag_preconditioner(const Field2D& g, double gamma, double eps, double kappa_max);
/// Same without the clip.
Field2D diag_preconditioner_raw(const Field2D& g, double gamma, double eps);
/// ∇_{x_i} Φ(x̂₀(x_i)) given g = ∇_{x̂₀} Φ.
Field2D guidance_gradient(const Field2D& x_i, int i, const ScoreModel& model, const Field2D& g,
                          const DiffusionSchedule& schedule, ChainRule mode, bool allow_fallback = false);
Field2D ancestral_step(const Field2D& x_i, const Field2D& x0_hat, int i, const DiffusionSchedule& schedule,
                       const Field2D& z);

/// Data potential on the normalized diffusion field.
class Potential {
 public:
  struct Eval {
    double value = 0.0;
    Field2D grad;
  };
  virtual ~Potential() = default;
  virtual Eval evaluate(const Field2D& x) const = 0;
};

/// Wave-equation misfit at the scaler-mapped velocity, clamped to
/// [v_floor, v_ceil]. Clamped nodes get zero gradient.
class WavePotential final : public Potential {
 public:
  WavePotential(MisfitEvaluator misfit, Grid grid, AcquisitionGeometry geometry, SourceWavelet wavelet,
                SolverConfig solver, FieldScaler scaler, double v_floor, double v_ceil);
  Eval evaluate(const Field2D& x) const override;
  VelocityField velocity(const Field2D& x) const;

 private:
  MisfitEvaluator misfit_;
  Grid grid_;
  AcquisitionGeometry geometry_;
  SourceWavelet wavelet_;
  SolverConfig solver_;
  FieldScaler scaler_;
  double v_floor_, v_ceil_;
};

/// Φ(x) = ‖A x - y‖² / (2σ²) with A stored row-major [m × n].
class LinearGaussianPotential final : public Potential {
 public:
  LinearGaussianPotential(std::vector<double> a, int m, int nx, int nz, std::vector<double> y, double sigma);
  Eval evaluate(const Field2D& x) const override;
  /// Conjugate posterior mean for the prior N(mu, s2 I).
  Field2D posterior_mean(const Field2D& mu, double s2) const;

 private:
  std::vector<double> a_;
  int m_, nx_, nz_;
  std::vector<double> y_;
  double sigma_;
};

struct SamplerStep {
  int i = 0;
  double misfit = 0.0;
  double tv = 0.0;
  double rho = 0.0;
  double e_l2 = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
};

struct SamplerTrace {
  std::vector<SamplerStep> steps;
  void write_csv(const std::filesystem::path& path) const;
};

enum class GuidanceKind { dps, preconditioned };

/// Truth for the per-step metric snapshots: the physical model and the scaler
/// that maps x̂₀ to it.
struct TruthRef {
  Field2D v_true;
  FieldScaler scaler;
};

struct SampleResult {
  Field2D x0;  // normalized field after step 1
  SamplerTrace trace;
};

/// Reverse loop i = N..1 shared by both samplers. DPS subtracts
/// ζ_i ∇_{x_i}Φ; the preconditioned form subtracts ρ_i D_i ∇_{x_i}Φ with
/// D_i and ρ_i built from ∇_{x̂₀}Φ and TV(x̂₀).
SampleResult guided_sample(const Potential& potential, const ScoreModel& model, const DiffusionSchedule& schedule,
                           const GuidanceConfig& config, GuidanceKind kind, int nx, int nz, std::uint64_t seed,
                           const TruthRef* truth = nullptr);

struct WaveProblem {
  ShotGather d_obs;
  AcquisitionGeometry geometry;
  SourceWavelet wavelet;
  SolverConfig solver;
  Grid grid;
  FieldScaler scaler;
  double v_floor = 1000.0;
  double v_ceil = 5000.0;
};

struct InversionResult {
  VelocityField v;
  SamplerTrace trace;
};

/// Algorithm 1 with the MSE misfit.
InversionResult dps_sample(const WaveProblem& problem, const ScoreModel& model, const DiffusionSchedule& schedule,
                           const GuidanceConfig& config, std::uint64_t seed, const Field2D* v_true = nullptr);
/// Algorithm 2 with config.misfit (OT_ENHANCED by default in the harness).
InversionResult otwepdps_sample(const WaveProblem& problem, const ScoreModel& model,
                                const DiffusionSchedule& schedule, const GuidanceConfig& config, std::uint64_t seed,
                                const Field2D* v_true = nullptr);

}  // namespace otfwi
