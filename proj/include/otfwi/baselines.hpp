#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "otfwi/adjoint.hpp"
#include "otfwi/diffusion.hpp"

namespace otfwi {

/// Fixed-step descent. Updates happen on the scaler-normalized field, the
/// same space the samplers and their TV indicator use.
struct DescentConfig {
  double rho0 = 1e-2;
  double alpha = 0.0;  // TV weight
  int max_iters = 50;
  bool preconditioned = true;  // OT-WE+TV only
  double gamma = 0.0;
  double eps = 1e-4;
  double c = 0.1;
  double tau = 0.0;
  double kappa_max = 1e3;
  MisfitSpec misfit = inversion_misfit();  // OT-WE+TV misfit; W2+TV always uses OT_RAW
  FieldScaler scaler{1500.0, 4500.0};
  double v_floor = 1000.0;
  double v_ceil = 5000.0;

  void validate() const;
};

struct IterateRecord {
  int iter = 0;
  double objective = 0.0;
  double misfit = 0.0;
  double tv = 0.0;
  double e_l2 = std::numeric_limits<double>::quiet_NaN();
};

struct DescentResult {
  VelocityField v;
  std::vector<IterateRecord> log;
  std::string error;  // empty on success
};

void write_iterate_log(const std::vector<IterateRecord>& log, const std::filesystem::path& path);

/// Element of ∂TV: back-differenced signs of the forward differences, sign(0) = 0, over N_g.
Field2D tv_subgradient(const Field2D& v);

/// v ← v - ρ₀ (∇𝒥_raw + α g_TV) with the squared W2 misfit.
DescentResult w2_tv_descent(const VelocityField& v_init, const ShotGather& d_obs, const AcquisitionGeometry& geometry,
                            const SourceWavelet& wavelet, const SolverConfig& solver, const DescentConfig& config,
                            const Field2D* v_true = nullptr);

/// v ← v - ρ(v) D(v) (∇𝒥 + α g_TV), or a plain ρ₀ step when not preconditioned.
DescentResult otwe_tv_descent(const VelocityField& v_init, const ShotGather& d_obs,
                              const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                              const SolverConfig& solver, const DescentConfig& config,
                              const Field2D* v_true = nullptr);

}  // namespace otfwi
