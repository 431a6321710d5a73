#pragma once

#include "otfwi/misfit.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

struct MisfitGradient {
  Field2D values;  // ∂Φ/∂v, misfit per (m/s)
  double misfit_value = 0.0;
};

/// Φ(v) and its exact discrete gradient. Shots run in parallel; their
/// gradients are summed in shot order.
MisfitGradient misfit_and_gradient(const VelocityField& v, const MisfitEvaluator& misfit,
                                   const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                                   const SolverConfig& config);
MisfitGradient misfit_and_gradient(const VelocityField& v, const ShotGather& d_obs, const MisfitSpec& spec,
                                   const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                                   const SolverConfig& config);

/// Φ(v) without the adjoint pass.
double misfit_value(const VelocityField& v, const MisfitEvaluator& misfit, const AcquisitionGeometry& geometry,
                    const SourceWavelet& wavelet, const SolverConfig& config);

/// J·dv and Jᵀ·dd for the linearized forward operator J = ∂F/∂v.
ShotGather born_operator(const VelocityField& v, const Field2D& dv, const AcquisitionGeometry& geometry,
                         const SourceWavelet& wavelet, const SolverConfig& config);
Field2D adjoint_operator(const VelocityField& v, const ShotGather& dd, const AcquisitionGeometry& geometry,
                         const SourceWavelet& wavelet, const SolverConfig& config);

}  // namespace otfwi
