#pragma once

#include <cstddef>

namespace otfwi::kernels {

/// Padded layout of the extended solver grid. Cell (ix, iz) of the
/// nx × nz extended region lives at origin + ix*stride + iz; the halo
/// around it is `halo` cells wide on every side.
struct WaveGeometry {
  int nx = 0;
  int nz = 0;
  int halo = 0;
  std::ptrdiff_t stride = 0;
  std::ptrdiff_t origin = 0;

  std::ptrdiff_t at(int ix, int iz) const noexcept { return origin + ix * stride + iz; }
  std::size_t padded_size() const noexcept {
    return static_cast<std::size_t>(nx + 2 * halo) * static_cast<std::size_t>(stride);
  }
};

/// 8th-order central weights with the grid spacing folded in.
struct WaveStencil {
  double center = 0.0;  // d2x[0] + d2z[0]
  double d2x[5] = {};
  double d2z[5] = {};
  double d1x[4] = {};
  double d1z[4] = {};
};

/// Per-cell update coefficients, all in the padded layout:
///   u'  = inv1pa * (m*b + cu*u - cp*u_prev)
///   φx' = ex*φx - fx*∂x u
///   φz' = ez*φz - fz*∂z u
struct WaveCoeffs {
  const double* m = nullptr;
  const double* inv1pa = nullptr;
  const double* cu = nullptr;
  const double* cp = nullptr;
  const double* ex = nullptr;
  const double* fx = nullptr;
  const double* ez = nullptr;
  const double* fz = nullptr;
};

/// b = Δu + ∂x φx + ∂z φz is written compactly (ix*nz + iz) for the adjoint.
struct ForwardStepArgs {
  const double* u = nullptr;
  const double* u_prev = nullptr;
  const double* phx = nullptr;
  const double* phz = nullptr;
  double* u_next = nullptr;
  double* phx_next = nullptr;
  double* phz_next = nullptr;
  double* b = nullptr;
};

/// Reverse step of the recursion above. `prepare` is elementwise:
///   q = lu_next*inv1pa, grad_m += q*b, beta = m*q, gx = fx*lphx, gz = fz*lphz,
///   lu_next <- -cp*q.
/// `gather` then applies the transposed stencils:
///   lu += Δβ + cu*q + ∂x gx + ∂z gz,  lphx = ex*lphx - ∂x β,  lphz = ez*lphz - ∂z β.
/// beta/gx/gz/q must keep zero halos.
struct AdjointStepArgs {
  double* lu_next = nullptr;
  double* lu = nullptr;
  double* lphx = nullptr;
  double* lphz = nullptr;
  double* q = nullptr;
  double* beta = nullptr;
  double* gx = nullptr;
  double* gz = nullptr;
  const double* b = nullptr;
  double* grad_m = nullptr;
};

void wave_forward_scalar(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const ForwardStepArgs&);
void wave_adjoint_prepare_scalar(const WaveGeometry&, const WaveCoeffs&, const AdjointStepArgs&);
void wave_adjoint_gather_scalar(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const AdjointStepArgs&);

#if defined(OTFWI_HAVE_AVX2)
void wave_forward_avx2(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const ForwardStepArgs&);
void wave_adjoint_prepare_avx2(const WaveGeometry&, const WaveCoeffs&, const AdjointStepArgs&);
void wave_adjoint_gather_avx2(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const AdjointStepArgs&);
#endif

}  // namespace otfwi::kernels
