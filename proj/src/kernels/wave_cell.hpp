#pragma once

// Per-cell bodies of the wave kernels. The AVX2 variants evaluate exactly
// the same expression tree lane by lane and fall back to these for tails,
// so both paths round identically.

#include <cstddef>

#include "otfwi/kernels/wave_step.hpp"

namespace otfwi::kernels::detail {

inline void forward_cell(const WaveStencil& st, const WaveCoeffs& c, const ForwardStepArgs& a, std::ptrdiff_t i,
                         std::ptrdiff_t sx, std::size_t j) {
  const double* u = a.u;
  double b = st.center * u[i];
  for (int k = 1; k <= 4; ++k) b = b + st.d2x[k] * (u[i + k * sx] + u[i - k * sx]);
  for (int k = 1; k <= 4; ++k) b = b + st.d2z[k] * (u[i + k] + u[i - k]);
  for (int k = 1; k <= 4; ++k) b = b + st.d1x[k - 1] * (a.phx[i + k * sx] - a.phx[i - k * sx]);
  for (int k = 1; k <= 4; ++k) b = b + st.d1z[k - 1] * (a.phz[i + k] - a.phz[i - k]);
  double dux = st.d1x[0] * (u[i + sx] - u[i - sx]);
  for (int k = 2; k <= 4; ++k) dux = dux + st.d1x[k - 1] * (u[i + k * sx] - u[i - k * sx]);
  double duz = st.d1z[0] * (u[i + 1] - u[i - 1]);
  for (int k = 2; k <= 4; ++k) duz = duz + st.d1z[k - 1] * (u[i + k] - u[i - k]);
  a.u_next[i] = c.inv1pa[i] * (c.m[i] * b + c.cu[i] * u[i] - c.cp[i] * a.u_prev[i]);
  a.phx_next[i] = c.ex[i] * a.phx[i] - c.fx[i] * dux;
  a.phz_next[i] = c.ez[i] * a.phz[i] - c.fz[i] * duz;
  a.b[j] = b;
}

inline void adjoint_prepare_cell(const WaveCoeffs& c, const AdjointStepArgs& a, std::ptrdiff_t i, std::size_t j) {
  const double q = a.lu_next[i] * c.inv1pa[i];
  a.q[i] = q;
  a.grad_m[j] = a.grad_m[j] + q * a.b[j];
  a.beta[i] = c.m[i] * q;
  a.gx[i] = c.fx[i] * a.lphx[i];
  a.gz[i] = c.fz[i] * a.lphz[i];
  a.lu_next[i] = -(c.cp[i] * q);
}

inline void adjoint_gather_cell(const WaveStencil& st, const WaveCoeffs& c, const AdjointStepArgs& a,
                                std::ptrdiff_t i, std::ptrdiff_t sx) {
  const double* be = a.beta;
  double t = st.center * be[i];
  for (int k = 1; k <= 4; ++k) t = t + st.d2x[k] * (be[i + k * sx] + be[i - k * sx]);
  for (int k = 1; k <= 4; ++k) t = t + st.d2z[k] * (be[i + k] + be[i - k]);
  t = t + c.cu[i] * a.q[i];
  for (int k = 1; k <= 4; ++k) t = t + st.d1x[k - 1] * (a.gx[i + k * sx] - a.gx[i - k * sx]);
  for (int k = 1; k <= 4; ++k) t = t + st.d1z[k - 1] * (a.gz[i + k] - a.gz[i - k]);
  double bx = st.d1x[0] * (be[i + sx] - be[i - sx]);
  for (int k = 2; k <= 4; ++k) bx = bx + st.d1x[k - 1] * (be[i + k * sx] - be[i - k * sx]);
  double bz = st.d1z[0] * (be[i + 1] - be[i - 1]);
  for (int k = 2; k <= 4; ++k) bz = bz + st.d1z[k - 1] * (be[i + k] - be[i - k]);
  a.lu[i] = a.lu[i] + t;
  a.lphx[i] = c.ex[i] * a.lphx[i] - bx;
  a.lphz[i] = c.ez[i] * a.lphz[i] - bz;
}

}  // namespace otfwi::kernels::detail
