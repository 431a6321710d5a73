#include <immintrin.h>

#include "otfwi/kernels/wave_step.hpp"
#include "wave_cell.hpp"

namespace otfwi::kernels {

namespace {

inline __m256d ld(const double* p) { return _mm256_loadu_pd(p); }
inline __m256d bc(double v) { return _mm256_set1_pd(v); }
inline __m256d add(__m256d a, __m256d b) { return _mm256_add_pd(a, b); }
inline __m256d sub(__m256d a, __m256d b) { return _mm256_sub_pd(a, b); }
inline __m256d mul(__m256d a, __m256d b) { return _mm256_mul_pd(a, b); }

// Σ_k w[k] (p[i+k s] + p[i-k s]) for k = 1..4, accumulated into acc in order.
inline __m256d even_terms(__m256d acc, const double* w, const double* p, std::ptrdiff_t s) {
  for (int k = 1; k <= 4; ++k) acc = add(acc, mul(bc(w[k]), add(ld(p + k * s), ld(p - k * s))));
  return acc;
}

inline __m256d odd_terms(__m256d acc, const double* w, const double* p, std::ptrdiff_t s) {
  for (int k = 1; k <= 4; ++k) acc = add(acc, mul(bc(w[k - 1]), sub(ld(p + k * s), ld(p - k * s))));
  return acc;
}

inline __m256d odd_only(const double* w, const double* p, std::ptrdiff_t s) {
  __m256d acc = mul(bc(w[0]), sub(ld(p + s), ld(p - s)));
  for (int k = 2; k <= 4; ++k) acc = add(acc, mul(bc(w[k - 1]), sub(ld(p + k * s), ld(p - k * s))));
  return acc;
}

}  // namespace

void wave_forward_avx2(const WaveGeometry& g, const WaveStencil& st, const WaveCoeffs& c,
                       const ForwardStepArgs& a) {
  const std::ptrdiff_t sx = g.stride;
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    const std::size_t jbase = static_cast<std::size_t>(ix) * g.nz;
    int iz = 0;
    for (; iz + 4 <= g.nz; iz += 4) {
      const std::ptrdiff_t i = base + iz;
      const __m256d u = ld(a.u + i);
      __m256d b = mul(bc(st.center), u);
      b = even_terms(b, st.d2x, a.u + i, sx);
      b = even_terms(b, st.d2z, a.u + i, 1);
      b = odd_terms(b, st.d1x, a.phx + i, sx);
      b = odd_terms(b, st.d1z, a.phz + i, 1);
      const __m256d dux = odd_only(st.d1x, a.u + i, sx);
      const __m256d duz = odd_only(st.d1z, a.u + i, 1);
      const __m256d un =
          mul(ld(c.inv1pa + i), sub(add(mul(ld(c.m + i), b), mul(ld(c.cu + i), u)), mul(ld(c.cp + i), ld(a.u_prev + i))));
      _mm256_storeu_pd(a.u_next + i, un);
      _mm256_storeu_pd(a.phx_next + i, sub(mul(ld(c.ex + i), ld(a.phx + i)), mul(ld(c.fx + i), dux)));
      _mm256_storeu_pd(a.phz_next + i, sub(mul(ld(c.ez + i), ld(a.phz + i)), mul(ld(c.fz + i), duz)));
      _mm256_storeu_pd(a.b + jbase + iz, b);
    }
    for (; iz < g.nz; ++iz) detail::forward_cell(st, c, a, base + iz, sx, jbase + iz);
  }
}

void wave_adjoint_prepare_avx2(const WaveGeometry& g, const WaveCoeffs& c, const AdjointStepArgs& a) {
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    const std::size_t jbase = static_cast<std::size_t>(ix) * g.nz;
    int iz = 0;
    for (; iz + 4 <= g.nz; iz += 4) {
      const std::ptrdiff_t i = base + iz;
      const std::size_t j = jbase + iz;
      const __m256d q = mul(ld(a.lu_next + i), ld(c.inv1pa + i));
      _mm256_storeu_pd(a.q + i, q);
      _mm256_storeu_pd(a.grad_m + j, add(ld(a.grad_m + j), mul(q, ld(a.b + j))));
      _mm256_storeu_pd(a.beta + i, mul(ld(c.m + i), q));
      _mm256_storeu_pd(a.gx + i, mul(ld(c.fx + i), ld(a.lphx + i)));
      _mm256_storeu_pd(a.gz + i, mul(ld(c.fz + i), ld(a.lphz + i)));
      _mm256_storeu_pd(a.lu_next + i, sub(_mm256_setzero_pd(), mul(ld(c.cp + i), q)));
    }
    for (; iz < g.nz; ++iz) detail::adjoint_prepare_cell(c, a, base + iz, jbase + iz);
  }
}

void wave_adjoint_gather_avx2(const WaveGeometry& g, const WaveStencil& st, const WaveCoeffs& c,
                              const AdjointStepArgs& a) {
  const std::ptrdiff_t sx = g.stride;
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    int iz = 0;
    for (; iz + 4 <= g.nz; iz += 4) {
      const std::ptrdiff_t i = base + iz;
      __m256d t = mul(bc(st.center), ld(a.beta + i));
      t = even_terms(t, st.d2x, a.beta + i, sx);
      t = even_terms(t, st.d2z, a.beta + i, 1);
      t = add(t, mul(ld(c.cu + i), ld(a.q + i)));
      t = odd_terms(t, st.d1x, a.gx + i, sx);
      t = odd_terms(t, st.d1z, a.gz + i, 1);
      const __m256d bx = odd_only(st.d1x, a.beta + i, sx);
      const __m256d bz = odd_only(st.d1z, a.beta + i, 1);
      _mm256_storeu_pd(a.lu + i, add(ld(a.lu + i), t));
      _mm256_storeu_pd(a.lphx + i, sub(mul(ld(c.ex + i), ld(a.lphx + i)), bx));
      _mm256_storeu_pd(a.lphz + i, sub(mul(ld(c.ez + i), ld(a.lphz + i)), bz));
    }
    for (; iz < g.nz; ++iz) detail::adjoint_gather_cell(st, c, a, base + iz, sx);
  }
}

}  // namespace otfwi::kernels
