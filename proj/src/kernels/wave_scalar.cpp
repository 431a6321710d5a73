#include "otfwi/kernels/wave_step.hpp"
#include "wave_cell.hpp"

namespace otfwi::kernels {

void wave_forward_scalar(const WaveGeometry& g, const WaveStencil& st, const WaveCoeffs& c,
                         const ForwardStepArgs& a) {
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    const std::size_t jbase = static_cast<std::size_t>(ix) * g.nz;
    for (int iz = 0; iz < g.nz; ++iz) detail::forward_cell(st, c, a, base + iz, g.stride, jbase + iz);
  }
}

void wave_adjoint_prepare_scalar(const WaveGeometry& g, const WaveCoeffs& c, const AdjointStepArgs& a) {
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    const std::size_t jbase = static_cast<std::size_t>(ix) * g.nz;
    for (int iz = 0; iz < g.nz; ++iz) detail::adjoint_prepare_cell(c, a, base + iz, jbase + iz);
  }
}

void wave_adjoint_gather_scalar(const WaveGeometry& g, const WaveStencil& st, const WaveCoeffs& c,
                                const AdjointStepArgs& a) {
  for (int ix = 0; ix < g.nx; ++ix) {
    const std::ptrdiff_t base = g.at(ix, 0);
    for (int iz = 0; iz < g.nz; ++iz) detail::adjoint_gather_cell(st, c, a, base + iz, g.stride);
  }
}

}  // namespace otfwi::kernels
