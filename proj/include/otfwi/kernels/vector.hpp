#pragma once

#include <cstddef>

#include "otfwi/kernels/wave_step.hpp"

namespace otfwi::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;

/// One implementation of every hot inner loop. All entries of a table are
/// produced by the same instruction set so a table can be swapped whole.
struct KernelTable {
  Isa isa;
  /// y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
  void (*wave_forward)(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const ForwardStepArgs&);
  void (*wave_adjoint_prepare)(const WaveGeometry&, const WaveCoeffs&, const AdjointStepArgs&);
  void (*wave_adjoint_gather)(const WaveGeometry&, const WaveStencil&, const WaveCoeffs&, const AdjointStepArgs&);
};

const KernelTable& table(Isa isa);

/// Chosen once: the widest available ISA, unless OTFWI_ISA=scalar|avx2 is set.
const KernelTable& active();
Isa active_isa();
/// Overrides the process-wide choice (used by benchmarks and tests).
void set_active(Isa isa);

}  // namespace otfwi::kernels
