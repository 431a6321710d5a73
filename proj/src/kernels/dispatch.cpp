#include <atomic>
#include <cstdlib>
#include <cstring>

#include "otfwi/error.hpp"
#include "otfwi/kernels/vector.hpp"

namespace otfwi::kernels {

void axpy_scalar(std::size_t, double, const double*, double*);
double dot_scalar(std::size_t, const double*, const double*);
#if defined(OTFWI_HAVE_AVX2)
void axpy_avx2(std::size_t, double, const double*, double*);
double dot_avx2(std::size_t, const double*, const double*);
#endif

namespace {

const KernelTable kScalar{Isa::scalar, axpy_scalar, dot_scalar, wave_forward_scalar, wave_adjoint_prepare_scalar,
                          wave_adjoint_gather_scalar};
#if defined(OTFWI_HAVE_AVX2)
const KernelTable kAvx2{Isa::avx2, axpy_avx2, dot_avx2, wave_forward_avx2, wave_adjoint_prepare_avx2,
                        wave_adjoint_gather_avx2};
#endif

Isa pick_default() {
  if (const char* env = std::getenv("OTFWI_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && isa_available(Isa::avx2)) return Isa::avx2;
  }
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{&table(pick_default())};
  return s;
}

}  // namespace

const char* isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) noexcept {
  if (isa == Isa::scalar) return true;
#if defined(OTFWI_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) throw InvalidArgument(std::string("instruction set not available: ") + isa_name(isa));
#if defined(OTFWI_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  return kScalar;
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }
Isa active_isa() { return active().isa; }
void set_active(Isa isa) { slot().store(&table(isa), std::memory_order_relaxed); }

}  // namespace otfwi::kernels
