#pragma once

#include <cstdint>
#include <vector>

#include "otfwi/field.hpp"
#include "otfwi/grid.hpp"
#include "otfwi/kernels/wave_step.hpp"

namespace otfwi {

struct SolverConfig {
  int spatial_order = 8;
  int pml_width = 6;
  double pml_reflection_target = 1e-3;
  double cfl_safety = 0.9;
  /// Velocity used to size the damping profile. Fixed so the profile does
  /// not depend on the model being inverted.
  double pml_reference_velocity = 3000.0;

  void validate() const;
};

/// Stability constant of the 8th-order Laplacian: sqrt(sum |w|) / 2.
double stencil_stability_constant();

bool check_cfl(const VelocityField& v, double dt, const SolverConfig& config);

/// Traces of one shot: [n_receivers × nt], addressed (receiver, time).
using TraceArray = Field2D;

struct ShotGather {
  AcquisitionGeometry geometry;
  Array3D values;  // [n_sources × n_receivers × nt]

  ShotGather() = default;
  explicit ShotGather(AcquisitionGeometry geo);
  ShotGather(AcquisitionGeometry geo, Array3D v);

  int n_sources() const noexcept { return values.n0(); }
  int n_receivers() const noexcept { return values.n1(); }
  int nt() const noexcept { return values.n2(); }
  TraceArray shot(int s) const;
  void set_shot(int s, const TraceArray& t);
};

/// Forward/adjoint propagation on the padded grid for one velocity model.
/// The object is immutable after construction; all methods are reentrant.
class WavePropagator {
 public:
  WavePropagator(const VelocityField& v, const AcquisitionGeometry& geometry, const SolverConfig& config);

  /// Receiver traces of shot `shot`. If `b_history` is given it receives the
  /// per-step right-hand side needed by the adjoint (nt × extended cells).
  TraceArray forward(int shot, const std::vector<double>& wavelet, std::vector<double>* b_history = nullptr) const;

  /// Gradient with respect to the model velocity of <trace_grad, forward(shot)>.
  Field2D adjoint(const TraceArray& trace_grad, const std::vector<double>& b_history) const;

  /// Linearized traces J·dv for shot `shot` (Born modelling).
  TraceArray born(int shot, const std::vector<double>& wavelet, const Field2D& dv) const;

  /// Discrete energy of a wavefield pair, summed over the extended grid.
  struct EnergyProbe {
    std::vector<double> energy;  // per step
  };
  EnergyProbe energy(int shot, const std::vector<double>& wavelet) const;

  int extended_nx() const noexcept { return nxe_; }
  int extended_nz() const noexcept { return nze_; }
  std::size_t extended_size() const noexcept { return static_cast<std::size_t>(nxe_) * nze_; }

 private:
  struct Buffers;
  void fill_top_ghosts(double* u, double* phz) const;
  void fold_top_adjoint(double* lu, double* lphz, const double* beta, const double* gz) const;
  std::ptrdiff_t padded_index(int ixe, int ize) const noexcept { return geom_.at(ixe, ize); }

  Grid grid_;
  AcquisitionGeometry acq_;
  SolverConfig cfg_;
  int width_ = 0;
  int nxe_ = 0;
  int nze_ = 0;
  kernels::WaveGeometry geom_;
  kernels::WaveStencil stencil_;
  std::vector<double> m_, inv1pa_, cu_, cp_, ex_, fx_, ez_, fz_;
  std::vector<double> v_ext_;  // compact, extended
  std::vector<std::ptrdiff_t> src_idx_, rec_idx_;  // padded indices
  std::vector<std::size_t> src_cmp_;               // compact extended indices
  double inv_cell_ = 0.0;
};

/// All shots of the gathered acquisition. Shots run in parallel.
ShotGather forward_operator(const VelocityField& v, const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                            const SolverConfig& config);
TraceArray simulate_shot(const VelocityField& v, const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                         int shot_index, const SolverConfig& config);

ShotGather add_noise(const ShotGather& d, double sigma, std::uint64_t seed);

}  // namespace otfwi
