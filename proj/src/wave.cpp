#include "otfwi/wave.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "otfwi/error.hpp"
#include "otfwi/kernels/vector.hpp"
#include "otfwi/parallel.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

namespace {

constexpr int kHalo = 8;
constexpr double kD2[5] = {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
constexpr double kD1[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};

double sigma_max(const SolverConfig& c, double h) {
  if (c.pml_width == 0) return 0.0;
  constexpr double p = 2.0;
  return -(p + 1.0) * c.pml_reference_velocity * std::log(c.pml_reflection_target) / (2.0 * c.pml_width * h);
}

// Quadratic profile; k = distance into the layer in cells (1..W), 0 outside.
double profile(int k, int width, double smax) {
  if (k <= 0) return 0.0;
  const double r = static_cast<double>(k) / width;
  return smax * r * r;
}

}  // namespace

void SolverConfig::validate() const {
  if (spatial_order != 8) throw InvalidArgument("only spatial_order = 8 is supported");
  if (pml_width < 0) throw InvalidArgument("pml_width must be >= 0");
  if (!(cfl_safety > 0.0 && cfl_safety < 1.0)) throw InvalidArgument("cfl_safety must lie in (0, 1)");
  if (!(pml_reflection_target > 0.0 && pml_reflection_target < 1.0))
    throw InvalidArgument("pml_reflection_target must lie in (0, 1)");
  if (!(pml_reference_velocity > 0.0)) throw InvalidArgument("pml_reference_velocity must be positive");
}

double stencil_stability_constant() {
  double s = std::abs(kD2[0]);
  for (int k = 1; k <= 4; ++k) s += 2.0 * std::abs(kD2[k]);
  return std::sqrt(s) / 2.0;
}

bool check_cfl(const VelocityField& v, double dt, const SolverConfig& config) {
  const double vmax = v.values.max();
  const double h = std::min(v.grid.dx, v.grid.dz);
  return dt <= config.cfl_safety * h / (vmax * std::sqrt(2.0) * stencil_stability_constant());
}

ShotGather::ShotGather(AcquisitionGeometry geo)
    : geometry(std::move(geo)), values(geometry.n_sources(), geometry.n_receivers(), geometry.nt) {}

ShotGather::ShotGather(AcquisitionGeometry geo, Array3D v) : geometry(std::move(geo)), values(std::move(v)) {
  if (values.n0() != geometry.n_sources() || values.n1() != geometry.n_receivers() || values.n2() != geometry.nt)
    throw InvalidArgument("shot gather shape does not match geometry");
}

TraceArray ShotGather::shot(int s) const {
  TraceArray t(n_receivers(), nt());
  for (int r = 0; r < n_receivers(); ++r) std::ranges::copy(values.row(s, r), &t(r, 0));
  return t;
}

void ShotGather::set_shot(int s, const TraceArray& t) {
  if (t.nx() != n_receivers() || t.nz() != nt()) throw InvalidArgument("trace array shape mismatch");
  for (int r = 0; r < n_receivers(); ++r) {
    const double* src = t.raw().data() + static_cast<std::size_t>(r) * nt();
    std::copy(src, src + nt(), values.row(s, r).begin());
  }
}

struct WavePropagator::Buffers {
  explicit Buffers(std::size_t n) : u0(n), u1(n), u2(n), px0(n), px1(n), pz0(n), pz1(n) {}
  std::vector<double> u0, u1, u2, px0, px1, pz0, pz1;
};

WavePropagator::WavePropagator(const VelocityField& v, const AcquisitionGeometry& geometry, const SolverConfig& config)
    : grid_(v.grid), acq_(geometry), cfg_(config) {
  cfg_.validate();
  v.require_physical();
  acq_.validate(grid_);
  if (!check_cfl(v, acq_.dt, cfg_)) throw StabilityError("time step violates the CFL bound");

  width_ = cfg_.pml_width;
  nxe_ = grid_.nx + 2 * width_;
  nze_ = grid_.nz + width_;
  geom_.nx = nxe_;
  geom_.nz = nze_;
  geom_.halo = kHalo;
  geom_.stride = nze_ + 2 * kHalo;
  geom_.origin = kHalo * geom_.stride + kHalo;

  const double idx2 = 1.0 / (grid_.dx * grid_.dx), idz2 = 1.0 / (grid_.dz * grid_.dz);
  stencil_.center = kD2[0] * idx2 + kD2[0] * idz2;
  for (int k = 0; k < 5; ++k) {
    stencil_.d2x[k] = kD2[k] * idx2;
    stencil_.d2z[k] = kD2[k] * idz2;
  }
  for (int k = 0; k < 4; ++k) {
    stencil_.d1x[k] = kD1[k] / grid_.dx;
    stencil_.d1z[k] = kD1[k] / grid_.dz;
  }

  const std::size_t np = geom_.padded_size();
  for (auto* a : {&m_, &inv1pa_, &cu_, &cp_, &ex_, &fx_, &ez_, &fz_}) a->assign(np, 0.0);
  v_ext_.assign(extended_size(), 0.0);
  const double dt = acq_.dt;
  const double sx_max = sigma_max(cfg_, grid_.dx), sz_max = sigma_max(cfg_, grid_.dz);
  for (int ixe = 0; ixe < nxe_; ++ixe) {
    const int kx = ixe < width_ ? width_ - ixe : (ixe >= width_ + grid_.nx ? ixe - (width_ + grid_.nx - 1) : 0);
    const double sx = profile(kx, width_, sx_max);
    for (int ize = 0; ize < nze_; ++ize) {
      const int kz = ize < width_ ? width_ - ize : 0;
      const double sz = profile(kz, width_, sz_max);
      const int ix = std::clamp(ixe - width_, 0, grid_.nx - 1);
      const int iz = std::clamp(ize - width_, 0, grid_.nz - 1);
      const double vel = v.values(ix, iz);
      v_ext_[static_cast<std::size_t>(ixe) * nze_ + ize] = vel;
      const std::ptrdiff_t i = padded_index(ixe, ize);
      const double a = dt * (sx + sz) / 2.0;
      m_[i] = vel * vel * dt * dt;
      inv1pa_[i] = 1.0 / (1.0 + a);
      cu_[i] = 2.0 - dt * dt * sx * sz;
      cp_[i] = 1.0 - a;
      ex_[i] = 1.0 - dt * sx;
      fx_[i] = dt * (sx - sz);
      ez_[i] = 1.0 - dt * sz;
      fz_[i] = dt * (sz - sx);
    }
  }
  for (const auto& n : acq_.sources) {
    src_idx_.push_back(padded_index(n.ix + width_, n.iz + width_));
    src_cmp_.push_back(static_cast<std::size_t>(n.ix + width_) * nze_ + (n.iz + width_));
  }
  for (const auto& n : acq_.receivers) rec_idx_.push_back(padded_index(n.ix + width_, n.iz + width_));
  inv_cell_ = 1.0 / (grid_.dx * grid_.dz);
}

// Free surface: even mirror for u, odd for φz about the top row.
void WavePropagator::fill_top_ghosts(double* u, double* phz) const {
  const int top = nze_ - 1;
  for (int ixe = 0; ixe < nxe_; ++ixe) {
    const std::ptrdiff_t t = padded_index(ixe, top);
    for (int k = 1; k <= 4; ++k) {
      u[t + k] = u[t - k];
      phz[t + k] = -phz[t - k];
    }
  }
}

// Transpose of fill_top_ghosts composed with the stencil reads of ghost rows.
void WavePropagator::fold_top_adjoint(double* lu, double* lphz, const double* beta, const double* gz) const {
  const int top = nze_ - 1;
  const auto& st = stencil_;
  for (int ixe = 0; ixe < nxe_; ++ixe) {
    const std::ptrdiff_t t = padded_index(ixe, top);
    for (int k = 1; k <= 4; ++k) {
      const std::ptrdiff_t h = t + k;
      double cu = 0.0, cz = 0.0;
      for (int kk = 1; kk <= 4; ++kk) {
        cu += st.d2z[kk] * (beta[h + kk] + beta[h - kk]) + st.d1z[kk - 1] * (gz[h + kk] - gz[h - kk]);
        cz += st.d1z[kk - 1] * (beta[h + kk] - beta[h - kk]);
      }
      lu[t - k] += cu;
      lphz[t - k] += cz;
    }
  }
}

TraceArray WavePropagator::forward(int shot, const std::vector<double>& wavelet,
                                   std::vector<double>* b_history) const {
  if (shot < 0 || shot >= acq_.n_sources()) throw InvalidArgument("shot index out of range");
  const int nt = acq_.nt;
  if (static_cast<int>(wavelet.size()) < nt) throw InvalidArgument("wavelet shorter than nt");
  const std::size_t ne = extended_size();
  std::vector<double> b_local;
  std::vector<double>& bh = b_history ? *b_history : b_local;
  bh.assign(b_history ? ne * nt : ne, 0.0);

  Buffers buf(geom_.padded_size());
  double *u_prev = buf.u0.data(), *u = buf.u1.data(), *u_next = buf.u2.data();
  double *px = buf.px0.data(), *px_next = buf.px1.data(), *pz = buf.pz0.data(), *pz_next = buf.pz1.data();
  const kernels::WaveCoeffs coeffs{m_.data(), inv1pa_.data(), cu_.data(), cp_.data(),
                                   ex_.data(), fx_.data(),   ez_.data(), fz_.data()};
  const auto& kt = kernels::active();
  const std::ptrdiff_t si = src_idx_[shot];
  const std::size_t sc = src_cmp_[shot];
  TraceArray traces(acq_.n_receivers(), nt);

  for (int n = 0; n < nt; ++n) {
    double* b = bh.data() + (b_history ? ne * n : 0);
    fill_top_ghosts(u, pz);
    kt.wave_forward(geom_, stencil_, coeffs, {u, u_prev, px, pz, u_next, px_next, pz_next, b});
    const double s = wavelet[n] * inv_cell_;
    u_next[si] += inv1pa_[si] * (m_[si] * s);
    b[sc] += s;
    double probe = 0.0;
    for (int r = 0; r < acq_.n_receivers(); ++r) {
      const double x = u_next[rec_idx_[r]];
      traces(r, n) = x;
      probe += x;
    }
    if (!std::isfinite(probe)) throw DivergenceError(n, "non-finite wavefield");
    std::swap(u_prev, u);
    std::swap(u, u_next);
    std::swap(px, px_next);
    std::swap(pz, pz_next);
  }
  return traces;
}

Field2D WavePropagator::adjoint(const TraceArray& trace_grad, const std::vector<double>& b_history) const {
  const int nt = acq_.nt;
  const std::size_t ne = extended_size();
  if (trace_grad.nx() != acq_.n_receivers() || trace_grad.nz() != nt)
    throw InvalidArgument("trace gradient shape mismatch");
  if (b_history.size() != ne * nt) throw InvalidArgument("forward history has the wrong size");
  for (double x : trace_grad.values())
    if (!std::isfinite(x)) throw NumericalError("non-finite trace gradient");

  const std::size_t np = geom_.padded_size();
  std::vector<double> la(np, 0.0), lb(np, 0.0), lpx(np, 0.0), lpz(np, 0.0);
  std::vector<double> q(np, 0.0), beta(np, 0.0), gx(np, 0.0), gz(np, 0.0);
  std::vector<double> grad_m(ne, 0.0);
  double *A = la.data(), *B = lb.data();
  const kernels::WaveCoeffs coeffs{m_.data(), inv1pa_.data(), cu_.data(), cp_.data(),
                                   ex_.data(), fx_.data(),   ez_.data(), fz_.data()};
  const auto& kt = kernels::active();

  for (int n = nt - 1; n >= 0; --n) {
    for (int r = 0; r < acq_.n_receivers(); ++r) A[rec_idx_[r]] += trace_grad(r, n);
    const kernels::AdjointStepArgs args{A,         B,         lpx.data(), lpz.data(), q.data(), beta.data(),
                                        gx.data(), gz.data(), b_history.data() + ne * n, grad_m.data()};
    kt.wave_adjoint_prepare(geom_, coeffs, args);
    kt.wave_adjoint_gather(geom_, stencil_, coeffs, args);
    fold_top_adjoint(B, lpz.data(), beta.data(), gz.data());
    std::swap(A, B);
  }

  // d m / d v = 2 v dt², folded from padding cells onto their edge nodes.
  Field2D g(grid_.nx, grid_.nz, 0.0);
  const double dt2 = acq_.dt * acq_.dt;
  for (int ixe = 0; ixe < nxe_; ++ixe)
    for (int ize = 0; ize < nze_; ++ize) {
      const std::size_t j = static_cast<std::size_t>(ixe) * nze_ + ize;
      const int ix = std::clamp(ixe - width_, 0, grid_.nx - 1);
      const int iz = std::clamp(ize - width_, 0, grid_.nz - 1);
      g(ix, iz) += grad_m[j] * 2.0 * v_ext_[j] * dt2;
    }
  return g;
}

TraceArray WavePropagator::born(int shot, const std::vector<double>& wavelet, const Field2D& dv) const {
  if (dv.nx() != grid_.nx || dv.nz() != grid_.nz) throw InvalidArgument("perturbation shape mismatch");
  const int nt = acq_.nt;
  const std::size_t ne = extended_size();
  std::vector<double> bh;
  forward(shot, wavelet, &bh);

  std::vector<double> dm(geom_.padded_size(), 0.0);
  const double dt2 = acq_.dt * acq_.dt;
  for (int ixe = 0; ixe < nxe_; ++ixe)
    for (int ize = 0; ize < nze_; ++ize) {
      const int ix = std::clamp(ixe - width_, 0, grid_.nx - 1);
      const int iz = std::clamp(ize - width_, 0, grid_.nz - 1);
      dm[padded_index(ixe, ize)] = 2.0 * v_ext_[static_cast<std::size_t>(ixe) * nze_ + ize] * dv(ix, iz) * dt2;
    }

  Buffers buf(geom_.padded_size());
  double *u_prev = buf.u0.data(), *u = buf.u1.data(), *u_next = buf.u2.data();
  double *px = buf.px0.data(), *px_next = buf.px1.data(), *pz = buf.pz0.data(), *pz_next = buf.pz1.data();
  std::vector<double> scratch(ne);
  const kernels::WaveCoeffs coeffs{m_.data(), inv1pa_.data(), cu_.data(), cp_.data(),
                                   ex_.data(), fx_.data(),   ez_.data(), fz_.data()};
  const auto& kt = kernels::active();
  TraceArray traces(acq_.n_receivers(), nt);
  for (int n = 0; n < nt; ++n) {
    fill_top_ghosts(u, pz);
    kt.wave_forward(geom_, stencil_, coeffs, {u, u_prev, px, pz, u_next, px_next, pz_next, scratch.data()});
    const double* b = bh.data() + ne * n;
    for (int ixe = 0; ixe < nxe_; ++ixe) {
      const std::ptrdiff_t base = padded_index(ixe, 0);
      const std::size_t jb = static_cast<std::size_t>(ixe) * nze_;
      for (int ize = 0; ize < nze_; ++ize) u_next[base + ize] += inv1pa_[base + ize] * (dm[base + ize] * b[jb + ize]);
    }
    for (int r = 0; r < acq_.n_receivers(); ++r) traces(r, n) = u_next[rec_idx_[r]];
    std::swap(u_prev, u);
    std::swap(u, u_next);
    std::swap(px, px_next);
    std::swap(pz, pz_next);
  }
  return traces;
}

WavePropagator::EnergyProbe WavePropagator::energy(int shot, const std::vector<double>& wavelet) const {
  // E^{n+1/2} = Σ w (u^{n+1} - u^n)² / m  -  Σ w u^{n+1} (Δ u^n), with weight
  // 1/2 on the mirrored top row so the discrete Laplacian is self-adjoint.
  const int nt = acq_.nt;
  const std::size_t ne = extended_size();
  Buffers buf(geom_.padded_size());
  double *u_prev = buf.u0.data(), *u = buf.u1.data(), *u_next = buf.u2.data();
  double *px = buf.px0.data(), *px_next = buf.px1.data(), *pz = buf.pz0.data(), *pz_next = buf.pz1.data();
  std::vector<double> scratch(ne);
  const kernels::WaveCoeffs coeffs{m_.data(), inv1pa_.data(), cu_.data(), cp_.data(),
                                   ex_.data(), fx_.data(),   ez_.data(), fz_.data()};
  const auto& kt = kernels::active();
  const std::ptrdiff_t si = src_idx_.at(shot);
  EnergyProbe out;
  const auto& st = stencil_;
  for (int n = 0; n < nt; ++n) {
    fill_top_ghosts(u, pz);
    kt.wave_forward(geom_, stencil_, coeffs, {u, u_prev, px, pz, u_next, px_next, pz_next, scratch.data()});
    u_next[si] += inv1pa_[si] * (m_[si] * (wavelet[n] * inv_cell_));
    double e = 0.0;
    for (int ixe = 0; ixe < nxe_; ++ixe)
      for (int ize = 0; ize < nze_; ++ize) {
        const std::ptrdiff_t i = padded_index(ixe, ize);
        double lap = st.center * u[i];
        for (int k = 1; k <= 4; ++k)
          lap += st.d2x[k] * (u[i + k * geom_.stride] + u[i - k * geom_.stride]) + st.d2z[k] * (u[i + k] + u[i - k]);
        const double w = ize == nze_ - 1 ? 0.5 : 1.0;
        const double du = u_next[i] - u[i];
        e += w * (du * du / m_[i] - u_next[i] * lap);
      }
    out.energy.push_back(e);
    std::swap(u_prev, u);
    std::swap(u, u_next);
    std::swap(px, px_next);
    std::swap(pz, pz_next);
  }
  return out;
}

TraceArray simulate_shot(const VelocityField& v, const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                         int shot_index, const SolverConfig& config) {
  return WavePropagator(v, geometry, config).forward(shot_index, wavelet.samples);
}

ShotGather forward_operator(const VelocityField& v, const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                            const SolverConfig& config) {
  const WavePropagator prop(v, geometry, config);
  ShotGather out(geometry);
  parallel_for(static_cast<std::size_t>(geometry.n_sources()), [&](std::size_t s) {
    out.set_shot(static_cast<int>(s), prop.forward(static_cast<int>(s), wavelet.samples));
  });
  return out;
}

ShotGather add_noise(const ShotGather& d, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  ShotGather out = d;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& x : out.values.raw()) x += sigma * rng.normal();
  return out;
}

}  // namespace otfwi
