#include "otfwi/adjoint.hpp"

#include <cmath>

#include "otfwi/error.hpp"
#include "otfwi/parallel.hpp"

namespace otfwi {

namespace {

void sum_in_order(const std::vector<Field2D>& parts, Field2D& out) {
  for (const auto& p : parts) out += p;
}

}  // namespace

MisfitGradient misfit_and_gradient(const VelocityField& v, const MisfitEvaluator& misfit,
                                   const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                                   const SolverConfig& config) {
  const WavePropagator prop(v, geometry, config);
  const auto ns = static_cast<std::size_t>(geometry.n_sources());
  std::vector<Field2D> grads(ns);
  std::vector<double> values(ns, 0.0);
  parallel_for(ns, [&](std::size_t s) {
    const int shot = static_cast<int>(s);
    std::vector<double> history;
    const auto traces = prop.forward(shot, wavelet.samples, &history);
    TraceArray tg;
    values[s] = misfit.shot_value(shot, traces, &tg);
    grads[s] = prop.adjoint(tg, history);
  });
  MisfitGradient out{Field2D(v.grid.nx, v.grid.nz, 0.0), 0.0};
  sum_in_order(grads, out.values);
  for (double x : values) out.misfit_value += x;
  for (double x : out.values.values())
    if (!std::isfinite(x)) throw NumericalError("non-finite velocity gradient");
  return out;
}

MisfitGradient misfit_and_gradient(const VelocityField& v, const ShotGather& d_obs, const MisfitSpec& spec,
                                   const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                                   const SolverConfig& config) {
  return misfit_and_gradient(v, MisfitEvaluator(d_obs, spec), geometry, wavelet, config);
}

double misfit_value(const VelocityField& v, const MisfitEvaluator& misfit, const AcquisitionGeometry& geometry,
                    const SourceWavelet& wavelet, const SolverConfig& config) {
  const WavePropagator prop(v, geometry, config);
  const auto ns = static_cast<std::size_t>(geometry.n_sources());
  std::vector<double> values(ns, 0.0);
  parallel_for(ns, [&](std::size_t s) {
    const int shot = static_cast<int>(s);
    values[s] = misfit.shot_value(shot, prop.forward(shot, wavelet.samples), nullptr);
  });
  double total = 0.0;
  for (double x : values) total += x;
  return total;
}

ShotGather born_operator(const VelocityField& v, const Field2D& dv, const AcquisitionGeometry& geometry,
                         const SourceWavelet& wavelet, const SolverConfig& config) {
  const WavePropagator prop(v, geometry, config);
  ShotGather out(geometry);
  parallel_for(static_cast<std::size_t>(geometry.n_sources()), [&](std::size_t s) {
    out.set_shot(static_cast<int>(s), prop.born(static_cast<int>(s), wavelet.samples, dv));
  });
  return out;
}

Field2D adjoint_operator(const VelocityField& v, const ShotGather& dd, const AcquisitionGeometry& geometry,
                         const SourceWavelet& wavelet, const SolverConfig& config) {
  const WavePropagator prop(v, geometry, config);
  const auto ns = static_cast<std::size_t>(geometry.n_sources());
  std::vector<Field2D> grads(ns);
  parallel_for(ns, [&](std::size_t s) {
    std::vector<double> history;
    prop.forward(static_cast<int>(s), wavelet.samples, &history);
    grads[s] = prop.adjoint(dd.shot(static_cast<int>(s)), history);
  });
  Field2D out(v.grid.nx, v.grid.nz, 0.0);
  sum_in_order(grads, out);
  return out;
}

}  // namespace otfwi
