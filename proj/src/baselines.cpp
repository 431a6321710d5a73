#include "otfwi/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "otfwi/csv.hpp"
#include "otfwi/error.hpp"
#include "otfwi/metrics.hpp"
#include "otfwi/samplers.hpp"

namespace otfwi {

void DescentConfig::validate() const {
  std::vector<std::string> p;
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) p.push_back("rho0 must be > 0");
  if (!(alpha >= 0.0)) p.push_back("alpha must be >= 0");
  if (max_iters < 1) p.push_back("max_iters must be >= 1");
  if (!(gamma >= 0.0)) p.push_back("gamma must be >= 0");
  if (!(eps > 0.0)) p.push_back("eps must be > 0");
  if (!(c > 0.0)) p.push_back("c must be > 0");
  if (!(tau >= 0.0)) p.push_back("tau must be >= 0");
  if (!(kappa_max >= 1.0)) p.push_back("kappa_max must be >= 1");
  if (!(scaler.v_min < scaler.v_max)) p.push_back("scaler needs v_min < v_max");
  if (!(v_floor > 0.0 && v_floor < v_ceil)) p.push_back("bracket needs 0 < v_floor < v_ceil");
  try {
    misfit.validate();
  } catch (const Error& e) {
    p.push_back(e.what());
  }
  if (!p.empty()) throw ConfigError(p);
}

void write_iterate_log(const std::vector<IterateRecord>& log, const std::filesystem::path& path) {
  CsvTable t({"iteration", "objective", "misfit", "tv", "e_l2"});
  for (const auto& r : log) t.add_row({static_cast<long long>(r.iter), r.objective, r.misfit, r.tv, r.e_l2});
  t.write(path);
}

Field2D tv_subgradient(const Field2D& v) {
  if (v.nx() < 2 || v.nz() < 2) throw InvalidArgument("TV needs a field of at least 2x2");
  auto sgn = [](double d) { return d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0; };
  Field2D g(v.nx(), v.nz(), 0.0);
  const double w = 1.0 / static_cast<double>(v.size());
  for (int ix = 0; ix < v.nx(); ++ix)
    for (int iz = 0; iz < v.nz(); ++iz) {
      if (ix + 1 < v.nx()) {
        const double s = w * sgn(v(ix + 1, iz) - v(ix, iz));
        g(ix + 1, iz) += s;
        g(ix, iz) -= s;
      }
      if (iz + 1 < v.nz()) {
        const double s = w * sgn(v(ix, iz + 1) - v(ix, iz));
        g(ix, iz + 1) += s;
        g(ix, iz) -= s;
      }
    }
  return g;
}

namespace {

DescentResult descend(const VelocityField& v_init, const ShotGather& d_obs, const AcquisitionGeometry& geometry,
                      const SourceWavelet& wavelet, const SolverConfig& solver, const DescentConfig& cfg,
                      const MisfitSpec& spec, bool precondition, const Field2D* v_true) {
  cfg.validate();
  geometry.validate(v_init.grid);
  const MisfitEvaluator misfit(d_obs, spec);
  const FieldScaler& sc = cfg.scaler;
  GuidanceConfig rho_cfg;
  rho_cfg.rho0 = cfg.rho0;
  rho_cfg.c = cfg.c;
  rho_cfg.tau = cfg.tau;

  DescentResult res;
  res.v = v_init;
  for (auto& e : res.v.values.values()) e = std::clamp(e, cfg.v_floor, cfg.v_ceil);
  for (int it = 0; it < cfg.max_iters; ++it) {
    try {
      const MisfitGradient mg = misfit_and_gradient(res.v, misfit, geometry, wavelet, solver);
      Field2D x = scale_to_model(res.v.values, sc);
      Field2D g = sc.jacobian() * mg.values;
      IterateRecord rec;
      rec.iter = it;
      rec.misfit = mg.misfit_value;
      rec.tv = tv_indicator(x);
      rec.objective = rec.misfit + cfg.alpha * rec.tv;
      if (v_true) rec.e_l2 = rel_l2_error(res.v.values, *v_true);

      Field2D dir = g;
      axpy(cfg.alpha, tv_subgradient(x), dir);
      if (precondition) {
        const Field2D k = diag_preconditioner(g, cfg.gamma, cfg.eps, cfg.kappa_max);
        const double rho = guidance_scale(rec.tv, rho_cfg);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] -= rho * (k[j] * dir[j]);
      } else {
        axpy(-cfg.rho0, dir, x);
      }
      Field2D v = scale_from_model(x, sc);
      for (auto& e : v.values()) {
        if (!std::isfinite(e)) throw NumericalError("non-finite iterate");
        e = std::clamp(e, cfg.v_floor, cfg.v_ceil);
      }
      res.log.push_back(rec);
      res.v.values = std::move(v);
    } catch (const Error& e) {
      res.error = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
  }
  return res;
}

}  // namespace

DescentResult w2_tv_descent(const VelocityField& v_init, const ShotGather& d_obs, const AcquisitionGeometry& geometry,
                            const SourceWavelet& wavelet, const SolverConfig& solver, const DescentConfig& config,
                            const Field2D* v_true) {
  MisfitSpec spec = config.misfit;
  spec.kind = MisfitKind::ot_raw;
  return descend(v_init, d_obs, geometry, wavelet, solver, config, spec, false, v_true);
}

DescentResult otwe_tv_descent(const VelocityField& v_init, const ShotGather& d_obs,
                              const AcquisitionGeometry& geometry, const SourceWavelet& wavelet,
                              const SolverConfig& solver, const DescentConfig& config, const Field2D* v_true) {
  return descend(v_init, d_obs, geometry, wavelet, solver, config, config.misfit, config.preconditioned, v_true);
}

}  // namespace otfwi
