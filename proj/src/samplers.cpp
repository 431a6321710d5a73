#include "otfwi/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "otfwi/csv.hpp"
#include "otfwi/error.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

void GuidanceConfig::validate(int n_steps) const {
  std::vector<std::string> p;
  if (!(rho0 >= 0.0) || !std::isfinite(rho0)) p.push_back("rho0 must be >= 0");
  if (!(c > 0.0)) p.push_back("c must be > 0");
  if (!(tau >= 0.0)) p.push_back("tau must be >= 0");
  if (!(gamma >= 0.0)) p.push_back("gamma must be >= 0");
  if (!(eps > 0.0)) p.push_back("eps must be > 0");
  if (!(kappa_max >= 1.0)) p.push_back("kappa_max must be >= 1");
  if (zeta.size() != 1 && static_cast<int>(zeta.size()) != n_steps)
    p.push_back("zeta needs 1 or " + std::to_string(n_steps) + " values");
  for (double z : zeta)
    if (!(z >= 0.0) || !std::isfinite(z)) {
      p.push_back("zeta values must be finite and >= 0");
      break;
    }
  try {
    misfit.validate();
  } catch (const Error& e) {
    p.push_back(e.what());
  }
  if (!p.empty()) throw ConfigError(p);
}

double GuidanceConfig::zeta_at(int i) const { return zeta.size() == 1 ? zeta[0] : zeta.at(i - 1); }

double tv_indicator(const Field2D& v) {
  if (v.nx() < 2 || v.nz() < 2) throw InvalidArgument("TV needs a field of at least 2x2");
  double acc = 0.0;
  for (int ix = 0; ix < v.nx(); ++ix)
    for (int iz = 0; iz < v.nz(); ++iz) {
      if (ix + 1 < v.nx()) acc += std::abs(v(ix + 1, iz) - v(ix, iz));
      if (iz + 1 < v.nz()) acc += std::abs(v(ix, iz + 1) - v(ix, iz));
    }
  return acc / static_cast<double>(v.size());
}

double guidance_scale(double tv, const GuidanceConfig& c) {
  return c.rho0 * std::exp(-std::max(tv - c.tau, 0.0) / c.c);
}

Field2D diag_preconditioner_raw(const Field2D& g, double gamma, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("preconditioner eps must be positive");
  double gmax = 0.0;
  for (double v : g.values()) gmax = std::max(gmax, std::abs(v));
  Field2D k(g.nx(), g.nz());
  for (std::size_t j = 0; j < g.size(); ++j) k[j] = gamma == 0.0 ? 1.0 : std::pow((gmax + eps) / (std::abs(g[j]) + eps), gamma);
  return k;
}

Field2D diag_preconditioner(const Field2D& g, double gamma, double eps, double kappa_max) {
  Field2D k = diag_preconditioner_raw(g, gamma, eps);
  for (auto& v : k.values()) v = std::clamp(v, 1.0, kappa_max);
  return k;
}

Field2D guidance_gradient(const Field2D& x_i, int i, const ScoreModel& model, const Field2D& g,
                          const DiffusionSchedule& schedule, ChainRule mode, bool allow_fallback) {
  schedule.check_step(i);
  const double ab = schedule.alpha_bar(i);
  Field2D out = g;
  if (mode == ChainRule::exact_vjp) {
    if (model.has_vjp()) {
      axpy(1.0 - ab, model.vjp(x_i, i, g), out);
    } else if (allow_fallback) {
      static bool warned = false;
      if (!warned) std::cerr << "warning: score model has no vjp; using the scaled-identity chain rule\n";
      warned = true;
    } else {
      throw InvalidArgument("score model has no vjp and the fallback is disabled");
    }
  }
  out *= 1.0 / std::sqrt(ab);
  return out;
}

Field2D ancestral_step(const Field2D& x_i, const Field2D& x0_hat, int i, const DiffusionSchedule& s,
                       const Field2D& z) {
  s.check_step(i);
  const double ab = s.alpha_bar(i), ab_prev = s.alpha_bar(i - 1), b = s.beta(i);
  Field2D out = (std::sqrt(s.alpha(i)) * (1.0 - ab_prev) / (1.0 - ab)) * x_i;
  axpy(std::sqrt(ab_prev) * b / (1.0 - ab), x0_hat, out);
  axpy(s.sigma_hat(i), z, out);
  return out;
}

WavePotential::WavePotential(MisfitEvaluator misfit, Grid grid, AcquisitionGeometry geometry, SourceWavelet wavelet,
                             SolverConfig solver, FieldScaler scaler, double v_floor, double v_ceil)
    : misfit_(std::move(misfit)),
      grid_(grid),
      geometry_(std::move(geometry)),
      wavelet_(std::move(wavelet)),
      solver_(solver),
      scaler_(scaler),
      v_floor_(v_floor),
      v_ceil_(v_ceil) {
  if (!(v_floor > 0.0 && v_floor < v_ceil)) throw InvalidArgument("velocity bracket needs 0 < v_floor < v_ceil");
}

VelocityField WavePotential::velocity(const Field2D& x) const {
  Field2D v = scale_from_model(x, scaler_);
  for (auto& e : v.values()) e = std::clamp(e, v_floor_, v_ceil_);
  return VelocityField(grid_, std::move(v));
}

Potential::Eval WavePotential::evaluate(const Field2D& x) const {
  const VelocityField v = velocity(x);
  const MisfitGradient mg = misfit_and_gradient(v, misfit_, geometry_, wavelet_, solver_);
  Eval e{mg.misfit_value, mg.values};
  const double jac = scaler_.jacobian();
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double raw = scaler_.from_model(x[j]);
    e.grad[j] = raw < v_floor_ || raw > v_ceil_ ? 0.0 : jac * e.grad[j];
  }
  return e;
}

LinearGaussianPotential::LinearGaussianPotential(std::vector<double> a, int m, int nx, int nz, std::vector<double> y,
                                                 double sigma)
    : a_(std::move(a)), m_(m), nx_(nx), nz_(nz), y_(std::move(y)), sigma_(sigma) {
  if (m < 1 || nx < 1 || nz < 1 || a_.size() != static_cast<std::size_t>(m) * nx * nz ||
      y_.size() != static_cast<std::size_t>(m) || !(sigma > 0.0))
    throw InvalidArgument("inconsistent linear-Gaussian potential");
}

Potential::Eval LinearGaussianPotential::evaluate(const Field2D& x) const {
  const std::size_t n = x.size();
  if (x.nx() != nx_ || x.nz() != nz_) throw InvalidArgument("field shape does not match the linear map");
  Eval e{0.0, Field2D(nx_, nz_, 0.0)};
  for (int r = 0; r < m_; ++r) {
    double res = -y_[r];
    for (std::size_t j = 0; j < n; ++j) res += a_[r * n + j] * x[j];
    e.value += 0.5 * res * res / (sigma_ * sigma_);
    for (std::size_t j = 0; j < n; ++j) e.grad[j] += a_[r * n + j] * res / (sigma_ * sigma_);
  }
  return e;
}

Field2D LinearGaussianPotential::posterior_mean(const Field2D& mu, double s2) const {
  // (I/s2 + AᵀA/σ²) m = mu/s2 + Aᵀy/σ², solved by Cholesky.
  const std::size_t n = static_cast<std::size_t>(nx_) * nz_;
  const double w = 1.0 / (sigma_ * sigma_);
  std::vector<double> H(n * n, 0.0), b(n);
  for (std::size_t p = 0; p < n; ++p) {
    H[p * n + p] = 1.0 / s2;
    b[p] = mu[p] / s2;
    for (int r = 0; r < m_; ++r) b[p] += w * a_[r * n + p] * y_[r];
    for (std::size_t q = 0; q < n; ++q)
      for (int r = 0; r < m_; ++r) H[p * n + q] += w * a_[r * n + p] * a_[r * n + q];
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) H[j * n + j] -= H[j * n + k] * H[j * n + k];
    H[j * n + j] = std::sqrt(H[j * n + j]);
    for (std::size_t r = j + 1; r < n; ++r) {
      for (std::size_t k = 0; k < j; ++k) H[r * n + j] -= H[r * n + k] * H[j * n + k];
      H[r * n + j] /= H[j * n + j];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) b[j] -= H[j * n + k] * b[k];
    b[j] /= H[j * n + j];
  }
  for (std::size_t j = n; j-- > 0;) {
    for (std::size_t k = j + 1; k < n; ++k) b[j] -= H[k * n + j] * b[k];
    b[j] /= H[j * n + j];
  }
  return Field2D(nx_, nz_, std::move(b));
}

void SamplerTrace::write_csv(const std::filesystem::path& path) const {
  CsvTable t({"step", "misfit", "tv", "rho", "e_l2", "psnr", "ssim"});
  for (const auto& s : steps) t.add_row({static_cast<long long>(s.i), s.misfit, s.tv, s.rho, s.e_l2, s.psnr, s.ssim});
  t.write(path);
}

SampleResult guided_sample(const Potential& potential, const ScoreModel& model, const DiffusionSchedule& schedule,
                           const GuidanceConfig& config, GuidanceKind kind, int nx, int nz, std::uint64_t seed,
                           const TruthRef* truth) {
  config.validate(schedule.N);
  Rng rng(seed, "sampler");
  SampleResult res;
  Field2D x = rng.normal_field(nx, nz);
  res.trace.steps.reserve(schedule.N);
  for (int i = schedule.N; i >= 1; --i) {
    try {
      const Field2D x0_hat = clean_estimate(x, i, model, schedule);
      const Field2D z = rng.normal_field(nx, nz);
      Field2D next = ancestral_step(x, x0_hat, i, schedule, z);
      const Potential::Eval ev = potential.evaluate(x0_hat);
      SamplerStep rec;
      rec.i = i;
      rec.misfit = ev.value;
      rec.tv = tv_indicator(x0_hat);
      const Field2D gi =
          guidance_gradient(x, i, model, ev.grad, schedule, config.chain_rule, config.vjp_fallback);
      if (kind == GuidanceKind::dps) {
        rec.rho = config.zeta_at(i);
        for (std::size_t j = 0; j < next.size(); ++j) next[j] -= rec.rho * gi[j];
      } else {
        rec.rho = guidance_scale(rec.tv, config);
        const Field2D k = diag_preconditioner(ev.grad, config.gamma, config.eps, config.kappa_max);
        for (std::size_t j = 0; j < next.size(); ++j) next[j] -= rec.rho * (k[j] * gi[j]);
      }
      for (double v : next.values())
        if (!std::isfinite(v)) throw NumericalError("non-finite diffusion state");
      if (truth) {
        const MetricsRecord m = compute_metrics(scale_from_model(x0_hat, truth->scaler), truth->v_true);
        rec.e_l2 = m.e_l2;
        rec.psnr = m.psnr;
        rec.ssim = m.ssim;
      }
      res.trace.steps.push_back(rec);
      x = std::move(next);
    } catch (const SamplerError&) {
      throw;
    } catch (const Error& e) {
      throw SamplerError(i, e.what());
    }
  }
  res.x0 = std::move(x);
  return res;
}

namespace {

InversionResult run_wave(const WaveProblem& p, const ScoreModel& model, const DiffusionSchedule& schedule,
                         const GuidanceConfig& config, GuidanceKind kind, std::uint64_t seed, const Field2D* v_true) {
  p.geometry.validate(p.grid);
  const WavePotential pot(MisfitEvaluator(p.d_obs, config.misfit), p.grid, p.geometry, p.wavelet, p.solver, p.scaler,
                          p.v_floor, p.v_ceil);
  std::optional<TruthRef> truth;
  if (v_true) truth = TruthRef{*v_true, p.scaler};
  SampleResult r = guided_sample(pot, model, schedule, config, kind, p.grid.nx, p.grid.nz, seed,
                                 truth ? &*truth : nullptr);
  return {pot.velocity(r.x0), std::move(r.trace)};
}

}  // namespace

InversionResult dps_sample(const WaveProblem& problem, const ScoreModel& model, const DiffusionSchedule& schedule,
                           const GuidanceConfig& config, std::uint64_t seed, const Field2D* v_true) {
  if (config.misfit.kind != MisfitKind::mse) throw InvalidArgument("DPS uses the MSE misfit");
  return run_wave(problem, model, schedule, config, GuidanceKind::dps, seed, v_true);
}

InversionResult otwepdps_sample(const WaveProblem& problem, const ScoreModel& model,
                                const DiffusionSchedule& schedule, const GuidanceConfig& config, std::uint64_t seed,
                                const Field2D* v_true) {
  return run_wave(problem, model, schedule, config, GuidanceKind::preconditioned, seed, v_true);
}

}  // namespace otfwi
