#include "otfwi/misfit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otfwi/error.hpp"
#include "otfwi/parallel.hpp"

namespace otfwi {

namespace {

constexpr double kMinIncrement = 1e-15;

double trapz_weight(std::size_t j, std::size_t n, double h) { return (j == 0 || j + 1 == n) ? h / 2.0 : h; }

std::vector<double> xi_weights(int n) {
  std::vector<double> w(n);
  const double h = 1.0 / (n - 1);
  for (int j = 0; j < n; ++j) w[j] = trapz_weight(j, n, h);
  return w;
}

void require_same(const ShotGather& a, const ShotGather& b) {
  if (!a.values.same_shape(b.values)) throw InvalidArgument("shot gather shapes differ");
}

// Densify y (already shifted) in place of `d`; returns Z.
double densify(std::span<const double> y, double dt, TraceDensity& d) {
  const std::size_t n = y.size();
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += trapz_weight(j, n, dt) * y[j];
  const double denom = z + d.eps_prime;
  d.pdf.resize(n);
  d.cdf.resize(n);
  for (std::size_t j = 0; j < n; ++j) d.pdf[j] = y[j] / denom;
  d.cdf[0] = 0.0;
  for (std::size_t j = 1; j < n; ++j) d.cdf[j] = d.cdf[j - 1] + dt * (d.pdf[j - 1] + d.pdf[j]) / 2.0;
  d.dt = dt;
  return z;
}

// Sweep over sorted ξ_j; segment index per node (-1: first node, nt: beyond last).
struct QuantileSweep {
  std::vector<double> q;
  std::vector<int> seg;
};

QuantileSweep sweep(const TraceDensity& d, int n_xi) {
  QuantileSweep s{std::vector<double>(n_xi), std::vector<int>(n_xi)};
  const auto& F = d.cdf;
  const int nt = static_cast<int>(F.size());
  int k = 0;
  for (int j = 0; j < n_xi; ++j) {
    const double xi = static_cast<double>(j) / (n_xi - 1);
    while (k < nt && F[k] < xi) ++k;
    if (k == 0) {
      s.q[j] = 0.0;
      s.seg[j] = -1;
    } else if (k == nt) {
      s.q[j] = d.t_end();
      s.seg[j] = nt;
    } else {
      const double D = std::max(F[k] - F[k - 1], kMinIncrement);
      s.q[j] = (k - 1) * d.dt + d.dt * (xi - F[k - 1]) / D;
      s.seg[j] = k;
    }
  }
  return s;
}

}  // namespace

void MisfitSpec::validate() const {
  if (n_quantile < 2) throw InvalidArgument("n_quantile must be >= 2");
  if (!(k >= 0.0)) throw InvalidArgument("k must be >= 0");
  if (p != 2) throw InvalidArgument("only p = 2 is supported");
  if (!(sigma_weight > 0.0)) throw InvalidArgument("sigma_weight must be positive");
  if (!(shift_factor >= 1.0)) throw InvalidArgument("shift_factor must be >= 1");
}

MisfitSpec inversion_misfit(MisfitKind kind) {
  MisfitSpec m;
  m.kind = kind;
  m.negative_policy = NegativePolicy::clip;
  return m;
}

const char* misfit_kind_name(MisfitKind k) noexcept {
  switch (k) {
    case MisfitKind::mse: return "mse";
    case MisfitKind::ot_raw: return "ot_raw";
    case MisfitKind::ot_enhanced: return "ot_enhanced";
  }
  return "?";
}

MisfitKind parse_misfit_kind(const std::string& s) {
  if (s == "mse") return MisfitKind::mse;
  if (s == "ot_raw") return MisfitKind::ot_raw;
  if (s == "ot_enhanced") return MisfitKind::ot_enhanced;
  throw InvalidArgument("unknown misfit kind: " + s);
}

WeightField amplitude_weights(const ShotGather& d_obs, double k) {
  if (!(k >= 0.0)) throw InvalidArgument("k must be >= 0");
  double mx = 0.0;
  for (double x : d_obs.values.raw()) mx = std::max(mx, std::abs(x));
  if (mx == 0.0) throw InvalidArgument("observations are all zero");
  WeightField w{d_obs.values, k};
  for (auto& x : w.values.raw()) x = 1.0 / (1.0 + k * (std::abs(x) / mx));
  return w;
}

ShotGather apply_weights(const ShotGather& d, const WeightField& w) {
  if (!d.values.same_shape(w.values)) throw InvalidArgument("weight shape mismatch");
  ShotGather out = d;
  auto& v = out.values.raw();
  const auto& wv = w.values.raw();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= wv[i];
  return out;
}

TraceDensity trace_to_density(std::span<const double> trace, double c_prime, double dt) {
  if (trace.size() < 2) throw InvalidArgument("trace needs at least two samples");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  std::vector<double> y(trace.begin(), trace.end());
  for (auto& x : y) {
    x += c_prime;
    if (x < 0.0) throw InvalidArgument("trace negative after shift; c' too small");
  }
  TraceDensity d;
  d.c_prime = c_prime;
  densify(y, dt, d);
  return d;
}

double quantile(const TraceDensity& d, double xi) {
  xi = std::clamp(xi, 0.0, 1.0);
  const auto& F = d.cdf;
  const auto it = std::lower_bound(F.begin(), F.end(), xi);
  if (it == F.begin()) return 0.0;
  if (it == F.end()) return d.t_end();
  const auto k = static_cast<std::size_t>(it - F.begin());
  const double D = std::max(F[k] - F[k - 1], kMinIncrement);
  return (k - 1) * d.dt + d.dt * (xi - F[k - 1]) / D;
}

std::vector<double> quantiles(const TraceDensity& d, int n_xi) {
  if (n_xi < 2) throw InvalidArgument("n_xi must be >= 2");
  return sweep(d, n_xi).q;
}

double w2_distance(const TraceDensity& a, const TraceDensity& b, int n_xi) {
  const auto qa = quantiles(a, n_xi);
  const auto qb = quantiles(b, n_xi);
  const auto w = xi_weights(n_xi);
  double s = 0.0;
  for (int j = 0; j < n_xi; ++j) s += w[j] * (qa[j] - qb[j]) * (qa[j] - qb[j]);
  return std::sqrt(s);
}

double obs_scale(const std::vector<TraceDensity>& obs, int p, int n_xi) {
  if (obs.empty()) throw InvalidArgument("obs_scale needs at least one density");
  if (p != 2) throw InvalidArgument("only p = 2 is supported");
  const auto w = xi_weights(n_xi);
  double total = 0.0;
  for (const auto& d : obs) {
    const auto q = quantiles(d, n_xi);
    double s = 0.0;
    for (int j = 0; j < n_xi; ++j) s += w[j] * q[j] * q[j];
    total += std::sqrt(s);
  }
  return total;
}

double mse_misfit(const ShotGather& d_syn, const ShotGather& d_obs, double sigma_weight) {
  require_same(d_syn, d_obs);
  const auto& a = d_syn.values.raw();
  const auto& b = d_obs.values.raw();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return 0.5 * s * sigma_weight;
}

double ot_objective(const ShotGather& d_syn, const ShotGather& d_obs, const MisfitSpec& spec) {
  return MisfitEvaluator(d_obs, spec).value(d_syn);
}

Array3D misfit_trace_gradient(const ShotGather& d_syn, const ShotGather& d_obs, const MisfitSpec& spec) {
  Array3D g;
  MisfitEvaluator(d_obs, spec).value_and_gradient(d_syn, g);
  return g;
}

MisfitEvaluator::MisfitEvaluator(const ShotGather& d_obs, const MisfitSpec& spec) : obs_(d_obs), spec_(spec) {
  spec_.validate();
  if (spec_.kind == MisfitKind::mse) return;
  const int ns = obs_.n_sources(), nr = obs_.n_receivers(), nt = obs_.nt();
  if (nt < 2) throw InvalidArgument("OT misfits need nt >= 2");
  ShotGather tilde = obs_;
  if (spec_.kind == MisfitKind::ot_enhanced) {
    auto w = amplitude_weights(obs_, spec_.k);
    tilde = apply_weights(obs_, w);
    weights_ = std::move(w.values);
  }
  double gmax = 0.0;
  for (double x : tilde.values.raw()) gmax = std::max(gmax, std::abs(x));
  if (gmax == 0.0) throw InvalidArgument("observations are all zero");
  const double dt = obs_.geometry.dt;
  shift_.resize(static_cast<std::size_t>(ns) * nr);
  q_obs_.resize(shift_.size());
  xi_weight_ = xi_weights(spec_.n_quantile);
  double total = 0.0;
  for (int s = 0; s < ns; ++s)
    for (int r = 0; r < nr; ++r) {
      const auto row = tilde.values.row(s, r);
      const double mn = *std::min_element(row.begin(), row.end());
      // A flat zero trace would give c' = 0 and an empty density.
      const double c = std::max(spec_.shift_factor * std::abs(mn), 1e-12 * gmax);
      const std::size_t pr = static_cast<std::size_t>(s) * nr + r;
      shift_[pr] = c;
      const auto dens = trace_to_density(row, c, dt);
      q_obs_[pr] = quantiles(dens, spec_.n_quantile);
      double m2 = 0.0;
      for (int j = 0; j < spec_.n_quantile; ++j) m2 += xi_weight_[j] * q_obs_[pr][j] * q_obs_[pr][j];
      total += spec_.kind == MisfitKind::ot_enhanced ? std::sqrt(m2) : m2;
    }
  norm_ = total;
}

double MisfitEvaluator::value(const ShotGather& d_syn) const { return evaluate(d_syn, nullptr); }

double MisfitEvaluator::value_and_gradient(const ShotGather& d_syn, Array3D& grad) const {
  if (!grad.same_shape(d_syn.values)) grad = Array3D(d_syn.n_sources(), d_syn.n_receivers(), d_syn.nt());
  return evaluate(d_syn, &grad);
}

double MisfitEvaluator::evaluate(const ShotGather& d_syn, Array3D* grad) const {
  require_same(d_syn, obs_);
  std::vector<double> per_shot(static_cast<std::size_t>(obs_.n_sources()), 0.0);
  parallel_for(per_shot.size(), [&](std::size_t si) {
    const int s = static_cast<int>(si);
    TraceArray g;
    per_shot[si] = shot_value(s, d_syn.shot(s), grad ? &g : nullptr);
    if (grad)
      for (int r = 0; r < obs_.n_receivers(); ++r) std::ranges::copy(g.raw().begin() + r * obs_.nt(),
                                                                      g.raw().begin() + (r + 1) * obs_.nt(),
                                                                      grad->row(s, r).begin());
  });
  double total = 0.0;
  for (double t : per_shot) total += t;
  return total;
}

double MisfitEvaluator::shot_value(int s, const TraceArray& syn, TraceArray* grad) const {
  const int nr = obs_.n_receivers(), nt = obs_.nt(), nq = spec_.n_quantile;
  if (s < 0 || s >= obs_.n_sources()) throw InvalidArgument("shot index out of range");
  if (syn.nx() != nr || syn.nz() != nt) throw InvalidArgument("synthetic shot shape mismatch");
  if (grad && !grad->same_shape(syn)) *grad = TraceArray(nr, nt);

  if (spec_.kind == MisfitKind::mse) {
    double acc = 0.0;
    for (int r = 0; r < nr; ++r) {
      const auto orow = obs_.values.row(s, r);
      for (int j = 0; j < nt; ++j) {
        const double res = syn(r, j) - orow[j];
        acc += res * res;
        if (grad) (*grad)(r, j) = spec_.sigma_weight * res;
      }
    }
    return 0.5 * acc * spec_.sigma_weight;
  }

  const double dt = obs_.geometry.dt;
  const bool enhanced = spec_.kind == MisfitKind::ot_enhanced;
  const bool clip = spec_.negative_policy == NegativePolicy::clip;
  std::vector<double> y(nt), pbar(nt), fbar(nt), om(nt, 1.0);
  std::vector<char> clipped(nt, 0);
  TraceDensity dens;
  double total = 0.0;
  for (int r = 0; r < nr; ++r) {
    const std::size_t pr = static_cast<std::size_t>(s) * nr + r;
    if (enhanced) std::ranges::copy(weights_.row(s, r), om.begin());
    for (int j = 0; j < nt; ++j) {
      y[j] = om[j] * syn(r, j) + shift_[pr];
      clipped[j] = 0;
      if (!(y[j] >= 0.0)) {
        if (!clip || !std::isfinite(y[j])) throw InvalidArgument("synthetic trace negative after shift");
        y[j] = 0.0;
        clipped[j] = 1;
      }
    }
    const double z = densify(y, dt, dens);
    const auto sw = sweep(dens, nq);
    const auto& qo = q_obs_[pr];
    double w2sq = 0.0;
    for (int j = 0; j < nq; ++j) w2sq += xi_weight_[j] * (sw.q[j] - qo[j]) * (sw.q[j] - qo[j]);
    const double term = enhanced ? std::sqrt(w2sq) : w2sq;
    total += term;
    if (!grad) continue;

    // dΦ/d(W2²) for this pair.
    const double scale = enhanced ? (term > 0.0 ? 0.5 / (term * norm_) : 0.0) : 1.0 / norm_;
    std::ranges::fill(fbar, 0.0);
    if (scale != 0.0) {
      const auto& F = dens.cdf;
      for (int j = 0; j < nq; ++j) {
        const int k = sw.seg[j];
        if (k <= 0 || k >= nt) continue;
        const double D = F[k] - F[k - 1];
        if (D < kMinIncrement) continue;
        const double qbar = scale * xi_weight_[j] * 2.0 * (sw.q[j] - qo[j]);
        const double xi = static_cast<double>(j) / (nq - 1);
        fbar[k - 1] += qbar * dt * (xi - F[k]) / (D * D);
        fbar[k] -= qbar * dt * (xi - F[k - 1]) / (D * D);
      }
    }
    // Cumulative trapezoid adjoint via suffix sums.
    std::ranges::fill(pbar, 0.0);
    double suffix = 0.0;
    for (int k = nt - 1; k >= 1; --k) {
      suffix += fbar[k];
      pbar[k - 1] += 0.5 * dt * suffix;
      pbar[k] += 0.5 * dt * suffix;
    }
    const double denom = z + dens.eps_prime;
    double py = 0.0;
    for (int j = 0; j < nt; ++j) py += pbar[j] * y[j];
    for (int j = 0; j < nt; ++j) {
      const double ybar = pbar[j] / denom - trapz_weight(j, nt, dt) * py / (denom * denom);
      (*grad)(r, j) = clipped[j] ? 0.0 : om[j] * ybar;
    }
  }
  return total / norm_;
}

}  // namespace otfwi
