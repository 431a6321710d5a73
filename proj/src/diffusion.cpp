#include "otfwi/diffusion.hpp"

#include <cmath>
#include <string>

#include "otfwi/error.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

void DiffusionSchedule::check_step(int i) const {
  if (i < 1 || i > N) throw InvalidArgument("diffusion step " + std::to_string(i) + " outside 1.." + std::to_string(N));
}

DiffusionSchedule make_schedule(int N, double beta_start, double beta_end, ScheduleKind) {
  if (N < 1) throw InvalidArgument("schedule needs N >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw InvalidArgument("schedule needs 0 < beta_start <= beta_end < 1");
  DiffusionSchedule s;
  s.N = N;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta_.resize(N);
  s.alpha_.resize(N);
  s.alpha_bar_.resize(N);
  s.sigma_hat_.resize(N);
  double ab = 1.0;
  for (int k = 0; k < N; ++k) {
    const double b = N == 1 ? beta_start : beta_start + (beta_end - beta_start) * k / (N - 1);
    const double ab_prev = ab;
    ab *= 1.0 - b;
    s.beta_[k] = b;
    s.alpha_[k] = 1.0 - b;
    s.alpha_bar_[k] = ab;
    s.sigma_hat_[k] = k == 0 ? 0.0 : std::sqrt(b * (1.0 - ab_prev) / (1.0 - ab));
  }
  return s;
}

Field2D forward_noising_with(const Field2D& x0, int i, const DiffusionSchedule& schedule, const Field2D& z) {
  schedule.check_step(i);
  if (!x0.same_shape(z)) throw InvalidArgument("noise shape mismatch");
  const double ab = schedule.alpha_bar(i);
  Field2D out = std::sqrt(ab) * x0;
  axpy(std::sqrt(1.0 - ab), z, out);
  return out;
}

Field2D forward_noising(const Field2D& x0, int i, const DiffusionSchedule& schedule, std::uint64_t seed,
                        Field2D* z_out) {
  Rng rng(seed);
  const Field2D z = rng.normal_field(x0.nx(), x0.nz());
  if (z_out) *z_out = z;
  return forward_noising_with(x0, i, schedule, z);
}

GaussianScore::GaussianScore(Field2D mu, double s2, DiffusionSchedule schedule)
    : mu_(std::move(mu)), s2_(s2), sched_(std::move(schedule)) {
  if (!(s2_ > 0.0)) throw InvalidArgument("Gaussian prior variance must be positive");
}

Field2D GaussianScore::score(const Field2D& x, int i) const {
  sched_.check_step(i);
  const double ab = sched_.alpha_bar(i);
  const double var = ab * s2_ + 1.0 - ab;
  Field2D out = x;
  axpy(-std::sqrt(ab), mu_, out);
  out *= -1.0 / var;
  return out;
}

Field2D GaussianScore::vjp(const Field2D&, int i, const Field2D& c) const {
  sched_.check_step(i);
  const double ab = sched_.alpha_bar(i);
  return (-1.0 / (ab * s2_ + 1.0 - ab)) * c;
}

Field2D GaussianScore::posterior_mean(const Field2D& x, int i) const {
  const double ab = sched_.alpha_bar(i);
  const double var = ab * s2_ + 1.0 - ab;
  Field2D out = (std::sqrt(ab) * s2_ / var) * x;
  axpy((1.0 - ab) / var, mu_, out);
  return out;
}

double GaussianScore::posterior_variance(int i) const {
  const double ab = sched_.alpha_bar(i);
  return (1.0 - ab) * s2_ / (ab * s2_ + 1.0 - ab);
}

GmmScore::GmmScore(std::vector<GmmComponent> components, DiffusionSchedule schedule)
    : comps_(std::move(components)), sched_(std::move(schedule)) {
  if (comps_.empty()) throw InvalidArgument("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : comps_) {
    if (!(c.weight > 0.0) || !(c.s2 > 0.0)) throw InvalidArgument("mixture weights and variances must be positive");
    if (!c.mu.same_shape(comps_.front().mu)) throw InvalidArgument("mixture means differ in shape");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
}

void GmmScore::evaluate(const Field2D& x, int i, std::vector<double>& resp, std::vector<Field2D>& comp) const {
  sched_.check_step(i);
  const double ab = sched_.alpha_bar(i);
  const double d = static_cast<double>(x.size());
  resp.assign(comps_.size(), 0.0);
  comp.clear();
  double lmax = -INFINITY;
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    const double var = ab * comps_[k].s2 + 1.0 - ab;
    Field2D r = x;
    axpy(-std::sqrt(ab), comps_[k].mu, r);
    const double logp = std::log(comps_[k].weight) - 0.5 * d * std::log(var) - 0.5 * dot(r, r) / var;
    r *= -1.0 / var;
    comp.push_back(std::move(r));
    resp[k] = logp;
    lmax = std::max(lmax, logp);
  }
  double z = 0.0;
  for (auto& l : resp) z += (l = std::exp(l - lmax));
  for (auto& l : resp) l /= z;
}

Field2D GmmScore::score(const Field2D& x, int i) const {
  std::vector<double> resp;
  std::vector<Field2D> comp;
  evaluate(x, i, resp, comp);
  Field2D out(x.nx(), x.nz(), 0.0);
  for (std::size_t k = 0; k < comp.size(); ++k) axpy(resp[k], comp[k], out);
  return out;
}

// J = Σ r_k (-I/var_k) + Σ r_k s_k s_kᵀ - s sᵀ  (symmetric), applied to c.
Field2D GmmScore::vjp(const Field2D& x, int i, const Field2D& c) const {
  std::vector<double> resp;
  std::vector<Field2D> comp;
  evaluate(x, i, resp, comp);
  const double ab = sched_.alpha_bar(i);
  Field2D s(x.nx(), x.nz(), 0.0);
  for (std::size_t k = 0; k < comp.size(); ++k) axpy(resp[k], comp[k], s);
  Field2D out(x.nx(), x.nz(), 0.0);
  for (std::size_t k = 0; k < comp.size(); ++k) {
    const double var = ab * comps_[k].s2 + 1.0 - ab;
    axpy(-resp[k] / var, c, out);
    axpy(resp[k] * dot(comp[k], c), comp[k], out);
  }
  axpy(-dot(s, c), s, out);
  return out;
}

Field2D clean_estimate_from_score(const Field2D& x, int i, const Field2D& score, const DiffusionSchedule& schedule) {
  const double ab = schedule.alpha_bar(i);
  if (ab < 1e-12) throw NumericalError("alpha_bar underflow in clean estimate");
  Field2D out = x;
  axpy(1.0 - ab, score, out);
  out *= 1.0 / std::sqrt(ab);
  return out;
}

Field2D clean_estimate(const Field2D& x, int i, const ScoreModel& model, const DiffusionSchedule& schedule) {
  schedule.check_step(i);
  return clean_estimate_from_score(x, i, model.score(x, i), schedule);
}

FieldScaler::FieldScaler(double lo, double hi) : v_min(lo), v_max(hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("scaler needs v_min < v_max");
}

Field2D scale_to_model(const Field2D& v, const FieldScaler& s) {
  Field2D out = v;
  for (auto& x : out.values()) x = s.to_model(x);
  return out;
}

Field2D scale_from_model(const Field2D& x, const FieldScaler& s) {
  Field2D out = x;
  for (auto& v : out.values()) v = s.from_model(v);
  return out;
}

double dsm_loss(const Field2D& score, const Field2D& x, const Field2D& x0, int i, const DiffusionSchedule& schedule) {
  const double ab = schedule.alpha_bar(i);
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double target = -(x[j] - std::sqrt(ab) * x0[j]) / (1.0 - ab);
    acc += (score[j] - target) * (score[j] - target);
  }
  return (1.0 - ab) * acc / static_cast<double>(x.size());
}

double eps_loss(const Field2D& eps_hat, const Field2D& eps) {
  double acc = 0.0;
  for (std::size_t j = 0; j < eps.size(); ++j) acc += (eps_hat[j] - eps[j]) * (eps_hat[j] - eps[j]);
  return acc / static_cast<double>(eps.size());
}

}  // namespace otfwi
