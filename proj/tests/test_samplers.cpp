#include <doctest.h>

#include <cmath>

#include "otfwi/rng.hpp"
#include "probes.hpp"
#include "otfwi/samplers.hpp"

using namespace otfwi;

namespace {

class ZeroPotential final : public Potential {
 public:
  Eval evaluate(const Field2D& x) const override { return {0.0, Field2D(x.nx(), x.nz(), 0.0)}; }
};

// Φ(x) = ½ Σ w_j (x_j - t_j)²
class QuadraticPotential final : public Potential {
 public:
  QuadraticPotential(Field2D w, Field2D t) : w_(std::move(w)), t_(std::move(t)) {}
  Eval evaluate(const Field2D& x) const override {
    Eval e{0.0, Field2D(x.nx(), x.nz())};
    for (std::size_t j = 0; j < x.size(); ++j) {
      e.value += 0.5 * w_[j] * (x[j] - t_[j]) * (x[j] - t_[j]);
      e.grad[j] = w_[j] * (x[j] - t_[j]);
    }
    return e;
  }

 private:
  Field2D w_, t_;
};

class ThrowingPotential final : public Potential {
 public:
  mutable int calls = 0;
  Eval evaluate(const Field2D& x) const override {
    if (++calls == 4) throw NumericalError("boom");
    return {0.0, Field2D(x.nx(), x.nz(), 0.0)};
  }
};

}  // namespace

TEST_CASE("tv indicator") {
  CHECK(tv_indicator(Field2D(5, 3, 7.0)) == 0.0);
  Field2D f(2, 2);
  f(1, 0) = f(1, 1) = 1.0;
  CHECK(tv_indicator(f) == 0.5);
  const Field2D r = Rng(1).normal_field(6, 5);
  CHECK(tv_indicator(-3.0 * r) == doctest::Approx(3.0 * tv_indicator(r)).epsilon(1e-14));
  CHECK_THROWS_AS(tv_indicator(Field2D(1, 4)), InvalidArgument);
}

TEST_CASE("guidance scale") {
  GuidanceConfig c;
  c.rho0 = 2.0;
  c.tau = 0.3;
  c.c = 0.1;
  CHECK(guidance_scale(0.1, c) == 2.0);
  CHECK(guidance_scale(0.3, c) == 2.0);
  CHECK(guidance_scale(0.31, c) < 2.0);
  CHECK(guidance_scale(0.5, c) < guidance_scale(0.4, c));
  c.tau = 0.0;
  CHECK(guidance_scale(0.1, c) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
  for (double tv : {0.0, 0.01, 1.0, 50.0}) {
    const double rho = guidance_scale(tv, c);
    CHECK(rho > 0.0);
    CHECK(rho <= c.rho0);
    CHECK((rho == c.rho0) == (tv <= c.tau));
  }
}

TEST_CASE("diagonal preconditioner") {
  Field2D g(2, 1);
  g[0] = 1.0;
  g[1] = 0.0;
  const Field2D raw = diag_preconditioner_raw(g, 1.0, 1e-4);
  CHECK(raw[0] == 1.0);
  CHECK(raw[1] == doctest::Approx(1.0001e4).epsilon(1e-12));
  const Field2D k = diag_preconditioner(g, 1.0, 1e-4, 1e3);
  CHECK(k[0] == 1.0);
  CHECK(k[1] == 1e3);
  const Field2D big = Rng(2).normal_field(5, 5);
  const Field2D k0 = diag_preconditioner(big, 0.0, 1e-4, 1e3);
  for (double v : k0.values()) CHECK(v == 1.0);
  const Field2D kb = diag_preconditioner(big, 0.55, 1e-4, 1e3);
  std::size_t arg = 0;
  for (std::size_t j = 0; j < big.size(); ++j)
    if (std::abs(big[j]) > std::abs(big[arg])) arg = j;
  CHECK(kb[arg] == 1.0);
  for (double v : kb.values()) {
    CHECK(v >= 1.0);
    CHECK(v <= 1e3);
  }
  const Field2D uniform = diag_preconditioner(Field2D(3, 3, -2.0), 0.7, 1e-4, 1e3);
  for (double v : uniform.values()) CHECK(v == 1.0);
  // positive metric: <g, D g> >= 0
  double gdg = 0.0;
  for (std::size_t j = 0; j < big.size(); ++j) gdg += big[j] * kb[j] * big[j];
  CHECK(gdg >= 0.0);
}

TEST_CASE("guidance gradient") {
  const auto s = make_schedule();
  Rng rng(3);
  const Field2D x = rng.normal_field(8, 8), g = rng.normal_field(8, 8), g2 = rng.normal_field(8, 8);
  for (ChainRule mode : {ChainRule::exact_vjp, ChainRule::scaled_identity}) {
    const Field2D out = guidance_gradient(x, 300, ZeroScore{}, g, s, mode);
    for (std::size_t j = 0; j < g.size(); ++j)
      CHECK(out[j] == doctest::Approx(g[j] / std::sqrt(s.alpha_bar(300))).epsilon(1e-15));
  }

  Field2D mu(8, 8);
  for (std::size_t j = 0; j < mu.size(); ++j) mu[j] = 0.1 * double(j % 7) - 0.3;
  const GaussianScore model(mu, 0.4, s);
  Field2D w(8, 8), t(8, 8);
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = 0.5 + 0.02 * double(j);
    t[j] = std::sin(double(j));
  }
  const QuadraticPotential phi(w, t);
  for (int i : {20, 400, 900}) {
    const auto composite = [&](const Field2D& xi) { return phi.evaluate(clean_estimate(xi, i, model, s)).value; };
    const Field2D gx = phi.evaluate(clean_estimate(x, i, model, s)).grad;
    const Field2D an = guidance_gradient(x, i, model, gx, s, ChainRule::exact_vjp);
    double gmax = 0.0, worst = 0.0;
    for (double v : an.values()) gmax = std::max(gmax, std::abs(v));
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double h = 1e-5;
      Field2D xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      worst = std::max(worst, std::abs((composite(xp) - composite(xm)) / (2 * h) - an[j]));
    }
    CHECK(worst / gmax < 1e-4);

    const Field2D lin = guidance_gradient(x, i, model, 2.0 * g + g2, s, ChainRule::exact_vjp);
    const Field2D sep = 2.0 * guidance_gradient(x, i, model, g, s, ChainRule::exact_vjp) +
                        guidance_gradient(x, i, model, g2, s, ChainRule::exact_vjp);
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(lin[j] == doctest::Approx(sep[j]).epsilon(1e-12));
  }
}

TEST_CASE("ancestral step") {
  const auto s = make_schedule();
  Rng rng(4);
  const Field2D x0 = rng.normal_field(3, 3), z = rng.normal_field(3, 3);
  for (int i : {2, 50, 999}) {
    const Field2D xi = std::sqrt(s.alpha_bar(i)) * x0;
    const Field2D out = ancestral_step(xi, x0, i, s, Field2D(3, 3, 0.0));
    for (std::size_t j = 0; j < x0.size(); ++j) CHECK(std::abs(out[j] - std::sqrt(s.alpha_bar(i - 1)) * x0[j]) < 1e-12);
  }
  // i = 1 ignores the noise
  CHECK(ancestral_step(x0, x0, 1, s, z) == ancestral_step(x0, x0, 1, s, Field2D(3, 3, 0.0)));
  // β_i → 0 with ᾱ_{i-1} held fixed: output → x_i
  DiffusionSchedule tiny = make_schedule(2, 0.5, 0.5);
  tiny.beta_[1] = 1e-12;
  tiny.alpha_[1] = 1.0 - 1e-12;
  tiny.alpha_bar_[1] = tiny.alpha_bar_[0] * tiny.alpha_[1];
  tiny.sigma_hat_[1] = std::sqrt(1e-12 * (1.0 - tiny.alpha_bar_[0]) / (1.0 - tiny.alpha_bar_[1]));
  const Field2D out = ancestral_step(z, x0, 2, tiny, rng.normal_field(3, 3));
  for (std::size_t j = 0; j < z.size(); ++j) CHECK(std::abs(out[j] - z[j]) < 1e-5);
}

TEST_CASE("unconditional sampling reproduces prior moments") {
  const auto s = make_schedule();
  const Field2D mu(2, 2, 0.4);
  const double s2 = 0.09;
  const GaussianScore model(mu, s2, s);
  GuidanceConfig c;
  c.zeta = {0.0};
  const int runs = 200;
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (int r = 0; r < runs; ++r) {
    const auto res = guided_sample(ZeroPotential{}, model, s, c, GuidanceKind::dps, 2, 2, 100 + r);
    for (int j = 0; j < 4; ++j) {
      sum[j] += res.x0[j];
      sq[j] += res.x0[j] * res.x0[j];
    }
  }
  for (int j = 0; j < 4; ++j) {
    const double m = sum[j] / runs, v = sq[j] / runs - m * m;
    CHECK(std::abs(m - 0.4) < 3.0 * std::sqrt(s2 / runs));
    CHECK(std::abs(v - s2) < 3.0 * s2 * std::sqrt(2.0 / (runs - 1)));
  }
}

TEST_CASE("sampler determinism, trace and zero guidance") {
  const auto s = make_schedule(50, 1e-3, 0.2);
  const Field2D mu(3, 3, 0.1);
  const GaussianScore model(mu, 0.5, s);
  const QuadraticPotential phi(Field2D(3, 3, 1.0), Field2D(3, 3, 0.8));
  GuidanceConfig c;
  c.rho0 = 0.05;
  const auto a = guided_sample(phi, model, s, c, GuidanceKind::preconditioned, 3, 3, 9);
  const auto b = guided_sample(phi, model, s, c, GuidanceKind::preconditioned, 3, 3, 9);
  CHECK(a.x0 == b.x0);
  REQUIRE(a.trace.steps.size() == 50);
  for (int k = 0; k < 50; ++k) CHECK(a.trace.steps[k].i == 50 - k);
  for (const auto& st : a.trace.steps) {
    CHECK(st.rho > 0.0);
    CHECK(st.rho <= c.rho0);
  }

  c.rho0 = 0.0;
  GuidanceConfig off;
  off.zeta = {0.0};
  const auto p0 = guided_sample(phi, model, s, c, GuidanceKind::preconditioned, 3, 3, 9);
  const auto un = guided_sample(ZeroPotential{}, model, s, off, GuidanceKind::dps, 3, 3, 9);
  CHECK(p0.x0 == un.x0);
  CHECK(a.x0 != un.x0);
}

TEST_CASE("preconditioned sampler collapses to DPS") {
  const auto s = make_schedule(40, 1e-3, 0.2);
  const Field2D mu(3, 3, -0.2);
  const GaussianScore model(mu, 0.3, s);
  Field2D w(3, 3), t(3, 3);
  for (std::size_t j = 0; j < 9; ++j) {
    w[j] = 1.0 + 0.3 * double(j);
    t[j] = 0.1 * double(j);
  }
  const QuadraticPotential phi(w, t);
  GuidanceConfig p;
  p.rho0 = 0.02;
  p.gamma = 0.0;
  p.tau = 1e9;
  p.chain_rule = ChainRule::scaled_identity;
  GuidanceConfig d = p;
  d.zeta = {p.rho0};
  const auto a = guided_sample(phi, model, s, p, GuidanceKind::preconditioned, 3, 3, 5);
  const auto b = guided_sample(phi, model, s, d, GuidanceKind::dps, 3, 3, 5);
  CHECK(a.x0 == b.x0);
  for (std::size_t k = 0; k < a.trace.steps.size(); ++k) CHECK(a.trace.steps[k].misfit == b.trace.steps[k].misfit);

  // per-step zeta schedule
  GuidanceConfig sched = d;
  sched.zeta.assign(40, p.rho0);
  CHECK(guided_sample(phi, model, s, sched, GuidanceKind::dps, 3, 3, 5).x0 == b.x0);
  sched.zeta.assign(7, 1.0);
  CHECK_THROWS_AS(guided_sample(phi, model, s, sched, GuidanceKind::dps, 3, 3, 5), ConfigError);
}

TEST_CASE("errors carry the step index") {
  const auto s = make_schedule(10, 1e-3, 0.2);
  GuidanceConfig c;
  const ThrowingPotential bad;
  try {
    guided_sample(bad, ZeroScore{}, s, c, GuidanceKind::dps, 2, 2, 1);
    FAIL("expected a SamplerError");
  } catch (const SamplerError& e) {
    CHECK(e.step() == 7);
  }
  class NoVjp final : public ScoreModel {
   public:
    Field2D score(const Field2D& x, int) const override { return Field2D(x.nx(), x.nz(), 0.0); }
    bool has_vjp() const override { return false; }
    Field2D vjp(const Field2D& x, int, const Field2D&) const override { return x; }
  } novjp;
  CHECK_THROWS_AS(guided_sample(ZeroPotential{}, novjp, s, c, GuidanceKind::dps, 2, 2, 1), SamplerError);
  c.vjp_fallback = true;
  CHECK_NOTHROW(guided_sample(ZeroPotential{}, novjp, s, c, GuidanceKind::dps, 2, 2, 1));
}

TEST_CASE("linear-Gaussian DPS approaches the conjugate posterior mean") {
  const double rel = probes::linear_gaussian_error(100, 3e-3);
  MESSAGE("linear-Gaussian relative error " << rel);
  CHECK(rel < 0.1);
}
