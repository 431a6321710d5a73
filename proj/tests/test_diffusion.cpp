#include <doctest.h>

#include <cmath>

#include "otfwi/diffusion.hpp"
#include "otfwi/error.hpp"
#include "otfwi/rng.hpp"

using namespace otfwi;

namespace {

Field2D ramp(int nx, int nz, double a, double b) {
  Field2D f(nx, nz);
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) f(ix, iz) = a + b * std::sin(0.7 * ix + 1.3 * iz);
  return f;
}

double max_abs_diff(const Field2D& a, const Field2D& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("schedule construction") {
  const auto one = make_schedule(1, 0.01, 0.01);
  CHECK(one.alpha_bar(1) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(one.sigma_hat(1) == 0.0);

  const auto s = make_schedule();
  CHECK(s.N == 1000);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(0.02));
  CHECK(s.alpha_bar(1000) < 1e-4);
  CHECK(s.alpha_bar(0) == 1.0);
  double prod = 1.0;
  for (int i = 1; i <= s.N; ++i) {
    prod *= 1.0 - s.beta(i);
    CHECK(s.alpha_bar(i) == doctest::Approx(prod).epsilon(1e-13));
    CHECK(s.alpha(i) == 1.0 - s.beta(i));
    if (i > 1) {
      CHECK(s.alpha_bar(i) < s.alpha_bar(i - 1));
      const double want = s.beta(i) * (1.0 - s.alpha_bar(i - 1)) / (1.0 - s.alpha_bar(i));
      CHECK(s.sigma_hat(i) * s.sigma_hat(i) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), InvalidArgument);
  CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), InvalidArgument);
  CHECK_THROWS_AS(make_schedule(10, 0.01, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_schedule(0), InvalidArgument);
  CHECK_THROWS_AS(s.check_step(0), InvalidArgument);
  CHECK_THROWS_AS(s.check_step(1001), InvalidArgument);
}

TEST_CASE("forward noising statistics and reparameterization") {
  const auto s = make_schedule();
  const Field2D x0 = ramp(4, 4, 0.2, 0.5);
  Field2D z;
  const Field2D xi = forward_noising(x0, 300, s, 11, &z);
  const double ab = s.alpha_bar(300);
  for (std::size_t j = 0; j < x0.size(); ++j)
    CHECK(xi[j] == doctest::Approx(std::sqrt(ab) * x0[j] + std::sqrt(1.0 - ab) * z[j]).epsilon(1e-14));
  CHECK(forward_noising(x0, 300, s, 11) == xi);

  const int trials = 10000;
  Field2D mean(4, 4, 0.0), m2(4, 4, 0.0);
  for (int t = 0; t < trials; ++t) {
    const Field2D d = forward_noising(x0, 300, s, 1000 + t);
    for (std::size_t j = 0; j < d.size(); ++j) {
      mean[j] += d[j] / trials;
      m2[j] += d[j] * d[j] / trials;
    }
  }
  const double var = 1.0 - ab;
  for (std::size_t j = 0; j < x0.size(); ++j) {
    const double se = std::sqrt(var / trials);
    CHECK(std::abs(mean[j] - std::sqrt(ab) * x0[j]) < 3.0 * se);
    const double v = m2[j] - mean[j] * mean[j];
    CHECK(std::abs(v - var) < 3.0 * var * std::sqrt(2.0 / trials));
  }
}

TEST_CASE("Tweedie estimate with the Gaussian oracle") {
  const auto s = make_schedule();
  const Field2D mu = ramp(5, 6, 0.1, 0.4);
  const GaussianScore g(mu, 0.3, s);
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const int i = 1 + static_cast<int>(rng.index(1000));
    const Field2D x = rng.normal_field(5, 6);
    CHECK(max_abs_diff(clean_estimate(x, i, g, s), g.posterior_mean(x, i)) < 1e-10);
  }
  // affine in x
  const Field2D a = rng.normal_field(5, 6), b = rng.normal_field(5, 6);
  const Field2D lhs = clean_estimate(0.5 * a + 0.5 * b, 200, g, s);
  const Field2D rhs = 0.5 * clean_estimate(a, 200, g, s) + 0.5 * clean_estimate(b, 200, g, s);
  CHECK(max_abs_diff(lhs, rhs) < 1e-12);

  // zero score at a step with alpha_bar near 1
  const auto flat = make_schedule(1, 1e-14, 1e-14);
  const Field2D x = rng.normal_field(3, 3);
  CHECK(max_abs_diff(clean_estimate(x, 1, ZeroScore{}, flat), x) < 1e-12);

  const auto deep = make_schedule(5000, 0.02, 0.02);
  CHECK(deep.alpha_bar(5000) < 1e-12);
  CHECK_THROWS_AS(clean_estimate(x, 5000, ZeroScore{}, deep), NumericalError);
}

TEST_CASE("Tweedie error matches posterior variance") {
  const auto s = make_schedule();
  const Field2D mu(1, 1, 0.3);
  const double s2 = 0.2;
  const GaussianScore g(mu, s2, s);
  const int i = 400, trials = 10000;
  Rng rng(8);
  double acc = 0.0, acc2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    Field2D x0(1, 1, mu[0] + std::sqrt(s2) * rng.normal());
    const Field2D xi = forward_noising_with(x0, i, s, rng.normal_field(1, 1));
    const double e = clean_estimate(xi, i, g, s)[0] - x0[0];
    acc += e * e;
    acc2 += e * e * e * e;
  }
  const double mean = acc / trials;
  const double se = std::sqrt((acc2 / trials - mean * mean) / trials);
  CHECK(std::abs(mean - g.posterior_variance(i)) < 3.0 * se);
}

TEST_CASE("analytic scores") {
  const auto s = make_schedule();
  const Field2D mu = ramp(3, 4, -0.2, 0.3);
  const GaussianScore g(mu, 0.5, s);
  Rng rng(3);
  const Field2D x = rng.normal_field(3, 4);
  const double ab = s.alpha_bar(250);
  const Field2D sc = g.score(x, 250);
  for (std::size_t j = 0; j < x.size(); ++j)
    CHECK(sc[j] == doctest::Approx(-(x[j] - std::sqrt(ab) * mu[j]) / (ab * 0.5 + 1.0 - ab)).epsilon(1e-13));

  const Field2D m = ramp(3, 4, 0.5, 0.2);
  const GmmScore sym({{0.5, m, 0.1}, {0.5, -1.0 * m, 0.1}}, s);
  const Field2D zero(3, 4, 0.0);
  CHECK(max_abs_diff(sym.score(zero, 40), zero) < 1e-14);

  CHECK_THROWS_AS(GaussianScore(mu, 0.0, s), InvalidArgument);
  CHECK_THROWS_AS(GmmScore({{0.4, m, 0.1}, {0.5, m, 0.1}}, s), InvalidArgument);
  CHECK_THROWS_AS(GmmScore({{1.0, m, -0.1}}, s), InvalidArgument);
  CHECK_THROWS_AS(GmmScore({}, s), InvalidArgument);
}

TEST_CASE("vjp matches finite differences and is linear") {
  const auto s = make_schedule();
  const Field2D m = ramp(3, 4, 0.5, 0.2);
  const GmmScore gmm({{0.3, m, 0.1}, {0.7, -1.0 * m, 0.2}}, s);
  const GaussianScore gauss(m, 0.4, s);
  Rng rng(21);
  for (const ScoreModel* model : {static_cast<const ScoreModel*>(&gmm), static_cast<const ScoreModel*>(&gauss)}) {
    for (int i : {5, 60, 300}) {
      const Field2D x = 0.3 * rng.normal_field(3, 4);
      const Field2D c = rng.normal_field(3, 4), d = rng.normal_field(3, 4);
      // <c, J d> via central differences; vjp gives Jᵀc.
      const double h = 1e-5;
      const Field2D sp = model->score(x + h * d, i), sm = model->score(x - h * d, i);
      const double fd = dot(c, (1.0 / (2.0 * h)) * (sp - sm));
      const double an = dot(model->vjp(x, i, c), d);
      CHECK(std::abs(fd - an) < 1e-6 * std::max(1.0, std::abs(an)));

      const Field2D lin = model->vjp(x, i, 2.5 * c + d);
      const Field2D sep = 2.5 * model->vjp(x, i, c) + model->vjp(x, i, d);
      CHECK(max_abs_diff(lin, sep) < 1e-10);
    }
  }
}

TEST_CASE("scaler") {
  const FieldScaler sc(1500.0, 4500.0);
  CHECK(sc.to_model(1500.0) == -1.0);
  CHECK(sc.to_model(4500.0) == 1.0);
  CHECK(sc.to_model(3000.0) == 0.0);
  CHECK(sc.jacobian() == 1500.0);
  const Field2D v = ramp(4, 3, 3000.0, 1200.0);
  CHECK(max_abs_diff(scale_from_model(scale_to_model(v, sc), sc), v) < 1e-12 * 4500.0);
  CHECK_THROWS_AS(FieldScaler(2.0, 2.0), InvalidArgument);
  CHECK_THROWS_AS(FieldScaler(3.0, 1.0), InvalidArgument);
}

TEST_CASE("DSM weighting equals epsilon loss") {
  const auto s = make_schedule();
  Rng rng(4);
  for (int i : {1, 10, 500, 1000}) {
    const Field2D x0 = rng.normal_field(4, 4), z = rng.normal_field(4, 4), eps_hat = rng.normal_field(4, 4);
    const Field2D x = forward_noising_with(x0, i, s, z);
    const Field2D score = (-1.0 / std::sqrt(1.0 - s.alpha_bar(i))) * eps_hat;
    CHECK(dsm_loss(score, x, x0, i, s) == doctest::Approx(eps_loss(eps_hat, z)).epsilon(1e-9));
  }
}
