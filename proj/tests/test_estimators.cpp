#include <doctest.h>

#include <cmath>
#include <vector>

#include "anneal/estimators.hpp"
#include "anneal/quadrature.hpp"
#include "anneal/stats.hpp"
#include "oracles.hpp"

using namespace anneal;

TEST_CASE("ti log ratio") {
  CHECK_THROWS_AS((void)ti_log_ratio(std::vector<double>{}), std::invalid_argument);

  // identity path: all accumulators are exactly zero
  const std::vector<double> zeros(16, 0.0);
  const EstimateReport r0 = ti_log_ratio(zeros, 0.0);
  CHECK(r0.estimate == 0.0);
  CHECK(r0.sample_variance == 0.0);
  CHECK(r0.abs_error() == 0.0);

  const std::vector<double> sums{0.2, -0.1, 0.4};
  const EstimateReport r = ti_log_ratio(sums);
  CHECK(r.estimate == doctest::Approx(-(0.2 - 0.1 + 0.4) / 3.0).epsilon(1e-15));
  CHECK(r.std_error == doctest::Approx(std::sqrt(r.sample_variance / 3.0)).epsilon(1e-12));
  CHECK_FALSE(r.reference.has_value());
}

TEST_CASE("jarzynski log ratio") {
  // single replicate: log of a one-term mean
  const std::vector<double> one{0.37};
  CHECK(jarzynski_log_ratio(one).estimate == doctest::Approx(-0.37).epsilon(1e-15));

  // identity path
  const std::vector<double> zeros(8, 0.0);
  CHECK(jarzynski_log_ratio(zeros).estimate == 0.0);

  // log-sum-exp stability with extreme weights
  const std::vector<double> extreme{800.0, 801.0};
  const EstimateReport r = jarzynski_log_ratio(extreme);
  CHECK(std::isfinite(r.estimate));
  CHECK(r.estimate ==
        doctest::Approx(-800.0 + std::log((1.0 + std::exp(-1.0)) / 2.0)).epsilon(1e-12));
}

TEST_CASE("weighted expectation") {
  const auto first = [](std::span<const double> x) { return x[0]; };
  const auto ones = [](std::span<const double>) { return 1.0; };

  const std::vector<double> sums{0.5, -0.2, 0.1, 0.9};
  const std::vector<double> endpoints{1.0, 2.0, 3.0, 4.0};

  // phi == 1 is exactly 1 under self-normalization
  CHECK(weighted_expectation(sums, endpoints, 1, ones).estimate == 1.0);

  // constant weights reduce to the plain sample mean
  const std::vector<double> flat(4, 0.7);
  CHECK(weighted_expectation(flat, endpoints, 1, first).estimate ==
        doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("weighted expectation hits the target second moment") {
  // phi(x) = ||x||^2 under the annealed target: reference d * var1
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.05;
  cfg.h = 5e-4;
  cfg.seed = 88;
  cfg.store_states = false;
  const EnsembleSummary ens = simulate_ensemble(*p, cfg, 0, 300, 2);
  const auto sqn = [](std::span<const double> x) {
    double a = 0;
    for (double v : x) a += v * v;
    return a;
  };
  const EstimateReport r =
      weighted_expectation(ens.sum_dt_u, ens.endpoints, 2, sqn, 2.0 * 0.5);
  CHECK(r.abs_error() <= 3.0 * r.std_error + 0.05);
}

TEST_CASE("naive importance sampling") {
  // identity path: every weight is 1
  const auto ident = gaussian_path(2, 1.0, 1.0);
  const NaiveIsResult r0 = naive_is(*ident, 500, 7);
  CHECK(r0.ratio.estimate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r0.relative_variance == doctest::Approx(0.0).epsilon(1e-12));

  // 1-d Gaussian: relative variance 2/sqrt(3) - 1
  const auto p1 = gaussian_path(1, 1.0, 0.5);
  const NaiveIsResult r1 = naive_is(*p1, 1000000, 8);
  const double expected = oracles::gaussian_is_c(1.0, 0.5) - 1.0;
  CHECK(expected == doctest::Approx(2.0 / std::sqrt(3.0) - 1.0).epsilon(1e-12));
  CHECK(r1.relative_variance == doctest::Approx(expected).epsilon(0.05));
  REQUIRE(r1.ratio.reference.has_value());
  CHECK(*r1.ratio.reference == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12)); // Z1/Z0 in d=1

  // expectation of ||x||^2 under the target
  const auto p2 = gaussian_path(2, 1.0, 0.5);
  const auto sqn = [](std::span<const double> x) {
    double a = 0;
    for (double v : x) a += v * v;
    return a;
  };
  const NaiveIsResult r2 = naive_is(*p2, 200000, 9, sqn);
  REQUIRE(r2.expectation.has_value());
  CHECK(r2.expectation->estimate ==
        doctest::Approx(2.0 * 0.5).epsilon(0.03)); // d * var1
}

TEST_CASE("product is relative variance") {
  const auto g0 = [](double x) { return 0.5 * x * x; };
  // identical families: Jensen equality
  CHECK(product_is_relvar(g0, g0, 5, 1.0) == doctest::Approx(0.0).epsilon(1e-10));

  const auto g1 = [](double x) { return x * x; }; // var 0.5
  const double c = 2.0 / std::sqrt(3.0);
  CHECK(product_is_relvar(g0, g1, 1, 1.0) == doctest::Approx(c - 1.0).epsilon(1e-8));
  CHECK(product_is_relvar(g0, g1, 20, 1.0) ==
        doctest::Approx(std::pow(c, 20) - 1.0).epsilon(1e-7));

  // strictly increasing in d when c > 1
  double prev = 0.0;
  for (int d : {1, 2, 5, 10, 20}) {
    const double rv = product_is_relvar(g0, g1, d, 1.0);
    CHECK(rv > prev);
    prev = rv;
  }

  // Potential1D overload uses the endpoint slices
  const auto fam = gaussian_1d(1.0, 0.5);
  CHECK(product_is_relvar(fam, fam, 10) ==
        doctest::Approx(std::pow(c, 10) - 1.0).epsilon(1e-7));

  // infinite second exponential moment: u1 flat => e^{u0 - 2 u1} not integrable
  const auto flat = [](double) { return 0.0; };
  CHECK_THROWS_AS((void)product_is_relvar(g0, flat, 1, 1.0), QuadratureError);
}

TEST_CASE("spectral variance factor") {
  CHECK(spectral_phi(1.0, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
  const double e1 = std::exp(-1.0);
  CHECK(spectral_phi(1.0, 1.0) == doctest::Approx((1.0 + e1) / (1.0 - e1)).epsilon(1e-14));
  CHECK(spectral_phi(1.0, 1.0) == doctest::Approx(2.16395).epsilon(1e-5));

  // continuity at ell -> 0
  CHECK(spectral_phi(2.0, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(spectral_phi(2.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));

  // non-decreasing in ell for several spectral points
  for (double lambda : {0.1, 1.0, 10.0}) {
    double prev = spectral_phi(lambda, 0.0);
    for (double ell = 0.01; ell < 5.0; ell *= 1.5) {
      const double v = spectral_phi(lambda, ell);
      CHECK(v >= prev - 1e-13);
      prev = v;
    }
  }

  CHECK_THROWS_AS((void)spectral_phi(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)spectral_phi(1.0, -0.5), std::invalid_argument);
}

namespace {

CenteredObservable coordinate_observable() {
  CenteredObservable f;
  f.raw = [](double, std::span<const double> x) { return x[0]; };
  return f;
}

} // namespace

TEST_CASE("asymptotic variance on the unit OU benchmark") {
  const auto ou = gaussian_path(1, 1.0, 1.0);
  const CenteredObservable f = coordinate_observable();

  AsymVarConfig cfg;
  cfg.n_starts = 20000;
  cfg.h_eff = 5e-3;
  cfg.seed = 42;
  cfg.workers = 2;
  cfg.s_grid = {0.5};

  cfg.ell = 0.0;
  const auto r0 = asymptotic_variance(*ou, f, 1.0, cfg);
  CHECK(r0.sigma2 == doctest::Approx(2.0).epsilon(0.1));
  CHECK(r0.burn_in_steps == 0); // exact stationary starts

  cfg.ell = 1.0;
  const auto r1 = asymptotic_variance(*ou, f, 1.0, cfg);
  CHECK(r1.sigma2 == doctest::Approx(spectral_phi(1.0, 1.0)).epsilon(0.1));
  CHECK(r1.truncation_r == static_cast<int>(std::ceil(-std::log(cfg.tol) / 1.0)));

  // zero observable
  CenteredObservable zero;
  zero.raw = [](double, std::span<const double>) { return 0.0; };
  cfg.n_starts = 100;
  const auto rz = asymptotic_variance(*ou, zero, 1.0, cfg);
  CHECK(rz.sigma2 == 0.0);

  // a non-centered observable is rejected with a diagnostic
  CenteredObservable bad;
  bad.raw = [](double, std::span<const double> x) { return x[0] + 5.0; };
  cfg.n_starts = 2000;
  CHECK_THROWS_AS((void)asymptotic_variance(*ou, bad, 1.0, cfg), NumericError);
}

TEST_CASE("asymptotic variance via burn-in when no exact sampler exists") {
  // same OU dynamics but hidden behind a custom family without sample_pi_t
  struct PlainOu final : AnnealingPotential {
    PlainOu() : AnnealingPotential(1, "custom") {}
    double u(double, std::span<const double> x) const override { return 0.5 * x[0] * x[0]; }
    void grad_u(double, std::span<const double> x, std::span<double> g) const override {
      g[0] = x[0];
    }
    double dt_u(double, std::span<const double>) const override { return 0.0; }
  } plain;
  const CenteredObservable f = coordinate_observable();
  AsymVarConfig cfg;
  cfg.ell = 1.0;
  cfg.n_starts = 12000;
  cfg.h_eff = 0.01;
  cfg.seed = 43;
  cfg.workers = 2;
  cfg.s_grid = {0.5};
  const auto r = asymptotic_variance(plain, f, 1.0, cfg);
  CHECK(r.burn_in_steps == 500); // ceil(5 / (K h))
  CHECK(r.sigma2 == doctest::Approx(spectral_phi(1.0, 1.0)).epsilon(0.15));
}

TEST_CASE("report invariants") {
  const std::vector<double> sums{0.1, 0.3, -0.2, 0.0, 0.25};
  const EstimateReport r = ti_log_ratio(sums, -0.1);
  CHECK(r.std_error == doctest::Approx(std::sqrt(r.sample_variance / 5.0)).epsilon(1e-14));
  CHECK(r.replicate_values.size() == 5);
  CHECK(r.abs_error() == doctest::Approx(std::abs(r.estimate + 0.1)).epsilon(1e-14));
}
