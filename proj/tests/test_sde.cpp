#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "anneal/rng.hpp"
#include "anneal/sde.hpp"
#include "anneal/stats.hpp"
#include "oracles.hpp"

using namespace anneal;

TEST_CASE("euler step") {
  const auto p = gaussian_path(2, 1.0, 1.0);
  const std::vector<double> x{1.0, 0.0}, zero{0.0, 0.0};

  // x - (h/eps) x with eps = 1, h = 0.1
  auto out = euler_step(*p, 0.0, x, 1.0, 0.1, zero);
  CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(out[1] == 0.0);

  // fixed point at the minimizer
  std::vector<double> m(2);
  p->minimizer(0.3, m);
  out = euler_step(*p, 0.3, m, 0.5, 0.2, zero);
  CHECK(out == m);

  // zero step size
  out = euler_step(*p, 0.0, x, 1.0, 0.0, zero);
  CHECK(out == x);
}

TEST_CASE("grid arithmetic") {
  RunConfig cfg;
  cfg.d = 1;
  cfg.h = 0.5;
  cfg.epsilon = 1.0;
  CHECK(cfg.n_steps() == 2);
  cfg.h = 0.1;
  CHECK(cfg.n_steps() == 10); // guard against 1/0.1 rounding down
  cfg.h = 1e-4;
  CHECK(cfg.n_steps() == 10000);
  cfg.h = 0.3;
  CHECK(cfg.n_steps() == 3);

  const auto p = gaussian_path(1, 1.0, 0.5);
  cfg.h = 0.5;
  const SkeletonPath path = simulate_skeleton(*p, cfg);
  REQUIRE(path.times.size() == 2);
  CHECK(path.times[0] == 0.0);
  CHECK(path.times[1] == 0.5);
  CHECK(path.states.size() == 2);
  CHECK(path.endpoint.size() == 1);
  for (double v : path.states) CHECK(std::isfinite(v));
}

TEST_CASE("identity path accumulates exactly zero") {
  const auto p = gaussian_path(3, 1.0, 1.0);
  RunConfig cfg;
  cfg.d = 3;
  cfg.epsilon = 0.5;
  cfg.h = 0.01;
  cfg.seed = 5;
  const SkeletonPath path = simulate_skeleton(*p, cfg);
  CHECK(path.sum_dt_u == 0.0);
}

TEST_CASE("determinism and ensemble equivalence") {
  const auto p = gaussian_path(3, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 3;
  cfg.epsilon = 0.1;
  cfg.h = 1e-3;
  cfg.seed = 99;
  cfg.store_states = false;

  const SkeletonPath a = simulate_skeleton(*p, cfg, 7);
  const SkeletonPath b = simulate_skeleton(*p, cfg, 7);
  CHECK(a.sum_dt_u == b.sum_dt_u);
  CHECK(a.endpoint == b.endpoint);

  // ensemble lanes match the single-replicate path bit-for-bit, and the
  // worker count does not affect results
  const EnsembleSummary ens1 = simulate_ensemble(*p, cfg, 0, 37, 1);
  const EnsembleSummary ens2 = simulate_ensemble(*p, cfg, 0, 37, 2);
  CHECK(ens1.sum_dt_u == ens2.sum_dt_u);
  CHECK(ens1.endpoints == ens2.endpoints);
  CHECK(ens1.sum_dt_u[7] == a.sum_dt_u);
  for (int j = 0; j < 3; ++j)
    CHECK(ens1.endpoints[7 * 3 + static_cast<size_t>(j)] == a.endpoint[static_cast<size_t>(j)]);

  // different replicates differ
  CHECK(ens1.sum_dt_u[3] != ens1.sum_dt_u[4]);
}

TEST_CASE("gaussian chain is the exact affine map") {
  const oracles::GaussianChain chain{1.0, 0.5, 0.25, 1e-2, 2};
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = chain.eps;
  cfg.h = chain.h;
  cfg.seed = 3;
  const SkeletonPath path = simulate_skeleton(*p, cfg, 11);
  const long n = cfg.n_steps();
  for (long k = 0; k + 1 < n; ++k) {
    const double t = static_cast<double>(k) * cfg.h;
    const double a = chain.step_factor(t);
    const double s = std::sqrt(2.0 * cfg.h / cfg.epsilon);
    for (int j = 0; j < 2; ++j) {
      const double z = normal_at(cfg.seed, Domain::path_noise, 11, static_cast<uint32_t>(k),
                                 static_cast<uint32_t>(j));
      const double pred = a * path.states[static_cast<size_t>(k * 2 + j)] + s * z;
      CHECK(path.states[static_cast<size_t>((k + 1) * 2 + j)] ==
            doctest::Approx(pred).epsilon(1e-12));
    }
  }
}

TEST_CASE("ti estimate hits the analytic log-ratio") {
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.05;
  cfg.h = 5e-4;
  cfg.seed = 1234;
  cfg.store_states = false;
  const EnsembleSummary ens = simulate_ensemble(*p, cfg, 0, 200, 2);
  const Moments m = moments(ens.sum_dt_u);
  const double target = std::log(0.5);
  CHECK(std::abs(-m.mean - target) <= 3.0 * m.std_error + 0.05); // eps-bias allowance
}

TEST_CASE("coupled pair") {
  const auto p = gaussian_path(2, 1.0, 1.0);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 1.0;
  cfg.h = 0.01;
  cfg.seed = 17;

  const std::vector<double> x0{1.0, 1.0}, y0{-1.0, 0.5};
  const CoupledPair pair = simulate_coupled(*p, cfg, x0, y0);
  REQUIRE(pair.separation.size() == static_cast<size_t>(cfg.n_steps()) + 1);
  // identity-variance path: per-step factor exactly 1 - h/eps
  for (size_t k = 0; k + 1 < pair.separation.size(); ++k)
    CHECK(pair.separation[k + 1] / pair.separation[k] ==
          doctest::Approx(0.99).epsilon(1e-12));

  CHECK_THROWS_AS(simulate_coupled(*p, cfg, x0, x0), std::invalid_argument);
}

TEST_CASE("coupled contraction for logistic") {
  LogisticModel m;
  m.m = 4;
  m.d = 5;
  m.prior_variance = 1.0;
  m.responses = {1, 0, 1, 0};
  m.covariates.assign(20, 0.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j)
      m.covariates[static_cast<size_t>(i * 5 + j)] = 0.3 * ((i + 2 * j) % 3 - 1);
  const auto p = logistic_path(m);
  const AssumptionConstants c = compute_constants(*p);

  RunConfig cfg;
  cfg.d = 5;
  cfg.epsilon = 0.2;
  cfg.h = cfg.epsilon / (2.0 * c.L * c.L / c.K) * 0.5; // well inside (0, 2K/L^2)
  cfg.seed = 33;
  for (uint32_t rep = 0; rep < 20; ++rep) {
    std::vector<double> x0(5), y0(5);
    for (int j = 0; j < 5; ++j) {
      x0[static_cast<size_t>(j)] = normal_at(44, Domain::control, rep, 0, static_cast<uint32_t>(j));
      y0[static_cast<size_t>(j)] = normal_at(44, Domain::control, rep, 1, static_cast<uint32_t>(j));
    }
    const CoupledPair pair = simulate_coupled(*p, cfg, x0, y0, rep);
    const double slack = 1.0 + 10.0 * c.L * cfg.h / cfg.epsilon;
    for (size_t k = 0; k < pair.separation.size(); ++k) {
      const double t = static_cast<double>(k) * cfg.h;
      CHECK(pair.separation[k] / pair.separation[0] <=
            std::exp(-c.K * t / cfg.epsilon) * slack + 1e-12);
    }
  }
}

TEST_CASE("frozen chain") {
  const auto p = gaussian_path(1, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 1;
  cfg.epsilon = 1.0;
  cfg.h = 0.05;
  cfg.seed = 55;

  const std::vector<double> y0{0.3};
  CHECK(simulate_frozen(*p, 0.5, cfg, y0, 0) == y0);

  // long-run variance matches the discrete fixed point sigma^2/(1 - b/2)
  const double s = 0.5;
  const oracles::GaussianChain chain{1.0, 0.5, cfg.epsilon, cfg.h, 1};
  const long steps = 400000;
  const auto states = simulate_frozen(*p, s, cfg, y0, steps);
  const long burn = 2000;
  double acc = 0.0, acc2 = 0.0;
  for (long k = burn; k <= steps; ++k) {
    acc += states[static_cast<size_t>(k)];
    acc2 += states[static_cast<size_t>(k)] * states[static_cast<size_t>(k)];
  }
  const auto cnt = static_cast<double>(steps - burn + 1);
  const double var = acc2 / cnt - (acc / cnt) * (acc / cnt);
  CHECK(var == doctest::Approx(chain.frozen_fixed_point(s)).epsilon(0.05));

  // ergodic mean tracks a shifted minimizer: custom family U_t = ||x - m||^2/2
  struct Shifted final : AnnealingPotential {
    Shifted() : AnnealingPotential(1, "custom") {}
    double u(double, std::span<const double> x) const override {
      return 0.5 * (x[0] - 2.0) * (x[0] - 2.0);
    }
    void grad_u(double, std::span<const double> x, std::span<double> g) const override {
      g[0] = x[0] - 2.0;
    }
    double dt_u(double, std::span<const double>) const override { return 0.0; }
    bool has_minimizer() const override { return true; }
    void minimizer(double, std::span<double> out) const override { out[0] = 2.0; }
  } shifted;
  const auto states2 = simulate_frozen(shifted, 0.2, cfg, y0, 200000, 1);
  double mean = 0.0;
  for (long k = 50000; k <= 200000; ++k) mean += states2[static_cast<size_t>(k)];
  mean /= 150001.0;
  // stationary sd ~ sqrt(eps_dist) => 3 SE with autocorrelation inflation
  CHECK(std::abs(mean - 2.0) < 0.05);
}

TEST_CASE("divergence reporting") {
  const auto p = gaussian_path(2, 0.01, 0.01); // curvature 100
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 1e-8;
  cfg.h = 0.01; // per-step amplification ~1e8: overflows mid-run
  cfg.seed = 6;
  CHECK_THROWS_AS((void)simulate_ensemble(*p, cfg, 0, 8, 1), DivergenceError);
  try {
    (void)simulate_ensemble(*p, cfg, 0, 8, 1);
  } catch (const DivergenceError& e) {
    CHECK(e.step >= 0);
    CHECK(e.step < cfg.n_steps());
  }
}

TEST_CASE("trajectory dump round-trip") {
  const auto p = gaussian_path(3, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 3;
  cfg.epsilon = 0.5;
  cfg.h = 0.02;
  cfg.seed = 77;
  const SkeletonPath path = simulate_skeleton(*p, cfg);
  const std::string file = "test_traj.bin";
  write_trajectory(file, path);
  const SkeletonPath back = read_trajectory(file);
  CHECK(back.d == 3);
  CHECK(back.states == path.states);
  std::remove(file.c_str());
}

TEST_CASE("config validation") {
  RunConfig cfg;
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.d = 1;
  cfg.h = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.h = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.h = 0.5;
  cfg.epsilon = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
