// Acceptance suite: one pass/fail line per criterion. Exit code 0 only if
// every criterion holds at its stated tolerance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "anneal/csv.hpp"
#include "anneal/diagnostics.hpp"
#include "anneal/estimators.hpp"
#include "anneal/experiments.hpp"
#include "anneal/kernels.hpp"
#include "anneal/rng.hpp"
#include "anneal/sde.hpp"
#include "anneal/stats.hpp"
#include "oracles.hpp"

using namespace anneal;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d. %s — %s\n", pass ? "PASS" : "FAIL", idx, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5g", v);
  return buf;
}

int hw_workers() { return 2; }

// ---------------------------------------------------------------------------
// 1. Gaussian TI/Jarzynski accuracy at the pinned configuration.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.01;
  cfg.h = 1e-4;
  cfg.seed = 2001;
  cfg.store_states = false;
  const EnsembleSummary ens = simulate_ensemble(*p, cfg, 0, 200, /*workers=*/1);
  const double target = std::log(0.5);
  const EstimateReport ti = ti_log_ratio(ens.sum_dt_u, target);
  const EstimateReport jz = jarzynski_log_ratio(ens.sum_dt_u, target, 4242);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool ti_ok = ti.abs_error() <= 3.0 * ti.std_error;
  const bool jz_ok = jz.abs_error() <= 3.0 * jz.std_error;
  const bool time_ok = secs < 60.0;
  report(1, "gaussian TI accuracy", ti_ok && jz_ok && time_ok,
         "ti " + fmt(ti.estimate) + " (err " + fmt(ti.abs_error()) + " vs 3se " +
             fmt(3 * ti.std_error) + "), jarzynski " + fmt(jz.estimate) + " (err " +
             fmt(jz.abs_error()) + " vs 3se " + fmt(3 * jz.std_error) + "), " + fmt(secs) +
             " s single-threaded");
}

// ---------------------------------------------------------------------------
// 2. Bias shrinkage in eps at fixed h/eps.
void criterion_2() {
  const auto p = gaussian_path(2, 1.0, 0.5);
  const double ell = 0.01;
  const uint32_t reps = 40000;
  std::vector<double> biases, errs;
  std::string detail;
  bool mean_ok = true;
  for (double eps : {0.04, 0.02, 0.01}) {
    RunConfig cfg;
    cfg.d = 2;
    cfg.epsilon = eps;
    cfg.h = ell * eps;
    cfg.seed = mix_seed(2002, static_cast<uint64_t>(std::llround(eps * 1e6)));
    cfg.store_states = false;
    const EnsembleSummary ens = simulate_ensemble(*p, cfg, 0, reps, hw_workers());
    const Moments m = moments(ens.sum_dt_u);
    const double bias = std::abs(-m.mean - std::log(0.5));
    biases.push_back(bias);
    errs.push_back(m.std_error);
    // cross-check the empirical mean against the exact affine-recursion value
    const oracles::GaussianChain chain{1.0, 0.5, eps, cfg.h, 2};
    mean_ok = mean_ok &&
              std::abs(m.mean - chain.mean_sum_dt_u(cfg.n_steps())) <= 4.0 * m.std_error;
    detail += "eps=" + fmt(eps) + ":|bias|=" + fmt(bias) + " ";
  }
  const double r1 = biases[0] / biases[1];
  const double r2 = biases[1] / biases[2];
  const bool ratios_ok = r1 >= 1.0 && r1 <= 4.0 && r2 >= 1.0 && r2 <= 4.0;
  const bool resolved = biases[2] > 5.0 * errs[2]; // bias resolved above MC noise
  report(2, "bias shrinkage in eps", ratios_ok && resolved && mean_ok,
         detail + "ratios " + fmt(r1) + ", " + fmt(r2) + " (halving within factor 2)");
}

// ---------------------------------------------------------------------------
// 3. Naive importance sampling blows up exponentially in d.
void criterion_3() {
  const auto fam = gaussian_1d(1.0, 0.5);
  const double c = 2.0 / std::sqrt(3.0);
  bool ok = true;
  std::string detail;
  for (int d : {1, 5, 10}) {
    const auto p = product_path(d, fam);
    const NaiveIsResult is = naive_is(*p, 1000000, mix_seed(2003, static_cast<uint64_t>(d)));
    const double reference = product_is_relvar(fam, fam, d); // quadrature oracle
    const double closed_form = std::pow(c, d) - 1.0;
    ok = ok && std::abs(reference - closed_form) <= 1e-6 * closed_form;
    ok = ok && std::abs(is.relative_variance - reference) <= 0.2 * reference;
    detail += "d=" + std::to_string(d) + ":" + fmt(is.relative_variance) + "/" +
              fmt(reference) + " ";
  }
  report(3, "naive-IS exponential blow-up", ok, detail + "(within 20%)");
}

// ---------------------------------------------------------------------------
// 4. Synchronous-coupling contraction: exact Gaussian factor + logistic bound.
void criterion_4() {
  bool gauss_ok = true;
  {
    const auto p = gaussian_path(2, 1.0, 0.5);
    RunConfig cfg;
    cfg.d = 2;
    cfg.epsilon = 1.0;
    cfg.h = 0.01;
    cfg.seed = 2004;
    const std::vector<double> x0{1.5, -0.5}, y0{-1.0, 1.0};
    const CoupledPair pair = simulate_coupled(*p, cfg, x0, y0);
    // every per-step ratio must equal 1 - h/(eps sigma_t^2) to 1e-12
    for (size_t k = 0; k + 1 < pair.separation.size(); ++k) {
      const double expected =
          1.0 - (cfg.h / cfg.epsilon) * p->curvature(static_cast<double>(k) * cfg.h);
      const double actual = pair.separation[k + 1] / pair.separation[k];
      gauss_ok = gauss_ok && std::abs(actual - expected) <= 1e-12;
    }
    const AssumptionConstants ac = compute_constants(*p);
    const BoundReport rep = contraction_check(*p, pair, ac.K, ac.L, cfg.epsilon, cfg.h);
    gauss_ok = gauss_ok && rep.satisfied;
  }

  int violations = 0;
  {
    LogisticModel m;
    m.m = 8;
    m.d = 5;
    m.prior_variance = 1.0;
    for (int i = 0; i < 8; ++i) {
      double row = 0;
      for (int j = 0; j < 5; ++j) {
        const double v = 0.2 * (((i + 1) * (j + 2)) % 5 - 2);
        m.covariates.push_back(v);
        row += v;
      }
      m.responses.push_back(row > 0 ? 1.0 : 0.0);
    }
    const auto p = logistic_path(m);
    const AssumptionConstants ac = compute_constants(*p);
    RunConfig cfg;
    cfg.d = 5;
    cfg.epsilon = 0.1;
    cfg.h = std::min(1e-3, 0.3 * cfg.epsilon * 2.0 * ac.K / (ac.L * ac.L));
    cfg.seed = 2014;
    for (uint32_t i = 0; i < 50; ++i) {
      std::vector<double> x0(5), y0(5);
      for (int j = 0; j < 5; ++j) {
        x0[static_cast<size_t>(j)] = normal_at(91, Domain::control, i, 0, static_cast<uint32_t>(j));
        y0[static_cast<size_t>(j)] = normal_at(91, Domain::control, i, 1, static_cast<uint32_t>(j));
      }
      const CoupledPair pair = simulate_coupled(*p, cfg, x0, y0, i);
      const BoundReport rep = contraction_check(*p, pair, ac.K, ac.L, cfg.epsilon, cfg.h);
      violations += rep.violations;
    }
  }
  report(4, "contraction", gauss_ok && violations == 0,
         std::string("gaussian per-step factor exact to 1e-12; logistic d=5, 50 pairs, ") +
             std::to_string(violations) + " violations");
}

// ---------------------------------------------------------------------------
// 5. Discrete Foster-Lyapunov drift, with falsification control.
void criterion_5() {
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.1;
  cfg.h = 1e-3;
  cfg.seed = 2005;
  const AssumptionConstants ac = compute_constants(*p);
  const DriftConstants dc = discrete_drift_constants(cfg.epsilon, cfg.h, ac.K, ac.L, 2, 0.0, 0.5);
  const auto points = standard_normal_points(1000, 2, 2015);
  const BoundReport ok = drift_check(*p, dc, cfg, points, static_cast<int>(cfg.n_steps()));

  DriftConstants corrupted = dc;
  corrupted.lambda = 0.0;
  const BoundReport bad = drift_check(*p, corrupted, cfg, points, 32);

  report(5, "discrete drift",
         ok.satisfied && ok.violations == 0 && !bad.satisfied && bad.violations > 0,
         "1000 points x " + std::to_string(cfg.n_steps()) + " grid indices, " +
             std::to_string(ok.violations) + " violations; corrupted lambda -> " +
             std::to_string(bad.violations) + " violations reported");
}

// ---------------------------------------------------------------------------
// 6. Thermodynamic identity on the Gaussian and d=7 product families.
void criterion_6() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  const auto g = gaussian_path(2, 1.0, 0.5);
  const auto prod = product_path(7, gaussian_1d(1.0, 0.5, /*analytic_log_z=*/false));
  const BoundReport rg = thermo_identity_check(*g, grid);
  const BoundReport rp = thermo_identity_check(*prod, grid);
  report(6, "thermodynamic identity", rg.satisfied && rp.satisfied,
         "max residuals " + fmt(rg.observed) + " (gaussian), " + fmt(rp.observed) +
             " (d=7 product), threshold 1e-8");
}

// ---------------------------------------------------------------------------
// 7. Additive-functional variance bound with the AR(1)-recursion RHS.
void criterion_7() {
  const auto p = gaussian_path(2, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.05;
  cfg.h = 5e-4;
  cfg.seed = 2007;
  const BoundReport rep = variance_bound_check(*p, cfg, 500, 1.0, hw_workers());
  report(7, "variance bound", rep.satisfied,
         "var " + fmt(rep.observed) + " <= bound " + fmt(rep.bound) + " (slack " +
             fmt(rep.slack) + ")");
}

// ---------------------------------------------------------------------------
// 8. Desk-scale CLT: standardized accumulator vs the normal CDF.
void criterion_8() {
  // calibration controls
  std::vector<double> normals(500), expo(500);
  for (int i = 0; i < 500; ++i) {
    normals[static_cast<size_t>(i)] =
        normal_at(2018, Domain::control, static_cast<uint32_t>(i), 0, 0);
    expo[static_cast<size_t>(i)] =
        -std::log(uniform_at(2019, Domain::control, static_cast<uint32_t>(i), 0, 0)) - 1.0;
  }
  const auto [ks_norm, rep_norm] = clt_check(normals);
  const auto [ks_expo, rep_expo] = clt_check(expo);

  const auto p = gaussian_path(4, 1.0, 0.5);
  RunConfig cfg;
  cfg.d = 4;
  cfg.epsilon = 0.005;
  cfg.h = std::pow(cfg.epsilon, 3);
  cfg.seed = 2008;
  cfg.store_states = false;
  // independent pilot batch for the standardization
  const EnsembleSummary pilot = simulate_ensemble(*p, cfg, 0, 250, hw_workers());
  const EnsembleSummary eval = simulate_ensemble(*p, cfg, 250, 500, hw_workers());
  const Moments pm = moments(pilot.sum_dt_u);
  std::vector<double> standardized(500);
  for (int i = 0; i < 500; ++i)
    standardized[static_cast<size_t>(i)] =
        (eval.sum_dt_u[static_cast<size_t>(i)] - pm.mean) / std::sqrt(pm.variance);
  const double ks = ks_statistic_normal(standardized);

  report(8, "CLT normality", ks < 0.08 && rep_norm.satisfied && !rep_expo.satisfied,
         "KS " + fmt(ks) + " < 0.08 (d=4, eps=0.005, h=eps^3); controls: normal " +
             fmt(ks_norm) + " passes, exponential " + fmt(ks_expo) + " fails");
}

// ---------------------------------------------------------------------------
// 9. Asymptotic-variance oracle and monotonicity in ell.
void criterion_9() {
  const auto ou = gaussian_path(1, 1.0, 1.0);
  CenteredObservable f;
  f.raw = [](double, std::span<const double> x) { return x[0]; };
  AsymVarConfig av;
  av.n_starts = 200000;
  av.h_eff = 5e-3;
  av.seed = 42;
  av.workers = hw_workers();
  av.s_grid = {0.5};

  bool ok = true;
  std::string detail;
  double prev = -1e300, prev_se = 0.0;
  bool monotone = true;
  for (double ell : {0.0, 0.5, 1.0, 2.0}) {
    av.ell = ell;
    const AsymptoticVarianceResult r = asymptotic_variance(*ou, f, 1.0, av);
    const double target = ell == 0.0 ? 2.0 : spectral_phi(1.0, ell);
    ok = ok && std::abs(r.sigma2 - target) <= 0.05 * target;
    if (r.sigma2 < prev - 3.0 * std::hypot(prev_se, r.sigma2_se)) monotone = false;
    detail += "l=" + fmt(ell) + ":" + fmt(r.sigma2) + "/" + fmt(target) + " ";
    prev = r.sigma2;
    prev_se = r.sigma2_se;
  }
  report(9, "asymptotic variance", ok && monotone, detail + "(within 5%, monotone)");
}

// ---------------------------------------------------------------------------
// 10. Logistic end-to-end: quadrature reference + exact constants.
void criterion_10() {
  LogisticModel m;
  m.m = 40;
  m.d = 2;
  m.prior_variance = 1.0;
  for (int i = 0; i < 40; ++i) {
    const double a = 0.07 * ((i % 7) - 3);
    const double b = 0.05 * ((i % 5) - 2);
    m.covariates.push_back(a);
    m.covariates.push_back(b);
    m.responses.push_back((a + 0.7 * b > 0) ? 1.0 : 0.0);
  }
  const auto p = logistic_path(m);
  const double log_z0 = std::log(2.0 * M_PI); // (d/2) log(2 pi sigma~^2), d=2
  const double ref_ratio = logistic_log_z1_quadrature(m) - log_z0;

  RunConfig cfg;
  cfg.d = 2;
  cfg.epsilon = 0.001;
  cfg.h = 2.5e-5;
  cfg.seed = 2010;
  cfg.store_states = false;
  const EnsembleSummary ens = simulate_ensemble(*p, cfg, 0, 150, hw_workers());
  const EstimateReport ti = ti_log_ratio(ens.sum_dt_u, ref_ratio);
  const bool ti_ok = ti.abs_error() <= 3.0 * ti.std_error;

  // hand-computed constants on the unit single-observation model
  LogisticModel unit;
  unit.m = 1;
  unit.d = 2;
  unit.covariates = {1.0, 0.0};
  unit.responses = {1.0};
  unit.prior_variance = 1.0;
  const AssumptionConstants uc = compute_constants(*logistic_path(unit));
  const bool const_ok =
      uc.xi == 2.0 && uc.lambda_max == 1.0 && uc.K == 1.0 && uc.L == 2.0 && uc.M == 2.0;

  report(10, "logistic end-to-end", ti_ok && const_ok,
         "TI " + fmt(ti.estimate) + " vs quadrature " + fmt(ref_ratio) + " (err " +
             fmt(ti.abs_error()) + " <= 3se " + fmt(3 * ti.std_error) +
             "); unit constants exact: " + (const_ok ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 11. Determinism and sweep resumability.
void criterion_11() {
  const fs::path dir = fs::temp_directory_path() / "anneal_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string est_out = (dir / "est.csv").string();
  const std::string sweep_out = (dir / "sweep.csv").string();

  const Config est_cfg = Config::parse_string(
      "[family]\nkind = gaussian\nd = 2\nvar0 = 1.0\nvar1 = 0.5\n"
      "[run]\nepsilon = 0.05\nh = 5e-4\nreplicates = 64\nseed = 2011\n"
      "[output]\npath = " + est_out + "\nworkers = 2\n");
  std::ostringstream sink1, sink2;
  bool ok = run_estimate(est_cfg, {}, sink1) == kExitOk;
  const std::string first = read_file(est_out);
  ok = ok && run_estimate(est_cfg, {}, sink2) == kExitOk;
  ok = ok && read_file(est_out) == first;

  const Config sweep_cfg = Config::parse_string(
      "[family]\nkind = gaussian\nvar0 = 1.0\nvar1 = 0.5\n"
      "[sweep]\nd_grid = 1,2,4\neps_coeff = 0.05\nell = 0.01\nreplicates = 32\nseed = 2012\n"
      "estimators = ti,jarzynski\n"
      "[output]\npath = " + sweep_out + "\nworkers = 2\n");
  std::ostringstream sink3, sink4;
  ok = ok && run_sweep(sweep_cfg, {}, sink3) == kExitOk;
  const std::string full = read_file(sweep_out);
  // interrupt: drop the final file and one completed cell, then resume
  fs::remove(sweep_out);
  bool removed_one = false;
  for (const auto& e : fs::directory_iterator(sweep_out + ".cells")) {
    if (!removed_one) {
      fs::remove(e.path());
      removed_one = true;
    }
  }
  ok = ok && run_sweep(sweep_cfg, {}, sink4) == kExitOk;
  ok = ok && read_file(sweep_out) == full;
  fs::remove_all(dir);

  report(11, "determinism & resumability", ok,
         "repeated runs byte-identical; interrupted sweep resumed to an identical file");
}

} // namespace

int main() {
  std::printf("acceptance suite (kernel backend: %s)\n", kernels::ops().name);
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  if (g_failures == 0) {
    std::printf("all 11 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
