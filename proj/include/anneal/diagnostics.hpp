#pragma once
// Closed-form drift/contraction/discretization constants and the empirical
// verification suite: synchronous-coupling contraction, the discrete
// Foster-Lyapunov drift inequality, the thermodynamic identity, the additive-
// functional variance bound, KS normality, and the path-law TV bound.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anneal/estimators.hpp"
#include "anneal/potential.hpp"
#include "anneal/sde.hpp"

namespace anneal {

struct DriftConstants {
  enum class Context { continuous_drift, homogeneous_drift, discrete_drift };
  Context context = Context::continuous_drift;
  // continuous / homogeneous bundles
  double delta = 0, r = 0, b = 0, alpha_p = 0;
  // discrete bundle
  double lambda = 0, b_disc = 0;
  // echoed inputs
  double p_order = 0, kappa = 0, eps = 0, h = 0, K = 0, L = 0;
  int d = 0;
  double sup_dt_xstar = 0, sup_xstar = 0, delta_param = 0;
};

// delta = (Kp - kappa)/eps, r, b and alpha_p of the continuous drift bundle.
DriftConstants continuous_drift_constants(double p_order, double kappa, double eps, double K,
                                          int d, double sup_dt_xstar, double sup_xstar);
// Time-homogeneous variant (r~, b~, alpha~_p).
DriftConstants homogeneous_drift_constants(double p_order, double kappa, double eps, double K,
                                           int d, double sup_xstar);
// Discrete chain: lambda = 1 - (2hK/eps - (h/eps)^2 L^2)(1 - delta) and the
// matching additive constant; requires h/eps in (0, 2K/L^2).
DriftConstants discrete_drift_constants(double eps, double h, double K, double L, int d,
                                        double sup_dt_xstar, double delta_param = 0.5);

struct BoundReport {
  std::string name;
  double bound = 0;
  double observed = 0;
  bool satisfied = false;
  double slack = 0; // observed / bound
  int violations = 0;
  std::string detail;
};

// One-step expectation E||x - (h/eps) grad U_{(k-1)h}(x) + xi - x_k*||^2
// (closed form: drift part plus 2 d h / eps) checked against
// lambda V_{(k-1)h}(x) + b over trial points and grid indices.
BoundReport drift_check(const AnnealingPotential& p, const DriftConstants& consts,
                        const RunConfig& cfg, std::span<const double> trial_points,
                        int grid_indices = 64);

// Generates standard-normal trial points for drift_check.
std::vector<double> standard_normal_points(int count, int d, uint64_t seed);

// separation(t)/separation(0) <= e^{-K t / eps} (1 + 10 L h / eps) at every
// grid time; for the Gaussian family additionally requires the per-step
// factor to equal 1 - h/(eps sigma_t^2) to 1e-12.
BoundReport contraction_check(const AnnealingPotential& p, const CoupledPair& pair, double K,
                              double L, double eps, double h);

// max_t | d/dt log Z_t + pi_t(dt U_t) | over the grid, FD in t.
BoundReport thermo_identity_check(const AnnealingPotential& p, std::span<const double> t_grid,
                                  double threshold = 1e-8);

// var[S_{eps,h}] <= h (1 + 2/(1 - e^{-K h/eps})) sup_t var_{mu_t}[f_t] with
// f_t = dtU_t - pi_t(dtU_t), empirical variance over `replicates` paths.
// The supremum uses the exact AR(1) covariance recursion for the Gaussian
// family and an empirical supremum with 3-SE inflation otherwise.
BoundReport variance_bound_check(const AnnealingPotential& p, const RunConfig& cfg,
                                 uint32_t replicates, double K, int workers = 1);

double variance_bound_factor(double h, double K_eff, double eps); // h(1+2/(1-e^{-Kh/eps}))

// Bias bound for mu_0 = pi_0 (transport term vanishes):
// (eps/K) sup_t sd_pi[phi_t] sup_t sd_pi[f_t].
double functional_bias_bound(double eps, double K, double sup_sd_phi, double sup_sd_f);

// One-sample KS statistic against the standard normal plus a pass/fail report
// at `threshold` (default 1.5 * 1.36/sqrt(N)).
std::pair<double, BoundReport> clt_check(std::span<const double> standardized,
                                         std::optional<double> threshold = std::nullopt);

// Total-variation bound between the diffusion path law and its discretization.
double tv_bound(double eps, double h, double K, double L, double M, int d, double mu0_V,
                double sup_dt_xstar, double delta_param = 0.5);

// Newton minimizer of U_t (families exposing a Hessian); used by drift_check
// when no analytic minimizer is available.
std::vector<double> minimize_potential(const AnnealingPotential& p, double t,
                                       double tol = 1e-12, int max_iters = 200);

} // namespace anneal
