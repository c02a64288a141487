#pragma once
// Normalizing-constant and expectation estimators: thermodynamic integration,
// the Jarzynski (annealed importance sampling) estimator, self-normalized
// expectations, the naive one-step importance-sampling baseline with its
// analytic relative variance, and the asymptotic variance sigma_ell^2.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anneal/sde.hpp"

namespace anneal {

enum class RefSource { analytic, quadrature, none };

struct EstimateReport {
  std::string estimator;
  double estimate = 0;
  std::vector<double> replicate_values;
  double sample_variance = 0;
  double std_error = 0; // bootstrap SE for nonlinear estimators
  std::optional<double> reference;
  RefSource ref_source = RefSource::none;

  double abs_error() const;
};

std::optional<double> log_ratio_reference(const AnnealingPotential& p);

// Mean of (-sum_dt_u) over replicates.
EstimateReport ti_log_ratio(std::span<const double> sum_dt_u,
                            std::optional<double> reference = std::nullopt);
EstimateReport ti_log_ratio(const std::vector<SkeletonPath>& paths,
                            const AnnealingPotential* p = nullptr);

// log of the mean of exp(-sum_dt_u), log-sum-exp stabilized; bootstrap SE.
EstimateReport jarzynski_log_ratio(std::span<const double> sum_dt_u,
                                   std::optional<double> reference = std::nullopt,
                                   uint64_t bootstrap_seed = 1, int bootstrap_resamples = 1000);
EstimateReport jarzynski_log_ratio(const std::vector<SkeletonPath>& paths,
                                   const AnnealingPotential* p = nullptr);

// Self-normalized weighted mean of phi(endpoint) with weights exp(-sum_dt_u).
EstimateReport weighted_expectation(std::span<const double> sum_dt_u,
                                    std::span<const double> endpoints, int d,
                                    const std::function<double(std::span<const double>)>& phi,
                                    std::optional<double> reference = std::nullopt,
                                    uint64_t bootstrap_seed = 2, int bootstrap_resamples = 1000);
EstimateReport weighted_expectation(const std::vector<SkeletonPath>& paths,
                                    const std::function<double(std::span<const double>)>& phi,
                                    std::optional<double> reference = std::nullopt);

struct NaiveIsResult {
  EstimateReport ratio;                    // mean of W_i, estimates Z_1/Z_0
  std::optional<EstimateReport> expectation; // self-normalized pi_1(phi)
  double relative_variance = 0;            // var[W] / mean[W]^2
};

NaiveIsResult naive_is(const AnnealingPotential& p, uint32_t samples, uint64_t seed,
                       const std::function<double(std::span<const double>)>& phi = nullptr);

// c^d - 1 with c = E[e^{-2 Delta}]/E[e^{-Delta}]^2 computed by 1-d quadrature;
// u0/u1 are the endpoint one-dimensional potentials.
double product_is_relvar(const std::function<double(double)>& u0,
                         const std::function<double(double)>& u1, int d,
                         double curvature_hint = 0.5, double center_hint = 0.0);
// Endpoint slices (t=0 of u0, t=1 of u1) of 1-d families.
double product_is_relvar(const Potential1D& u0, const Potential1D& u1, int d);

// Spectral variance factor phi_lambda(ell) = ell (1+e^{-ell lambda})/(1-e^{-ell lambda}),
// continuously extended to 2/lambda at ell = 0.
double spectral_phi(double lambda, double ell);

// Observable family f_s with analytic pi_s-centering.
struct CenteredObservable {
  std::function<double(double s, std::span<const double> x)> raw;
  std::function<double(double s)> mean; // pi_s(raw_s); nullptr means already centered
  double value(double s, std::span<const double> x) const {
    return mean ? raw(s, x) - mean(s) : raw(s, x);
  }
};

struct AsymptoticVarianceResult {
  double ell = 0;
  double sigma2 = 0;
  double sigma2_se = 0;
  std::vector<std::pair<double, double>> per_s_values; // (s, varsigma_hat(s))
  std::vector<double> per_s_se;
  int truncation_r = 0;
  long burn_in_steps = 0; // 0 when stationary starts are exact
};

struct AsymVarConfig {
  double ell = 0;          // lag parameter; 0 selects the integral regime
  double h_eff = 5e-3;     // inner Euler step (unit temperature), snapped to ell/m
  int n_starts = 20000;    // stationary starts per grid point
  double tol = 1e-6;       // truncation tolerance: r = ceil(-ln(tol)/(K*max(ell, h_eff)))
  uint64_t seed = 0;
  int workers = 1;
  std::vector<double> s_grid; // defaults to 5 midpoints of [0,1]
};

// Monte Carlo estimate of varsigma_ell(s) on the s-grid and its Riemann sum
// sigma_ell^2. The frozen chains run at unit temperature. Requires K > 0 of
// the family for the truncation rule.
AsymptoticVarianceResult asymptotic_variance(const AnnealingPotential& p,
                                             const CenteredObservable& f, double K,
                                             const AsymVarConfig& cfg);

} // namespace anneal
