#pragma once
// Small statistics toolbox: moments with fixed summation order, the standard
// normal CDF/quantile pair, the one-sample Kolmogorov-Smirnov statistic and
// bootstrap standard errors.

#include <cstdint>
#include <functional>
#include <span>

namespace anneal {

struct Moments {
  double mean;
  double variance; // unbiased sample variance
  double std_error; // sqrt(variance / n)
  size_t count;
};

Moments moments(std::span<const double> values);

double normal_cdf(double x);   // via erfc
double normal_icdf(double u);  // PPND16 (shared with the noise kernels)

// sup_x |F_n(x) - Phi(x)| for an i.i.d. sample.
double ks_statistic_normal(std::span<const double> values);

// Bootstrap standard error of `statistic` over resamples of `values`.
double bootstrap_se(std::span<const double> values, uint64_t seed, int resamples,
                    const std::function<double(std::span<const double>)>& statistic);

// log( (1/n) sum exp(v_i) ) evaluated stably.
double log_mean_exp(std::span<const double> values);

} // namespace anneal
