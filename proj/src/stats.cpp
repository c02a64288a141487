#include "anneal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "anneal/philox.hpp"
#include "anneal/rng.hpp"

namespace anneal {

Moments moments(std::span<const double> values) {
  const size_t n = values.size();
  if (n == 0) throw std::invalid_argument("moments: empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
  return {mean, var, std::sqrt(var / static_cast<double>(n)), n};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_icdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal_icdf: u outside (0,1)");
  return rngcore::normal_icdf(u);
}

double ks_statistic_normal(std::span<const double> values) {
  const size_t n = values.size();
  if (n == 0) throw std::invalid_argument("ks_statistic_normal: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double cdf = normal_cdf(sorted[i]);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - cdf;
    const double lo = cdf - static_cast<double>(i) / static_cast<double>(n);
    d = std::max({d, hi, lo});
  }
  return d;
}

double bootstrap_se(std::span<const double> values, uint64_t seed, int resamples,
                    const std::function<double(std::span<const double>)>& statistic) {
  const auto n = static_cast<uint32_t>(values.size());
  if (n == 0) throw std::invalid_argument("bootstrap_se: empty sample");
  std::vector<double> resample(n);
  std::vector<double> stats(static_cast<size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (uint32_t i = 0; i < n; ++i)
      resample[i] = values[index_at(seed, Domain::bootstrap, static_cast<uint32_t>(b), 0, i, n)];
    stats[static_cast<size_t>(b)] = statistic(resample);
  }
  const Moments m = moments(stats);
  return std::sqrt(m.variance);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty sample");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : values) mx = std::max(mx, v);
  if (!std::isfinite(mx)) {
    if (mx == -std::numeric_limits<double>::infinity())
      throw std::domain_error("log_mean_exp: all weights are zero");
    return mx; // +inf propagates
  }
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc / static_cast<double>(values.size()));
}

} // namespace anneal
