#include "anneal/estimators.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "anneal/kernels.hpp"
#include "anneal/quadrature.hpp"
#include "anneal/rng.hpp"
#include "anneal/stats.hpp"

namespace anneal {

double EstimateReport::abs_error() const {
  return reference ? std::abs(estimate - *reference) : std::numeric_limits<double>::quiet_NaN();
}

std::optional<double> log_ratio_reference(const AnnealingPotential& p) {
  if (!p.has_log_z()) return std::nullopt;
  return p.log_z(1.0) - p.log_z(0.0);
}

namespace {

std::vector<double> negate(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
  return out;
}

std::vector<double> collect_sums(const std::vector<SkeletonPath>& paths) {
  std::vector<double> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.sum_dt_u);
  return out;
}

} // namespace

EstimateReport ti_log_ratio(std::span<const double> sum_dt_u, std::optional<double> reference) {
  if (sum_dt_u.empty()) throw std::invalid_argument("ti_log_ratio: no replicates");
  EstimateReport r;
  r.estimator = "ti";
  r.replicate_values = negate(sum_dt_u);
  const Moments m = moments(r.replicate_values);
  r.estimate = m.mean;
  r.sample_variance = m.variance;
  r.std_error = m.std_error;
  r.reference = reference;
  r.ref_source = reference ? RefSource::analytic : RefSource::none;
  return r;
}

EstimateReport ti_log_ratio(const std::vector<SkeletonPath>& paths, const AnnealingPotential* p) {
  return ti_log_ratio(collect_sums(paths),
                      p != nullptr ? log_ratio_reference(*p) : std::nullopt);
}

EstimateReport jarzynski_log_ratio(std::span<const double> sum_dt_u,
                                   std::optional<double> reference, uint64_t bootstrap_seed,
                                   int bootstrap_resamples) {
  if (sum_dt_u.empty()) throw std::invalid_argument("jarzynski_log_ratio: no replicates");
  EstimateReport r;
  r.estimator = "jarzynski";
  r.replicate_values = negate(sum_dt_u); // log-weights
  r.estimate = log_mean_exp(r.replicate_values);
  const Moments m = moments(r.replicate_values);
  r.sample_variance = m.variance;
  r.std_error = sum_dt_u.size() > 1
                    ? bootstrap_se(r.replicate_values, bootstrap_seed, bootstrap_resamples,
                                   [](std::span<const double> v) { return log_mean_exp(v); })
                    : 0.0;
  r.reference = reference;
  r.ref_source = reference ? RefSource::analytic : RefSource::none;
  return r;
}

EstimateReport jarzynski_log_ratio(const std::vector<SkeletonPath>& paths,
                                   const AnnealingPotential* p) {
  return jarzynski_log_ratio(collect_sums(paths),
                             p != nullptr ? log_ratio_reference(*p) : std::nullopt);
}

namespace {

double self_normalized(std::span<const double> log_w, std::span<const double> phi) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double lw : log_w) mx = std::max(mx, lw);
  if (mx == -std::numeric_limits<double>::infinity())
    throw std::domain_error("weighted_expectation: all weights are zero");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < log_w.size(); ++i) {
    const double w = std::exp(log_w[i] - mx);
    num += w * phi[i];
    den += w;
  }
  return num / den;
}

} // namespace

EstimateReport weighted_expectation(std::span<const double> sum_dt_u,
                                    std::span<const double> endpoints, int d,
                                    const std::function<double(std::span<const double>)>& phi,
                                    std::optional<double> reference, uint64_t bootstrap_seed,
                                    int bootstrap_resamples) {
  const size_t n = sum_dt_u.size();
  if (n == 0) throw std::invalid_argument("weighted_expectation: no replicates");
  if (endpoints.size() != n * static_cast<size_t>(d))
    throw std::invalid_argument("weighted_expectation: endpoint array size mismatch");
  std::vector<double> log_w = negate(sum_dt_u);
  std::vector<double> values(n);
  for (size_t i = 0; i < n; ++i)
    values[i] = phi(endpoints.subspan(i * static_cast<size_t>(d), static_cast<size_t>(d)));

  EstimateReport r;
  r.estimator = "expectation";
  r.replicate_values = values;
  r.estimate = self_normalized(log_w, values);
  const Moments m = moments(values);
  r.sample_variance = m.variance;
  if (n > 1) {
    // Bootstrap over (weight, value) pairs.
    std::vector<double> bw(n), bv(n), stats(static_cast<size_t>(bootstrap_resamples));
    for (int b = 0; b < bootstrap_resamples; ++b) {
      for (uint32_t i = 0; i < n; ++i) {
        const uint32_t k = index_at(bootstrap_seed, Domain::bootstrap, static_cast<uint32_t>(b), 0,
                                    i, static_cast<uint32_t>(n));
        bw[i] = log_w[k];
        bv[i] = values[k];
      }
      stats[static_cast<size_t>(b)] = self_normalized(bw, bv);
    }
    r.std_error = std::sqrt(moments(stats).variance);
  }
  r.reference = reference;
  r.ref_source = reference ? RefSource::analytic : RefSource::none;
  return r;
}

EstimateReport weighted_expectation(const std::vector<SkeletonPath>& paths,
                                    const std::function<double(std::span<const double>)>& phi,
                                    std::optional<double> reference) {
  if (paths.empty()) throw std::invalid_argument("weighted_expectation: no replicates");
  const int d = paths.front().d;
  std::vector<double> sums, endpoints;
  sums.reserve(paths.size());
  endpoints.reserve(paths.size() * static_cast<size_t>(d));
  for (const auto& p : paths) {
    sums.push_back(p.sum_dt_u);
    endpoints.insert(endpoints.end(), p.endpoint.begin(), p.endpoint.end());
  }
  return weighted_expectation(sums, endpoints, d, phi, reference);
}

NaiveIsResult naive_is(const AnnealingPotential& p, uint32_t samples, uint64_t seed,
                       const std::function<double(std::span<const double>)>& phi) {
  if (!p.has_pi0_sampler()) throw NumericError("naive_is: family has no pi_0 sampler");
  if (samples == 0) throw std::invalid_argument("naive_is: need at least one sample");
  const auto d = static_cast<size_t>(p.dim());
  std::vector<double> x(d), log_w(samples), phis(phi ? samples : 0);
  for (uint32_t i = 0; i < samples; ++i) {
    p.sample_pi0(seed, i, x);
    log_w[i] = -(p.u(1.0, x) - p.u(0.0, x));
    if (phi) phis[i] = phi(x);
  }
  const double lme = log_mean_exp(log_w);
  std::vector<double> log_w2(samples);
  for (uint32_t i = 0; i < samples; ++i) log_w2[i] = 2.0 * log_w[i];
  const double lme2 = log_mean_exp(log_w2);
  const auto n = static_cast<double>(samples);
  const double rel_var =
      samples > 1 ? std::max(0.0, (std::exp(lme2 - 2.0 * lme) - 1.0) * n / (n - 1.0)) : 0.0;

  NaiveIsResult out;
  out.ratio.estimator = "is_ratio";
  out.ratio.estimate = std::exp(lme);
  out.ratio.sample_variance = rel_var * out.ratio.estimate * out.ratio.estimate;
  out.ratio.std_error = std::sqrt(out.ratio.sample_variance / n);
  if (auto ref = log_ratio_reference(p)) {
    out.ratio.reference = std::exp(*ref);
    out.ratio.ref_source = RefSource::analytic;
  }
  out.relative_variance = rel_var;
  if (phi) {
    EstimateReport e;
    e.estimator = "is_expectation";
    e.estimate = self_normalized(log_w, phis);
    // Delta-method standard error for the self-normalized estimator.
    double se2 = 0.0;
    for (uint32_t i = 0; i < samples; ++i) {
      const double wn = std::exp(log_w[i] - lme) / n;
      const double dev = phis[i] - e.estimate;
      se2 += wn * wn * dev * dev;
    }
    e.std_error = std::sqrt(se2);
    e.sample_variance = moments(phis).variance;
    out.expectation = std::move(e);
  }
  return out;
}

double product_is_relvar(const std::function<double(double)>& u0,
                         const std::function<double(double)>& u1, int d, double curvature_hint,
                         double center_hint) {
  if (d < 1) throw std::invalid_argument("product_is_relvar: d must be positive");
  const auto z0 = integrate_line([&](double x) { return std::exp(-u0(x)); }, center_hint,
                                 curvature_hint, 1e-11);
  const auto z1 = integrate_line([&](double x) { return std::exp(-u1(x)); }, center_hint,
                                 curvature_hint, 1e-11);
  // E[e^{-2 Delta}] Z0 = integral of exp(u0 - 2 u1); diverges when the second
  // exponential moment is infinite, which integrate_line reports.
  const auto i2 = integrate_line([&](double x) { return std::exp(u0(x) - 2.0 * u1(x)); },
                                 center_hint, curvature_hint, 1e-11);
  const double c = i2.value * z0.value / (z1.value * z1.value);
  if (c < 1.0 - 1e-12)
    throw NumericError("product_is_relvar: c < 1 violates Jensen; quadrature failure");
  const double cc = std::max(c, 1.0);
  return std::pow(cc, d) - 1.0;
}

double product_is_relvar(const Potential1D& u0, const Potential1D& u1, int d) {
  return product_is_relvar([&](double x) { return u0.u(0.0, x); },
                           [&](double x) { return u1.u(1.0, x); }, d,
                           std::min(u0.curvature_hint, u1.curvature_hint), 0.0);
}

double spectral_phi(double lambda, double ell) {
  if (!(lambda > 0.0)) throw std::invalid_argument("spectral_phi: lambda must be positive");
  if (ell < 0.0) throw std::invalid_argument("spectral_phi: ell must be >= 0");
  const double x = ell * lambda;
  if (x < 1e-6) {
    // phi = (2/lambda) * t coth t with t = x/2; series avoids cancellation.
    const double t2 = 0.25 * x * x;
    return (2.0 / lambda) * (1.0 + t2 / 3.0 - t2 * t2 / 45.0);
  }
  const double e = std::exp(-x);
  return ell * (1.0 + e) / (1.0 - e);
}

namespace {

struct FrozenBatch {
  std::vector<double> x, g, z, scratch, gathered;
  void resize(size_t d, size_t lanes) {
    x.assign(d * lanes, 0.0);
    g.assign(d * lanes, 0.0);
    z.assign(d * lanes, 0.0);
    scratch.assign(lanes, 0.0);
    gathered.assign(d, 0.0);
  }
  double observe(const CenteredObservable& f, double s, size_t d, size_t lanes, size_t r) {
    for (size_t j = 0; j < d; ++j) gathered[j] = x[j * lanes + r];
    return f.value(s, gathered);
  }
};

void advance_frozen(const AnnealingPotential& p, double s, double h, uint64_t seed, uint32_t rep0,
                    size_t lanes, long steps, long& step_idx, FrozenBatch& b) {
  const auto& K = kernels::ops();
  const auto d = static_cast<size_t>(p.dim());
  const double c = -h; // unit temperature
  const double sn = std::sqrt(2.0 * h);
  const size_t pairs = (d + 1) / 2;
  for (long k = 0; k < steps; ++k, ++step_idx) {
    for (size_t jp = 0; jp < pairs; ++jp) {
      double* row0 = b.z.data() + (2 * jp) * lanes;
      double* row1 = (2 * jp + 1 < d) ? b.z.data() + (2 * jp + 1) * lanes : b.scratch.data();
      K.normal_pairs(seed, static_cast<uint32_t>(Domain::frozen), static_cast<uint32_t>(step_idx),
                     static_cast<uint32_t>(jp), rep0, lanes, row0, row1);
    }
    p.grad_u_batch(s, b.x.data(), b.g.data(), lanes);
    K.em_step(b.x.data(), b.g.data(), c, sn, b.z.data(), d * lanes);
  }
}

} // namespace

AsymptoticVarianceResult asymptotic_variance(const AnnealingPotential& p,
                                             const CenteredObservable& f, double K,
                                             const AsymVarConfig& cfg) {
  if (!(K > 0.0)) throw std::invalid_argument("asymptotic_variance: K must be positive");
  if (cfg.ell < 0.0) throw std::invalid_argument("asymptotic_variance: ell must be >= 0");
  if (!(cfg.h_eff > 0.0)) throw std::invalid_argument("asymptotic_variance: h_eff must be > 0");
  if (cfg.n_starts < 2) throw std::invalid_argument("asymptotic_variance: need >= 2 starts");

  long steps_per_lag = 1;
  double h = cfg.h_eff;
  double spacing = cfg.h_eff;
  if (cfg.ell > 0.0) {
    steps_per_lag = std::max<long>(1, std::lround(cfg.ell / cfg.h_eff));
    h = cfg.ell / static_cast<double>(steps_per_lag); // exact multiple of the lag
    spacing = cfg.ell;
  }
  const int r_trunc =
      std::max(1, static_cast<int>(std::ceil(-std::log(cfg.tol) / (K * spacing))));
  const bool exact_start = p.has_pi_t_sampler();
  const long burn_in = exact_start ? 0 : static_cast<long>(std::ceil(5.0 / (K * h)));

  std::vector<double> s_grid = cfg.s_grid;
  if (s_grid.empty())
    for (int i = 0; i < 5; ++i) s_grid.push_back((i + 0.5) / 5.0);

  const auto d = static_cast<size_t>(p.dim());
  AsymptoticVarianceResult out;
  out.ell = cfg.ell;
  out.truncation_r = r_trunc;
  out.burn_in_steps = burn_in;

  constexpr size_t kLanes = 16;
  for (size_t si = 0; si < s_grid.size(); ++si) {
    const double s = s_grid[si];
    const uint64_t seed_s = mix_seed(cfg.seed, si);
    const auto n = static_cast<size_t>(cfg.n_starts);
    std::vector<double> v(n), f0_all(n);

    const size_t tiles = (n + kLanes - 1) / kLanes;
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&]() {
      FrozenBatch b;
      std::vector<double> f0(kLanes), acc(kLanes);
      try {
        for (;;) {
          const size_t tile = next.fetch_add(1);
          if (tile >= tiles || failed.load()) return;
          const size_t lanes = std::min(kLanes, n - tile * kLanes);
          const auto rep0 = static_cast<uint32_t>(tile * kLanes);
          b.resize(d, lanes);
          long step_idx = 0;
          if (exact_start) {
            std::vector<double> xb(d);
            for (size_t r = 0; r < lanes; ++r) {
              p.sample_pi_t(s, seed_s, rep0 + static_cast<uint32_t>(r), xb);
              for (size_t j = 0; j < d; ++j) b.x[j * lanes + r] = xb[j];
            }
          } else {
            advance_frozen(p, s, h, seed_s, rep0, lanes, burn_in, step_idx, b);
          }
          for (size_t r = 0; r < lanes; ++r) {
            f0[r] = b.observe(f, s, d, lanes, r);
            acc[r] = f0[r] * f0[r];
          }
          for (int k = 1; k <= r_trunc; ++k) {
            advance_frozen(p, s, h, seed_s, rep0, lanes, steps_per_lag, step_idx, b);
            for (size_t r = 0; r < lanes; ++r)
              acc[r] += 2.0 * f0[r] * b.observe(f, s, d, lanes, r);
          }
          for (size_t r = 0; r < lanes; ++r) {
            v[tile * kLanes + r] = spacing * acc[r];
            f0_all[tile * kLanes + r] = f0[r];
          }
        }
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!failed.exchange(true)) error = std::current_exception();
      }
    };

    const int nw = std::max(1, cfg.workers);
    if (nw == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < nw; ++i) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    }
    if (failed.load()) std::rethrow_exception(error);

    const Moments mf = moments(f0_all);
    if (std::abs(mf.mean) > 5.0 * mf.std_error && mf.std_error > 0.0)
      throw NumericError("asymptotic_variance: observable is not centered under pi_s (|mean| = " +
                         std::to_string(std::abs(mf.mean)) + " > 5 SE = " +
                         std::to_string(5.0 * mf.std_error) + " at s = " + std::to_string(s) + ")");

    const Moments mv = moments(v);
    out.per_s_values.emplace_back(s, mv.mean);
    out.per_s_se.push_back(mv.std_error);
  }

  // Riemann sum over the (midpoint) s-grid.
  double total = 0.0, se2 = 0.0;
  for (size_t i = 0; i < out.per_s_values.size(); ++i) {
    total += out.per_s_values[i].second;
    se2 += out.per_s_se[i] * out.per_s_se[i];
  }
  const auto g = static_cast<double>(out.per_s_values.size());
  out.sigma2 = total / g;
  out.sigma2_se = std::sqrt(se2) / g;
  return out;
}

} // namespace anneal
