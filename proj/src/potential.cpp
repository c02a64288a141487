#include "anneal/potential.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "anneal/kernels.hpp"
#include "anneal/quadrature.hpp"
#include "anneal/rng.hpp"

namespace anneal {

double softplus(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void AnnealingPotential::grad_u_batch(double t, const double* x, double* out, size_t lanes) const {
  std::vector<double> xb(static_cast<size_t>(d_)), gb(static_cast<size_t>(d_));
  for (size_t r = 0; r < lanes; ++r) {
    for (int j = 0; j < d_; ++j) xb[static_cast<size_t>(j)] = x[static_cast<size_t>(j) * lanes + r];
    grad_u(t, xb, gb);
    for (int j = 0; j < d_; ++j) out[static_cast<size_t>(j) * lanes + r] = gb[static_cast<size_t>(j)];
  }
}

void AnnealingPotential::dt_u_batch(double t, const double* x, double* out, size_t lanes) const {
  std::vector<double> xb(static_cast<size_t>(d_));
  for (size_t r = 0; r < lanes; ++r) {
    for (int j = 0; j < d_; ++j) xb[static_cast<size_t>(j)] = x[static_cast<size_t>(j) * lanes + r];
    out[r] = dt_u(t, xb);
  }
}

void AnnealingPotential::sample_pi0_batch(uint64_t seed, uint32_t rep0, double* x,
                                          size_t lanes) const {
  std::vector<double> xb(static_cast<size_t>(d_));
  for (size_t r = 0; r < lanes; ++r) {
    sample_pi0(seed, rep0 + static_cast<uint32_t>(r), xb);
    for (int j = 0; j < d_; ++j) x[static_cast<size_t>(j) * lanes + r] = xb[static_cast<size_t>(j)];
  }
}

namespace {

double sqnorm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc = acc + v * v;
  return acc;
}

// --- Gaussian path: U_t(x) = ||x||^2 / (2 sigma_t^2), sigma_t^2 linear in t.
class GaussianPath final : public AnnealingPotential {
 public:
  GaussianPath(int d, double var0, double var1)
      : AnnealingPotential(d, "gaussian"), var0_(var0), var1_(var1) {}

  double var_t(double t) const { return (1.0 - t) * var0_ + t * var1_; }

  double u(double t, std::span<const double> x) const override {
    return sqnorm(x) / (2.0 * var_t(t));
  }
  void grad_u(double t, std::span<const double> x, std::span<double> out) const override {
    const double c = curvature(t);
    for (size_t j = 0; j < x.size(); ++j) out[j] = c * x[j];
  }
  double dt_u(double t, std::span<const double> x) const override {
    return dt_weight(t) * sqnorm(x);
  }

  bool has_log_z() const override { return true; }
  double log_z(double t) const override {
    return 0.5 * d_ * std::log(2.0 * M_PI * var_t(t));
  }
  bool has_minimizer() const override { return true; }
  void minimizer(double, std::span<double> out) const override {
    for (auto& v : out) v = 0.0;
  }
  bool has_pi0_sampler() const override { return true; }
  void sample_pi0(uint64_t seed, uint32_t replicate, std::span<double> out) const override {
    sample_gaussian(std::sqrt(var0_), seed, Domain::pi0, replicate, out);
  }
  bool has_mean_dt_u() const override { return true; }
  double mean_dt_u(double t) const override { return dt_weight(t) * d_ * var_t(t); }
  bool has_pi_t_sampler() const override { return true; }
  void sample_pi_t(double t, uint64_t seed, uint32_t replicate,
                   std::span<double> out) const override {
    sample_gaussian(std::sqrt(var_t(t)), seed, Domain::stationary, replicate, out);
  }
  bool has_hessian() const override { return true; }
  void hessian(double t, std::span<const double>, std::span<double> out) const override {
    const double c = curvature(t);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) out[static_cast<size_t>(i * d_ + j)] = (i == j) ? c : 0.0;
  }

  bool isotropic_quadratic() const override { return true; }
  double curvature(double t) const override { return 1.0 / var_t(t); }
  double dt_weight(double t) const override {
    const double v = var_t(t);
    return -(var1_ - var0_) / (2.0 * v * v);
  }

  void grad_u_batch(double t, const double* x, double* out, size_t lanes) const override {
    kernels::ops().scale(out, x, curvature(t), static_cast<size_t>(d_) * lanes);
  }
  void dt_u_batch(double t, const double* x, double* out, size_t lanes) const override {
    kernels::ops().sqnorm_soa(x, nullptr, static_cast<size_t>(d_), lanes, out);
    kernels::ops().scale(out, out, dt_weight(t), lanes);
  }
  void sample_pi0_batch(uint64_t seed, uint32_t rep0, double* x, size_t lanes) const override {
    sample_gaussian_batch(std::sqrt(var0_), seed, Domain::pi0, rep0, x, lanes);
  }

  double var0() const { return var0_; }
  double var1() const { return var1_; }

 private:
  void sample_gaussian(double sd, uint64_t seed, Domain dom, uint32_t replicate,
                       std::span<double> out) const {
    for (int j = 0; j < d_; j += 2) {
      double z0, z1;
      const rngcore::Ctr c{{0u, static_cast<uint32_t>(j) >> 1, replicate,
                            static_cast<uint32_t>(dom)}};
      rngcore::block_normals(c, rngcore::key_from_seed(seed), z0, z1);
      out[static_cast<size_t>(j)] = sd * z0;
      if (j + 1 < d_) out[static_cast<size_t>(j) + 1] = sd * z1;
    }
  }
  void sample_gaussian_batch(double sd, uint64_t seed, Domain dom, uint32_t rep0, double* x,
                             size_t lanes) const {
    const auto& K = kernels::ops();
    std::vector<double> scratch(lanes);
    for (int j = 0; j < d_; j += 2) {
      double* row0 = x + static_cast<size_t>(j) * lanes;
      double* row1 = (j + 1 < d_) ? x + (static_cast<size_t>(j) + 1) * lanes : scratch.data();
      K.normal_pairs(seed, static_cast<uint32_t>(dom), 0u, static_cast<uint32_t>(j) >> 1, rep0,
                     lanes, row0, row1);
      K.scale(row0, row0, sd, lanes);
      if (j + 1 < d_) K.scale(row1, row1, sd, lanes);
    }
  }

  double var0_, var1_;
};

// --- Coordinate product of a 1-d family: U_t(x) = sum_j u_t(x^j).
class ProductPath final : public AnnealingPotential {
 public:
  ProductPath(int d, Potential1D fam)
      : AnnealingPotential(d, "product"), fam_(std::move(fam)) {}

  double u(double t, std::span<const double> x) const override {
    double acc = 0.0;
    for (double v : x) acc += fam_.u(t, v);
    return acc;
  }
  void grad_u(double t, std::span<const double> x, std::span<double> out) const override {
    for (size_t j = 0; j < x.size(); ++j) out[j] = fam_.du_dx(t, x[j]);
  }
  double dt_u(double t, std::span<const double> x) const override {
    double acc = 0.0;
    for (double v : x) acc += fam_.du_dt(t, v);
    return acc;
  }

  bool has_log_z() const override { return true; }
  double log_z(double t) const override { return d_ * log_z_1d(t); }

  bool has_pi0_sampler() const override { return static_cast<bool>(fam_.sample0); }
  void sample_pi0(uint64_t seed, uint32_t replicate, std::span<double> out) const override {
    if (!fam_.sample0) throw NumericError("1-d family has no pi_0 sampler");
    for (int j = 0; j < d_; ++j)
      out[static_cast<size_t>(j)] = fam_.sample0(
          uniform_at(seed, Domain::pi0, replicate, 0, static_cast<uint32_t>(j)));
  }

  bool has_mean_dt_u() const override { return true; }
  double mean_dt_u(double t) const override {
    if (fam_.mean_dt_u) return d_ * fam_.mean_dt_u(t);
    const double mode = minimizer_1d(t);
    const auto weight = [&](double x) { return std::exp(-fam_.u(t, x)); };
    const QuadResult z = integrate_line(weight, mode, fam_.curvature_hint, 1e-12);
    const QuadResult num = integrate_line(
        [&](double x) { return fam_.du_dt(t, x) * weight(x); }, mode, fam_.curvature_hint, 1e-12);
    return d_ * num.value / z.value;
  }

  const Potential1D& family_1d() const { return fam_; }

  double log_z_1d(double t) const {
    if (fam_.log_z) return fam_.log_z(t);
    const double mode = minimizer_1d(t);
    const double peak = fam_.u(t, mode);
    // Factor out the peak so the integrand is O(1).
    const QuadResult q = integrate_line(
        [&](double x) { return std::exp(-(fam_.u(t, x) - peak)); }, mode, fam_.curvature_hint,
        1e-12);
    return std::log(q.value) - peak;
  }

 private:
  double minimizer_1d(double t) const {
    // du_dx is increasing (convex family); expanding bracket + bisection.
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 200 && fam_.du_dx(t, lo) > 0.0; ++i) lo *= 2.0;
    for (int i = 0; i < 200 && fam_.du_dx(t, hi) < 0.0; ++i) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (fam_.du_dx(t, mid) <= 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  Potential1D fam_;
};

// --- Bayesian logistic regression annealed from its Gaussian prior.
class LogisticPath final : public AnnealingPotential {
 public:
  explicit LogisticPath(LogisticModel model)
      : AnnealingPotential(model.d, "logistic"), model_(std::move(model)) {
    ytc_.assign(static_cast<size_t>(d_), 0.0);
    for (int i = 0; i < model_.m; ++i)
      for (int j = 0; j < d_; ++j)
        ytc_[static_cast<size_t>(j)] +=
            model_.responses[static_cast<size_t>(i)] * cov(i, j);
  }

  double u(double t, std::span<const double> x) const override {
    check_finite(x);
    double lik = 0.0, lin = 0.0;
    for (int i = 0; i < model_.m; ++i) lik += softplus(dot_row(i, x));
    for (int j = 0; j < d_; ++j) lin += ytc_[static_cast<size_t>(j)] * x[static_cast<size_t>(j)];
    return -t * lin + t * lik + sqnorm(x) / (2.0 * model_.prior_variance);
  }

  void grad_u(double t, std::span<const double> x, std::span<double> out) const override {
    check_finite(x);
    const double ip = 1.0 / model_.prior_variance;
    for (int j = 0; j < d_; ++j)
      out[static_cast<size_t>(j)] =
          ip * x[static_cast<size_t>(j)] - t * ytc_[static_cast<size_t>(j)];
    for (int i = 0; i < model_.m; ++i) {
      const double p = sigmoid(dot_row(i, x));
      for (int j = 0; j < d_; ++j) out[static_cast<size_t>(j)] += t * cov(i, j) * p;
    }
  }

  double dt_u(double t, std::span<const double> x) const override {
    (void)t;
    check_finite(x);
    double lik = 0.0, lin = 0.0;
    for (int i = 0; i < model_.m; ++i) lik += softplus(dot_row(i, x));
    for (int j = 0; j < d_; ++j) lin += ytc_[static_cast<size_t>(j)] * x[static_cast<size_t>(j)];
    return -lin + lik;
  }

  bool has_pi0_sampler() const override { return true; }
  void sample_pi0(uint64_t seed, uint32_t replicate, std::span<double> out) const override {
    const double sd = std::sqrt(model_.prior_variance);
    for (int j = 0; j < d_; j += 2) {
      double z0, z1;
      const rngcore::Ctr c{{0u, static_cast<uint32_t>(j) >> 1, replicate,
                            static_cast<uint32_t>(Domain::pi0)}};
      rngcore::block_normals(c, rngcore::key_from_seed(seed), z0, z1);
      out[static_cast<size_t>(j)] = sd * z0;
      if (j + 1 < d_) out[static_cast<size_t>(j) + 1] = sd * z1;
    }
  }

  bool has_hessian() const override { return true; }
  void hessian(double t, std::span<const double> x, std::span<double> out) const override {
    const double ip = 1.0 / model_.prior_variance;
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b) out[static_cast<size_t>(a * d_ + b)] = (a == b) ? ip : 0.0;
    for (int i = 0; i < model_.m; ++i) {
      const double p = sigmoid(dot_row(i, x));
      const double w = t * p * (1.0 - p);
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b)
          out[static_cast<size_t>(a * d_ + b)] += w * cov(i, a) * cov(i, b);
    }
  }

  const LogisticModel& model() const { return model_; }
  std::span<const double> yt_c() const { return ytc_; }

 private:
  double cov(int i, int j) const { return model_.covariates[static_cast<size_t>(i * d_ + j)]; }
  double dot_row(int i, std::span<const double> x) const {
    double acc = 0.0;
    for (int j = 0; j < d_; ++j) acc += cov(i, j) * x[static_cast<size_t>(j)];
    return acc;
  }
  static void check_finite(std::span<const double> x) {
    for (double v : x)
      if (!std::isfinite(v)) throw NumericError("logistic potential: non-finite input");
  }

  LogisticModel model_;
  std::vector<double> ytc_;
};

} // namespace

Potential1D gaussian_1d(double var0, double var1, bool analytic_log_z) {
  if (!(var0 > 0.0) || !(var1 > 0.0) || !std::isfinite(var0) || !std::isfinite(var1))
    throw std::invalid_argument("gaussian_1d: variances must be positive and finite");
  Potential1D f;
  const double dvar = var1 - var0;
  auto var_t = [=](double t) { return (1.0 - t) * var0 + t * var1; };
  f.u = [=](double t, double x) { return x * x / (2.0 * var_t(t)); };
  f.du_dx = [=](double t, double x) { return x / var_t(t); };
  f.du_dt = [=](double t, double x) {
    const double v = var_t(t);
    return -dvar * x * x / (2.0 * v * v);
  };
  if (analytic_log_z) {
    f.log_z = [=](double t) { return 0.5 * std::log(2.0 * M_PI * var_t(t)); };
    f.mean_dt_u = [=](double t) { return -dvar / (2.0 * var_t(t)); };
  }
  f.sample0 = [=](double u01) { return std::sqrt(var0) * rngcore::normal_icdf(u01); };
  f.curvature_hint = 1.0 / std::max(var0, var1);
  return f;
}

std::unique_ptr<AnnealingPotential> gaussian_path(int d, double var0, double var1) {
  if (d < 1) throw std::invalid_argument("gaussian_path: d must be positive");
  if (!(var0 > 0.0) || !(var1 > 0.0) || !std::isfinite(var0) || !std::isfinite(var1))
    throw std::invalid_argument("gaussian_path: variances must be positive and finite");
  return std::make_unique<GaussianPath>(d, var0, var1);
}

std::unique_ptr<AnnealingPotential> product_path(int d, Potential1D family) {
  if (d < 1) throw std::invalid_argument("product_path: d must be positive");
  if (!family.u || !family.du_dx || !family.du_dt)
    throw std::invalid_argument("product_path: 1-d family needs u, du_dx, du_dt");
  return std::make_unique<ProductPath>(d, std::move(family));
}

std::unique_ptr<AnnealingPotential> logistic_path(LogisticModel model) {
  if (model.d < 1 || model.m < 0) throw std::invalid_argument("logistic_path: bad dimensions");
  if (!(model.prior_variance > 0.0))
    throw std::invalid_argument("logistic_path: prior variance must be positive");
  if (model.covariates.size() != static_cast<size_t>(model.m * model.d) ||
      model.responses.size() != static_cast<size_t>(model.m))
    throw std::invalid_argument("logistic_path: inconsistent model arrays");
  for (double c : model.covariates)
    if (!std::isfinite(c)) throw std::invalid_argument("logistic_path: non-finite covariate");
  for (double y : model.responses)
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("logistic_path: responses must be 0/1");
  return std::make_unique<LogisticPath>(std::move(model));
}

double logistic_lambda_max(const LogisticModel& model, double rel_tol, int max_iters) {
  const int d = model.d, m = model.m;
  if (m == 0) return 0.0;
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    // out = (1/m) C^T (C v)
    std::vector<double> cv(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j)
        cv[static_cast<size_t>(i)] +=
            model.covariates[static_cast<size_t>(i * d + j)] * v[static_cast<size_t>(j)];
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j)
        out[static_cast<size_t>(j)] +=
            model.covariates[static_cast<size_t>(i * d + j)] * cv[static_cast<size_t>(i)] / m;
  };
  std::vector<double> v(static_cast<size_t>(d)), w(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = 1.0 + 1e-3 * j; // break symmetry
  double norm = std::sqrt(sqnorm(v));
  for (auto& x : v) x /= norm;
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    apply(v, w);
    double rayleigh = 0.0;
    for (int j = 0; j < d; ++j) rayleigh += v[static_cast<size_t>(j)] * w[static_cast<size_t>(j)];
    const double wnorm = std::sqrt(sqnorm(w));
    if (wnorm == 0.0) return 0.0;
    for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = w[static_cast<size_t>(j)] / wnorm;
    if (it > 0 && std::abs(rayleigh - lambda) <= rel_tol * std::abs(rayleigh)) return rayleigh;
    lambda = rayleigh;
  }
  throw NumericError("power iteration did not converge");
}

AssumptionConstants compute_constants(const AnnealingPotential& p) {
  if (const auto* g = dynamic_cast<const GaussianPath*>(&p)) {
    const double vmax = std::max(g->var0(), g->var1());
    const double vmin = std::min(g->var0(), g->var1());
    AssumptionConstants c;
    c.K = 1.0 / vmax;
    c.L = 1.0 / vmin;
    // Tightest (A5) constant: sup_{x,s,t} ||grad_t - grad_s|| / (|t-s| sqrt(1+||x||^2))
    // = |var1 - var0| / vmin^2, attained as ||x|| -> inf; rewritten as
    // |1/var1 - 1/var0| * (vmax/vmin).
    c.M = std::abs(1.0 / g->var1() - 1.0 / g->var0()) * (vmax / vmin);
    return c;
  }
  if (const auto* l = dynamic_cast<const LogisticPath*>(&p)) {
    const LogisticModel& m = l->model();
    AssumptionConstants c;
    double xi = 0.0;
    for (int i = 0; i < m.m; ++i) {
      double row = 0.0;
      for (int j = 0; j < m.d; ++j) {
        const double cij = m.covariates[static_cast<size_t>(i * m.d + j)];
        row += cij * cij;
      }
      xi += std::sqrt(row);
    }
    xi += std::sqrt(sqnorm(l->yt_c()));
    c.xi = xi;
    c.lambda_max = logistic_lambda_max(m);
    const double inv_prior = 1.0 / m.prior_variance;
    c.K = inv_prior;
    c.L = std::max(0.25 * m.m * c.lambda_max + inv_prior, std::max(xi, inv_prior));
    c.M = xi;
    return c;
  }
  throw NumericError("compute_constants: no constant formulas for family '" + p.family() + "'");
}

LogisticModel load_logistic_csv(const std::string& path, double prior_variance) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open logistic data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("logistic data file is empty: " + path);
  LogisticModel model;
  model.prior_variance = prior_variance;
  int columns = -1;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || !std::isfinite(v))
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad number '" +
                                    cell + "'");
      row.push_back(v);
    }
    if (columns < 0) columns = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != columns || columns < 2)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": inconsistent column count");
    if (row[0] != 0.0 && row[0] != 1.0)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": response must be 0 or 1");
    model.responses.push_back(row[0]);
    model.covariates.insert(model.covariates.end(), row.begin() + 1, row.end());
  }
  model.m = static_cast<int>(model.responses.size());
  model.d = columns - 1;
  if (model.m < 1) throw std::invalid_argument("logistic data file has no rows: " + path);
  return model;
}

} // namespace anneal
