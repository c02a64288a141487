#pragma once
// Annealing potentials U_t on R^d, t in [0,1]: interface, the Gaussian /
// coordinate-product / Bayesian logistic regression families, and the
// assumption-constant computation (K, L, M, xi, lambda_max).

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anneal {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strong-convexity / Lipschitz / time-continuity constants of a family.
struct AssumptionConstants {
  double K = 0;          // strong convexity
  double L = 0;          // Lipschitz gradient, K <= L
  double M = 0;          // time continuity
  double xi = 0;         // logistic only
  double lambda_max = 0; // largest eigenvalue of (1/m) C^T C, logistic only
};

class AnnealingPotential {
 public:
  virtual ~AnnealingPotential() = default;

  int dim() const { return d_; }
  const std::string& family() const { return family_; }

  virtual double u(double t, std::span<const double> x) const = 0;
  virtual void grad_u(double t, std::span<const double> x, std::span<double> out) const = 0;
  virtual double dt_u(double t, std::span<const double> x) const = 0;

  // --- optional analytic capabilities ---
  virtual bool has_log_z() const { return false; }
  virtual double log_z(double /*t*/) const { throw NumericError("log_z not available"); }

  virtual bool has_minimizer() const { return false; }
  virtual void minimizer(double /*t*/, std::span<double> /*out*/) const {
    throw NumericError("minimizer not available");
  }

  virtual bool has_pi0_sampler() const { return false; }
  // Deterministic draw from pi_0 for the given (seed, replicate).
  virtual void sample_pi0(uint64_t /*seed*/, uint32_t /*replicate*/,
                          std::span<double> /*out*/) const {
    throw NumericError("pi_0 sampler not available");
  }

  virtual bool has_mean_dt_u() const { return false; }
  virtual double mean_dt_u(double /*t*/) const { // pi_t(dt U_t)
    throw NumericError("pi_t(dt_u) not available");
  }

  // Exact sampler of pi_t for any t (Gaussian families); used by the
  // asymptotic-variance estimator for stationary starts.
  virtual bool has_pi_t_sampler() const { return false; }
  virtual void sample_pi_t(double /*t*/, uint64_t /*seed*/, uint32_t /*replicate*/,
                           std::span<double> /*out*/) const {
    throw NumericError("pi_t sampler not available");
  }

  virtual bool has_hessian() const { return false; }
  virtual void hessian(double /*t*/, std::span<const double> /*x*/,
                       std::span<double> /*out_rowmajor*/) const {
    throw NumericError("hessian not available");
  }

  // Isotropic quadratic fast path: grad_u = curvature(t) * x and
  // dt_u = dt_weight(t) * ||x||^2.
  virtual bool isotropic_quadratic() const { return false; }
  virtual double curvature(double /*t*/) const { throw NumericError("not quadratic"); }
  virtual double dt_weight(double /*t*/) const { throw NumericError("not quadratic"); }

  // --- batched evaluation over an SoA tile (lane r of row j at x[j*lanes+r]).
  // Defaults gather each lane and call the scalar entry points, so the batch
  // path is bit-identical to the scalar one by construction.
  virtual void grad_u_batch(double t, const double* x, double* out, size_t lanes) const;
  virtual void dt_u_batch(double t, const double* x, double* out, size_t lanes) const;
  virtual void sample_pi0_batch(uint64_t seed, uint32_t rep0, double* x, size_t lanes) const;

 protected:
  AnnealingPotential(int d, std::string family) : d_(d), family_(std::move(family)) {}
  int d_;
  std::string family_;
};

// One-dimensional potential family for product paths.
struct Potential1D {
  std::function<double(double t, double x)> u;
  std::function<double(double t, double x)> du_dx;
  std::function<double(double t, double x)> du_dt;
  // optional analytic pieces; when absent they are computed by quadrature
  std::function<double(double t)> log_z;      // log integral of exp(-u_t)
  std::function<double(double t)> mean_dt_u;  // pi_t(du_dt)
  std::function<double(double u01)> sample0;  // quantile function of pi_0
  double curvature_hint = 1.0;                // lower bound on d2u/dx2 for quadrature brackets
};

Potential1D gaussian_1d(double var0, double var1, bool analytic_log_z = true);

struct LogisticModel {
  std::vector<double> covariates; // m x d, row-major
  std::vector<double> responses;  // m entries in {0,1}
  int m = 0;
  int d = 0;
  double prior_variance = 1.0; // sigma-tilde^2
};

// CSV with a header row; first column is the 0/1 response, remaining columns
// are covariates.
LogisticModel load_logistic_csv(const std::string& path, double prior_variance);

std::unique_ptr<AnnealingPotential> gaussian_path(int d, double var0, double var1);
std::unique_ptr<AnnealingPotential> product_path(int d, Potential1D family);
std::unique_ptr<AnnealingPotential> logistic_path(LogisticModel model);

// Known constant formulas (Gaussian and logistic families).
AssumptionConstants compute_constants(const AnnealingPotential& p);

// Largest eigenvalue of (1/m) C^T C by power iteration.
double logistic_lambda_max(const LogisticModel& model, double rel_tol = 1e-10,
                           int max_iters = 10000);

// Overflow-safe log(1 + e^z).
double softplus(double z);
double sigmoid(double z);

} // namespace anneal
