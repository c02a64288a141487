#pragma once
// Euler-Maruyama simulation of the annealing diffusion, synchronous coupled
// pairs, and frozen-drift (time-homogeneous) chains. Replicates are pure
// functions of (seed, replicate index); ensembles tile replicates into SoA
// blocks processed by the runtime-selected kernels, bit-identical to the
// single-replicate path.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anneal/potential.hpp"

namespace anneal {

struct DivergenceError : std::runtime_error {
  long step;
  uint32_t replicate;
  DivergenceError(long step_, uint32_t replicate_)
      : std::runtime_error("trajectory diverged at step " + std::to_string(step_) +
                           " (replicate " + std::to_string(replicate_) +
                           "); reduce h/epsilon"),
        step(step_),
        replicate(replicate_) {}
};

struct RunConfig {
  int d = 1;
  double epsilon = 1.0; // temperature
  double h = 1e-2;      // step size in (0, 1]
  uint64_t seed = 0;
  bool store_states = true;     // full skeleton vs endpoint-only
  bool accumulate_dt_u = true;  // track h * sum_k dtU_{kh}(X_kh)

  long n_steps() const; // floor(1/h), with a guard for h = 1/n rounding
  void validate() const;
};

struct SkeletonPath {
  int d = 0;
  double h = 0;
  std::vector<double> times;  // n entries (k*h), only in store_states mode
  std::vector<double> states; // n x d row-major, only in store_states mode
  double sum_dt_u = 0;        // h * sum_{k=0}^{n-1} dtU_{kh}(X_kh)
  std::vector<double> endpoint; // state after n full steps
};

struct CoupledPair {
  SkeletonPath x, y;
  double initial_separation = 0;
  std::vector<double> separation; // at t = k*h for k = 0..n (endpoint included)
};

struct EnsembleSummary {
  uint32_t rep0 = 0;
  std::vector<double> sum_dt_u;   // one per replicate
  std::vector<double> endpoints;  // count x d row-major
};

// One explicit update: x - (h/eps) grad U_t(x) + sqrt(2h/eps) * noise.
std::vector<double> euler_step(const AnnealingPotential& p, double t, std::span<const double> x,
                               double eps, double h, std::span<const double> noise);

SkeletonPath simulate_skeleton(const AnnealingPotential& p, const RunConfig& cfg,
                               uint32_t replicate = 0);
SkeletonPath simulate_skeleton(const AnnealingPotential& p, const RunConfig& cfg,
                               std::span<const double> x0, uint32_t replicate = 0);

// All replicates in [rep0, rep0+count); endpoint-only storage.
EnsembleSummary simulate_ensemble(const AnnealingPotential& p, const RunConfig& cfg, uint32_t rep0,
                                  uint32_t count, int workers = 1);

// Both legs consume the identical noise stream (synchronous coupling).
CoupledPair simulate_coupled(const AnnealingPotential& p, const RunConfig& cfg,
                             std::span<const double> x0, std::span<const double> y0,
                             uint32_t replicate = 0);

// Time-homogeneous chain with drift frozen at time s; returns (steps+1) x d
// states including y0.
std::vector<double> simulate_frozen(const AnnealingPotential& p, double s, const RunConfig& cfg,
                                    std::span<const double> y0, long steps,
                                    uint32_t replicate = 0);

// Little-endian binary trajectory dump: 8-byte magic, u64 n, u64 d, then
// n*d f64 row-major (step, coordinate).
void write_trajectory(const std::string& path, const SkeletonPath& skel);
SkeletonPath read_trajectory(const std::string& path);

} // namespace anneal
