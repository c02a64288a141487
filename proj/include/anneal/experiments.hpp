#pragma once
// CLI-facing orchestration: single estimation runs, (d, eps, h) sweeps with
// per-cell resumability, the logistic marginal-likelihood pipeline, and the
// verification (diagnostics) suite.

#include <iosfwd>
#include <optional>
#include <string>

#include "anneal/config.hpp"
#include "anneal/potential.hpp"

namespace anneal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitDiagnostic = 3;

struct CliOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

// Family factory from the [family] section; d_override replaces [family] d
// (used by sweeps).
std::unique_ptr<AnnealingPotential> make_family(const Config& cfg, int d_override = -1);

// Deterministic per-cell seed.
uint64_t cell_seed(uint64_t base, const std::string& family, int d, double epsilon, double h);

int run_estimate(const Config& cfg, const CliOverrides& cli, std::ostream& out);
int run_sweep(const Config& cfg, const CliOverrides& cli, std::ostream& out);
int run_logistic(const std::string& data_csv, const Config& cfg, const CliOverrides& cli,
                 std::ostream& out);
int run_diagnostics(const Config& cfg, const CliOverrides& cli, std::ostream& out);

// log Z_1 by nested adaptive quadrature (d <= 2 only).
double logistic_log_z1_quadrature(const LogisticModel& model, double rel_tol = 1e-9);

} // namespace anneal
