#include "anneal/sde.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "anneal/kernels.hpp"
#include "anneal/rng.hpp"

namespace anneal {

long RunConfig::n_steps() const {
  const double q = 1.0 / h;
  // Guard against 1/h landing just below an integer when h = 1/n.
  return static_cast<long>(std::floor(q + std::max(1e-9, 4.0 * q * 1e-16)));
}

void RunConfig::validate() const {
  if (d < 1) throw std::invalid_argument("RunConfig: d must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("RunConfig: epsilon must be positive and finite");
  if (!(h > 0.0) || !(h <= 1.0) || !std::isfinite(h))
    throw std::invalid_argument("RunConfig: h must lie in (0, 1]");
  if (n_steps() < 1) throw std::invalid_argument("RunConfig: floor(1/h) must be >= 1");
}

std::vector<double> euler_step(const AnnealingPotential& p, double t, std::span<const double> x,
                               double eps, double h, std::span<const double> noise) {
  const size_t d = x.size();
  std::vector<double> g(d), out(x.begin(), x.end());
  p.grad_u(t, x, g);
  const double c = -h / eps;
  const double s = std::sqrt(2.0 * h / eps);
  kernels::ops().em_step(out.data(), g.data(), c, s, noise.data(), d);
  for (double v : out)
    if (!std::isfinite(v)) throw DivergenceError(0, 0);
  return out;
}

namespace {

constexpr size_t kTile = 16;         // replicates per SoA tile
constexpr long kFiniteCheckEvery = 256;

struct TileBuffers {
  std::vector<double> x, g, z, tmp, dtu, scratch;
  void resize(size_t d, size_t lanes) {
    x.assign(d * lanes, 0.0);
    g.assign(d * lanes, 0.0);
    z.assign(d * lanes, 0.0);
    tmp.assign(lanes, 0.0);
    dtu.assign(lanes, 0.0);
    scratch.assign(lanes, 0.0);
  }
};

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Re-run one replicate with per-step checks to locate the diverging step.
[[noreturn]] void locate_divergence(const AnnealingPotential& p, const RunConfig& cfg,
                                    uint32_t replicate, const double* x0_or_null);

// Core driver: one tile of `lanes` replicates starting at rep0. Writes
// sum_dt_u into sums[r] and endpoints (d x lanes SoA gathered on return).
void run_tile(const AnnealingPotential& p, const RunConfig& cfg, uint32_t rep0, size_t lanes,
              const double* x0_or_null, TileBuffers& buf, double* sums, double* endpoints_rowmajor,
              SkeletonPath* record /* lanes==1 only */) {
  const auto& K = kernels::ops();
  const auto d = static_cast<size_t>(cfg.d);
  const long n = cfg.n_steps();
  const double c = -cfg.h / cfg.epsilon;
  const double s = std::sqrt(2.0 * cfg.h / cfg.epsilon);

  buf.resize(d, lanes);
  if (x0_or_null != nullptr) {
    for (size_t j = 0; j < d; ++j)
      for (size_t r = 0; r < lanes; ++r) buf.x[j * lanes + r] = x0_or_null[j];
  } else {
    if (!p.has_pi0_sampler())
      throw NumericError("simulate: no x0 given and the family has no pi_0 sampler");
    p.sample_pi0_batch(cfg.seed, rep0, buf.x.data(), lanes);
  }

  const size_t pairs = (d + 1) / 2;
  for (long k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.h;
    if (record != nullptr) {
      record->times.push_back(t);
      for (size_t j = 0; j < d; ++j) record->states.push_back(buf.x[j * lanes]);
    }
    if (cfg.accumulate_dt_u) {
      p.dt_u_batch(t, buf.x.data(), buf.tmp.data(), lanes);
      K.axpy(buf.dtu.data(), buf.tmp.data(), 1.0, lanes);
    }
    for (size_t jp = 0; jp < pairs; ++jp) {
      double* row0 = buf.z.data() + (2 * jp) * lanes;
      double* row1 = (2 * jp + 1 < d) ? buf.z.data() + (2 * jp + 1) * lanes : buf.scratch.data();
      K.normal_pairs(cfg.seed, static_cast<uint32_t>(Domain::path_noise),
                     static_cast<uint32_t>(k), static_cast<uint32_t>(jp), rep0, lanes, row0, row1);
    }
    p.grad_u_batch(t, buf.x.data(), buf.g.data(), lanes);
    K.em_step(buf.x.data(), buf.g.data(), c, s, buf.z.data(), d * lanes);

    if ((k % kFiniteCheckEvery) == kFiniteCheckEvery - 1 || k == n - 1) {
      if (!all_finite(buf.x)) {
        for (size_t r = 0; r < lanes; ++r) {
          bool bad = false;
          for (size_t j = 0; j < d; ++j) bad |= !std::isfinite(buf.x[j * lanes + r]);
          if (bad) locate_divergence(p, cfg, rep0 + static_cast<uint32_t>(r), x0_or_null);
        }
      }
    }
  }

  for (size_t r = 0; r < lanes; ++r) {
    sums[r] = cfg.h * buf.dtu[r];
    for (size_t j = 0; j < d; ++j) endpoints_rowmajor[r * d + j] = buf.x[j * lanes + r];
  }
}

[[noreturn]] void locate_divergence(const AnnealingPotential& p, const RunConfig& cfg,
                                    uint32_t replicate, const double* x0_or_null) {
  const auto d = static_cast<size_t>(cfg.d);
  const long n = cfg.n_steps();
  TileBuffers buf;
  buf.resize(d, 1);
  if (x0_or_null != nullptr) {
    for (size_t j = 0; j < d; ++j) buf.x[j] = x0_or_null[j];
  } else {
    p.sample_pi0_batch(cfg.seed, replicate, buf.x.data(), 1);
  }
  const auto& K = kernels::ops();
  const double c = -cfg.h / cfg.epsilon;
  const double s = std::sqrt(2.0 * cfg.h / cfg.epsilon);
  const size_t pairs = (d + 1) / 2;
  for (long k = 0; k < n; ++k) {
    for (size_t jp = 0; jp < pairs; ++jp) {
      double* row0 = buf.z.data() + 2 * jp;
      double* row1 = (2 * jp + 1 < d) ? buf.z.data() + 2 * jp + 1 : buf.scratch.data();
      K.normal_pairs(cfg.seed, static_cast<uint32_t>(Domain::path_noise),
                     static_cast<uint32_t>(k), static_cast<uint32_t>(jp), replicate, 1, row0, row1);
    }
    p.grad_u_batch(static_cast<double>(k) * cfg.h, buf.x.data(), buf.g.data(), 1);
    K.em_step(buf.x.data(), buf.g.data(), c, s, buf.z.data(), d);
    if (!all_finite(buf.x)) throw DivergenceError(k, replicate);
  }
  throw DivergenceError(n - 1, replicate); // non-finite dt_u accumulation
}

SkeletonPath run_single(const AnnealingPotential& p, const RunConfig& cfg,
                        const double* x0_or_null, uint32_t replicate) {
  cfg.validate();
  SkeletonPath out;
  out.d = cfg.d;
  out.h = cfg.h;
  out.endpoint.assign(static_cast<size_t>(cfg.d), 0.0);
  if (cfg.store_states) {
    out.times.reserve(static_cast<size_t>(cfg.n_steps()));
    out.states.reserve(static_cast<size_t>(cfg.n_steps()) * static_cast<size_t>(cfg.d));
  }
  TileBuffers buf;
  double sum = 0.0;
  run_tile(p, cfg, replicate, 1, x0_or_null, buf, &sum, out.endpoint.data(),
           cfg.store_states ? &out : nullptr);
  out.sum_dt_u = sum;
  return out;
}

} // namespace

SkeletonPath simulate_skeleton(const AnnealingPotential& p, const RunConfig& cfg,
                               uint32_t replicate) {
  return run_single(p, cfg, nullptr, replicate);
}

SkeletonPath simulate_skeleton(const AnnealingPotential& p, const RunConfig& cfg,
                               std::span<const double> x0, uint32_t replicate) {
  if (static_cast<int>(x0.size()) != cfg.d)
    throw std::invalid_argument("simulate_skeleton: x0 has wrong dimension");
  return run_single(p, cfg, x0.data(), replicate);
}

EnsembleSummary simulate_ensemble(const AnnealingPotential& p, const RunConfig& cfg, uint32_t rep0,
                                  uint32_t count, int workers) {
  cfg.validate();
  EnsembleSummary out;
  out.rep0 = rep0;
  out.sum_dt_u.assign(count, 0.0);
  out.endpoints.assign(static_cast<size_t>(count) * static_cast<size_t>(cfg.d), 0.0);

  const size_t tiles = (count + kTile - 1) / kTile;
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&]() {
    TileBuffers buf;
    for (;;) {
      const size_t tile = next.fetch_add(1);
      if (tile >= tiles || failed.load()) return;
      const uint32_t r0 = rep0 + static_cast<uint32_t>(tile * kTile);
      const size_t lanes = std::min(kTile, static_cast<size_t>(count) - tile * kTile);
      try {
        run_tile(p, cfg, r0, lanes, nullptr, buf, out.sum_dt_u.data() + tile * kTile,
                 out.endpoints.data() + tile * kTile * static_cast<size_t>(cfg.d), nullptr);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  const int nw = std::max(1, workers);
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nw));
    for (int i = 0; i < nw; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(error);
  return out;
}

CoupledPair simulate_coupled(const AnnealingPotential& p, const RunConfig& cfg,
                             std::span<const double> x0, std::span<const double> y0,
                             uint32_t replicate) {
  cfg.validate();
  if (static_cast<int>(x0.size()) != cfg.d || static_cast<int>(y0.size()) != cfg.d)
    throw std::invalid_argument("simulate_coupled: start points have wrong dimension");
  double sep0 = 0.0;
  for (int j = 0; j < cfg.d; ++j) {
    const double dlt = x0[static_cast<size_t>(j)] - y0[static_cast<size_t>(j)];
    sep0 += dlt * dlt;
  }
  sep0 = std::sqrt(sep0);
  if (!(sep0 > 0.0)) throw std::invalid_argument("simulate_coupled: zero initial separation");

  RunConfig stored = cfg;
  stored.store_states = true;
  CoupledPair pair;
  // Identical (seed, replicate) => both legs consume the same noise stream.
  pair.x = simulate_skeleton(p, stored, x0, replicate);
  pair.y = simulate_skeleton(p, stored, y0, replicate);
  pair.initial_separation = sep0;
  const long n = cfg.n_steps();
  pair.separation.reserve(static_cast<size_t>(n) + 1);
  const auto d = static_cast<size_t>(cfg.d);
  for (long k = 0; k < n; ++k) {
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double dlt = pair.x.states[static_cast<size_t>(k) * d + j] -
                         pair.y.states[static_cast<size_t>(k) * d + j];
      acc += dlt * dlt;
    }
    pair.separation.push_back(std::sqrt(acc));
  }
  double acc = 0.0;
  for (size_t j = 0; j < d; ++j) {
    const double dlt = pair.x.endpoint[j] - pair.y.endpoint[j];
    acc += dlt * dlt;
  }
  pair.separation.push_back(std::sqrt(acc));
  return pair;
}

std::vector<double> simulate_frozen(const AnnealingPotential& p, double s, const RunConfig& cfg,
                                    std::span<const double> y0, long steps, uint32_t replicate) {
  cfg.validate();
  if (static_cast<int>(y0.size()) != cfg.d)
    throw std::invalid_argument("simulate_frozen: y0 has wrong dimension");
  if (steps < 0) throw std::invalid_argument("simulate_frozen: steps must be >= 0");
  const auto d = static_cast<size_t>(cfg.d);
  std::vector<double> states;
  states.reserve((static_cast<size_t>(steps) + 1) * d);
  states.insert(states.end(), y0.begin(), y0.end());

  const auto& K = kernels::ops();
  std::vector<double> x(y0.begin(), y0.end()), g(d), z(d), scratch(1);
  const double c = -cfg.h / cfg.epsilon;
  const double sn = std::sqrt(2.0 * cfg.h / cfg.epsilon);
  const size_t pairs = (d + 1) / 2;
  for (long k = 0; k < steps; ++k) {
    for (size_t jp = 0; jp < pairs; ++jp) {
      double* row0 = z.data() + 2 * jp;
      double* row1 = (2 * jp + 1 < d) ? z.data() + 2 * jp + 1 : scratch.data();
      K.normal_pairs(cfg.seed, static_cast<uint32_t>(Domain::frozen), static_cast<uint32_t>(k),
                     static_cast<uint32_t>(jp), replicate, 1, row0, row1);
    }
    p.grad_u_batch(s, x.data(), g.data(), 1);
    K.em_step(x.data(), g.data(), c, sn, z.data(), d);
    if (!all_finite(x)) throw DivergenceError(k, replicate);
    states.insert(states.end(), x.begin(), x.end());
  }
  return states;
}

void write_trajectory(const std::string& path, const SkeletonPath& skel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trajectory file for writing: " + path);
  const char magic[8] = {'A', 'N', 'L', 'T', 'R', 'J', '0', '1'};
  const uint64_t n = skel.times.size();
  const auto d = static_cast<uint64_t>(skel.d);
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  out.write(reinterpret_cast<const char*>(skel.states.data()),
            static_cast<std::streamsize>(skel.states.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to trajectory file: " + path);
}

SkeletonPath read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  char magic[8];
  uint64_t n = 0, d = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&d), 8);
  if (!in || std::memcmp(magic, "ANLTRJ01", 8) != 0)
    throw std::runtime_error("bad trajectory header: " + path);
  SkeletonPath skel;
  skel.d = static_cast<int>(d);
  skel.states.resize(n * d);
  in.read(reinterpret_cast<char*>(skel.states.data()),
          static_cast<std::streamsize>(n * d * sizeof(double)));
  if (!in) throw std::runtime_error("truncated trajectory file: " + path);
  return skel;
}

} // namespace anneal
