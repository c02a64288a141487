#pragma once
// Inner-loop kernels with a scalar reference implementation and an AVX2
// variant selected at runtime. Every kernel has a fixed arithmetic contract
// (operation order per element, j-ascending reductions, shared tail paths),
// so backends agree bit-for-bit; tests/test_kernels.cpp enforces this.

#include <cstddef>
#include <cstdint>

namespace anneal::kernels {

struct Ops {
  const char* name;
  // x[i] = (x[i] + c*g[i]) + s*z[i]
  void (*em_step)(double* x, const double* g, double c, double s, const double* z, size_t n);
  // out[i] = a * x[i]   (aliasing out == x allowed)
  void (*scale)(double* out, const double* x, double a, size_t n);
  // acc[i] = acc[i] + a * v[i]
  void (*axpy)(double* acc, const double* v, double a, size_t n);
  // out[r] = sum_{j=0..d-1} (x[j*lanes + r] - center[j])^2, j ascending;
  // center == nullptr means the origin.
  void (*sqnorm_soa)(const double* x, const double* center, size_t d, size_t lanes, double* out);
  // Standard-normal pairs for the counter blocks {step, coord_pair, rep0+i,
  // domain}, i in [0, n): block i fills z0[i] and z1[i].
  void (*normal_pairs)(uint64_t seed, uint32_t domain, uint32_t step, uint32_t coord_pair,
                       uint32_t rep0, size_t n, double* z0, double* z1);
};

enum class Backend { automatic, scalar, avx2 };

const Ops& scalar_ops();
bool avx2_supported();      // compiled in and available on this CPU
const Ops& avx2_ops();      // valid only when avx2_supported()

const Ops& ops();           // currently selected backend
void select_backend(Backend b);  // throws std::invalid_argument if unavailable

} // namespace anneal::kernels
