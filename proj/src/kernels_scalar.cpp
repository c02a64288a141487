// Scalar reference kernels. These define the arithmetic contract the SIMD
// backends must reproduce bit-for-bit.

#include "anneal/kernels.hpp"
#include "anneal/philox.hpp"

namespace anneal::kernels {
namespace {

void em_step_scalar(double* x, const double* g, double c, double s, const double* z, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = (x[i] + c * g[i]) + s * z[i];
}

void scale_scalar(double* out, const double* x, double a, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void axpy_scalar(double* acc, const double* v, double a, size_t n) {
  for (size_t i = 0; i < n; ++i) acc[i] = acc[i] + a * v[i];
}

void sqnorm_soa_scalar(const double* x, const double* center, size_t d, size_t lanes, double* out) {
  for (size_t r = 0; r < lanes; ++r) out[r] = 0.0;
  if (center == nullptr) {
    for (size_t j = 0; j < d; ++j) {
      const double* row = x + j * lanes;
      for (size_t r = 0; r < lanes; ++r) out[r] = out[r] + row[r] * row[r];
    }
  } else {
    for (size_t j = 0; j < d; ++j) {
      const double* row = x + j * lanes;
      const double cj = center[j];
      for (size_t r = 0; r < lanes; ++r) {
        const double dlt = row[r] - cj;
        out[r] = out[r] + dlt * dlt;
      }
    }
  }
}

void normal_pairs_scalar(uint64_t seed, uint32_t domain, uint32_t step, uint32_t coord_pair,
                         uint32_t rep0, size_t n, double* z0, double* z1) {
  const rngcore::Key key = rngcore::key_from_seed(seed);
  for (size_t i = 0; i < n; ++i) {
    const rngcore::Ctr c{{step, coord_pair, rep0 + static_cast<uint32_t>(i), domain}};
    rngcore::block_normals(c, key, z0[i], z1[i]);
  }
}

} // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar", em_step_scalar, scale_scalar, axpy_scalar,
                       sqnorm_soa_scalar, normal_pairs_scalar};
  return ops;
}

} // namespace anneal::kernels
