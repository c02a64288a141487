// AVX2 kernel variants. Same arithmetic contract as the scalar reference:
// no FMA contraction, j-ascending reductions, and the normal quantile's tail
// branch delegates to the shared scalar code, so results are bit-identical.

#include "anneal/kernels.hpp"
#include "anneal/philox.hpp"

#ifdef ANNEAL_HAVE_AVX2

#include <immintrin.h>

namespace anneal::kernels {
namespace {

using rngcore::kPhiloxM0;
using rngcore::kPhiloxM1;
using rngcore::kPhiloxW0;
using rngcore::kPhiloxW1;

void em_step_avx2(double* x, const double* g, double c, double s, const double* z, size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  const __m256d sv = _mm256_set1_pd(s);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d zv = _mm256_loadu_pd(z + i);
    xv = _mm256_add_pd(xv, _mm256_mul_pd(cv, gv));
    xv = _mm256_add_pd(xv, _mm256_mul_pd(sv, zv));
    _mm256_storeu_pd(x + i, xv);
  }
  for (; i < n; ++i) x[i] = (x[i] + c * g[i]) + s * z[i];
}

void scale_avx2(double* out, const double* x, double a, size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

void axpy_avx2(double* acc, const double* v, double a, size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r =
        _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(av, _mm256_loadu_pd(v + i)));
    _mm256_storeu_pd(acc + i, r);
  }
  for (; i < n; ++i) acc[i] = acc[i] + a * v[i];
}

void sqnorm_soa_avx2(const double* x, const double* center, size_t d, size_t lanes, double* out) {
  size_t r = 0;
  for (; r + 4 <= lanes; r += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (size_t j = 0; j < d; ++j) {
      __m256d v = _mm256_loadu_pd(x + j * lanes + r);
      if (center != nullptr) v = _mm256_sub_pd(v, _mm256_set1_pd(center[j]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    _mm256_storeu_pd(out + r, acc);
  }
  for (; r < lanes; ++r) {
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double dlt = (center != nullptr) ? x[j * lanes + r] - center[j] : x[j * lanes + r];
      acc = acc + dlt * dlt;
    }
    out[r] = acc;
  }
}

// hi/lo 32x32->32 unsigned multiplies for 8 lanes.
inline __m256i mullo32(__m256i a, __m256i m_all) { return _mm256_mullo_epi32(a, m_all); }

inline __m256i mulhi32(__m256i a, __m256i m_lo64) {
  const __m256i prod_e = _mm256_mul_epu32(a, m_lo64);
  const __m256i prod_o = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), m_lo64);
  const __m256i hi_mask = _mm256_set1_epi64x(static_cast<long long>(0xFFFFFFFF00000000ull));
  return _mm256_blend_epi32(_mm256_srli_epi64(prod_e, 32), _mm256_and_si256(prod_o, hi_mask),
                            0b10101010);
}

// (mant52 + 0.5) * 2^-52 with mant52 = u64 >> 12, matching u64_to_unit.
inline __m256d u64x4_to_unit(__m256i u) {
  const __m256i mant = _mm256_srli_epi64(u, 12);
  const __m256i magic = _mm256_set1_epi64x(0x4330000000000000ll); // 2^52
  const __m256d d =
      _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(mant, magic)), _mm256_set1_pd(0x1p52));
  return _mm256_mul_pd(_mm256_add_pd(d, _mm256_set1_pd(0.5)), _mm256_set1_pd(0x1p-52));
}

inline __m256d horner(__m256d acc, __m256d r, double coef) {
  return _mm256_add_pd(_mm256_mul_pd(acc, r), _mm256_set1_pd(coef));
}

// PPND16 central branch for 4 lanes; tail lanes are patched with the shared
// scalar fallback.
inline __m256d normal_icdf_x4(__m256d u) {
  const __m256d q = _mm256_sub_pd(u, _mm256_set1_pd(0.5));
  const __m256d r = _mm256_sub_pd(_mm256_set1_pd(0.180625), _mm256_mul_pd(q, q));
  __m256d num = _mm256_set1_pd(2.5090809287301226727e3);
  num = horner(num, r, 3.3430575583588128105e4);
  num = horner(num, r, 6.7265770927008700853e4);
  num = horner(num, r, 4.5921953931549871457e4);
  num = horner(num, r, 1.3731693765509461125e4);
  num = horner(num, r, 1.9715909503065514427e3);
  num = horner(num, r, 1.3314166789178437745e2);
  num = horner(num, r, 3.3871328727963666080e0);
  __m256d den = _mm256_set1_pd(5.2264952788528545610e3);
  den = horner(den, r, 2.8729085735721942674e4);
  den = horner(den, r, 3.9307895800092710610e4);
  den = horner(den, r, 2.1213794301586595867e4);
  den = horner(den, r, 5.3941960214247511077e3);
  den = horner(den, r, 6.8718700749205790830e2);
  den = horner(den, r, 4.2313330701600911252e1);
  den = horner(den, r, 1.0);
  __m256d z = _mm256_div_pd(_mm256_mul_pd(q, num), den);

  const __m256d absq = _mm256_andnot_pd(_mm256_set1_pd(-0.0), q);
  const __m256d tail = _mm256_cmp_pd(absq, _mm256_set1_pd(0.425), _CMP_GT_OQ);
  const int mask = _mm256_movemask_pd(tail);
  if (mask != 0) {
    alignas(32) double ub[4], zb[4];
    _mm256_store_pd(ub, u);
    _mm256_store_pd(zb, z);
    for (int lane = 0; lane < 4; ++lane)
      if (mask & (1 << lane)) zb[lane] = rngcore::normal_icdf_tail(ub[lane]);
    z = _mm256_load_pd(zb);
  }
  return z;
}

inline void store_pairs(__m256d v, double* dst_lohi /*blocks {b, b+1}*/, double* dst_hihi) {
  _mm_storeu_pd(dst_lohi, _mm256_castpd256_pd128(v));
  _mm_storeu_pd(dst_hihi, _mm256_extractf128_pd(v, 1));
}

void normal_pairs_avx2(uint64_t seed, uint32_t domain, uint32_t step, uint32_t coord_pair,
                       uint32_t rep0, size_t n, double* z0, double* z1) {
  const __m256i m0_all = _mm256_set1_epi32(static_cast<int>(kPhiloxM0));
  const __m256i m1_all = _mm256_set1_epi32(static_cast<int>(kPhiloxM1));
  const __m256i m0_lo = _mm256_set1_epi64x(static_cast<long long>(kPhiloxM0));
  const __m256i m1_lo = _mm256_set1_epi64x(static_cast<long long>(kPhiloxM1));
  const rngcore::Key key0 = rngcore::key_from_seed(seed);

  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const uint32_t base = rep0 + static_cast<uint32_t>(i);
    __m256i c0 = _mm256_set1_epi32(static_cast<int>(step));
    __m256i c1 = _mm256_set1_epi32(static_cast<int>(coord_pair));
    __m256i c2 = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(base)),
                                  _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
    __m256i c3 = _mm256_set1_epi32(static_cast<int>(domain));
    __m256i k0 = _mm256_set1_epi32(static_cast<int>(key0.k0));
    __m256i k1 = _mm256_set1_epi32(static_cast<int>(key0.k1));
    const __m256i w0 = _mm256_set1_epi32(static_cast<int>(kPhiloxW0));
    const __m256i w1 = _mm256_set1_epi32(static_cast<int>(kPhiloxW1));

    for (int round = 0; round < 10; ++round) {
      const __m256i lo0 = mullo32(c0, m0_all);
      const __m256i hi0 = mulhi32(c0, m0_lo);
      const __m256i lo1 = mullo32(c2, m1_all);
      const __m256i hi1 = mulhi32(c2, m1_lo);
      const __m256i n0 = _mm256_xor_si256(_mm256_xor_si256(hi1, c1), k0);
      const __m256i n2 = _mm256_xor_si256(_mm256_xor_si256(hi0, c3), k1);
      c0 = n0;
      c1 = lo1;
      c2 = n2;
      c3 = lo0;
      k0 = _mm256_add_epi32(k0, w0);
      k1 = _mm256_add_epi32(k1, w1);
    }

    // Interleave words into u64 lanes: unpacklo covers blocks {0,1,4,5},
    // unpackhi covers {2,3,6,7}.
    const __m256i a_lo = _mm256_unpacklo_epi32(c0, c1);
    const __m256i a_hi = _mm256_unpackhi_epi32(c0, c1);
    const __m256i b_lo = _mm256_unpacklo_epi32(c2, c3);
    const __m256i b_hi = _mm256_unpackhi_epi32(c2, c3);

    const __m256d z0_a = normal_icdf_x4(u64x4_to_unit(a_lo)); // blocks 0 1 4 5
    const __m256d z0_b = normal_icdf_x4(u64x4_to_unit(a_hi)); // blocks 2 3 6 7
    const __m256d z1_a = normal_icdf_x4(u64x4_to_unit(b_lo));
    const __m256d z1_b = normal_icdf_x4(u64x4_to_unit(b_hi));

    store_pairs(z0_a, z0 + i, z0 + i + 4);
    store_pairs(z0_b, z0 + i + 2, z0 + i + 6);
    store_pairs(z1_a, z1 + i, z1 + i + 4);
    store_pairs(z1_b, z1 + i + 2, z1 + i + 6);
  }
  for (; i < n; ++i) {
    const rngcore::Ctr c{{step, coord_pair, rep0 + static_cast<uint32_t>(i), domain}};
    rngcore::block_normals(c, key0, z0[i], z1[i]);
  }
}

} // namespace

const Ops& avx2_ops() {
  static const Ops ops{"avx2", em_step_avx2, scale_avx2, axpy_avx2,
                       sqnorm_soa_avx2, normal_pairs_avx2};
  return ops;
}

bool avx2_compiled() { return true; }

} // namespace anneal::kernels

#else // !ANNEAL_HAVE_AVX2

namespace anneal::kernels {
const Ops& avx2_ops() { return scalar_ops(); }
bool avx2_compiled() { return false; }
} // namespace anneal::kernels

#endif
