#pragma once
// Philox4x32-10 counter-based generator and the scalar normal quantile.
// Both kernel backends (scalar, AVX2) are built on the exact arithmetic
// defined here; any change invalidates recorded streams.

#include <cmath>
#include <cstdint>

namespace anneal::rngcore {

struct Ctr {
  uint32_t v[4]; // {step, coord_pair, replicate, domain}
};
struct Key {
  uint32_t k0, k1; // seed low/high words
};

inline constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline Ctr philox4x32_10(Ctr c, Key k) {
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * c.v[0];
    const uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * c.v[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    c = Ctr{{hi1 ^ c.v[1] ^ k.k0, lo1, hi0 ^ c.v[3] ^ k.k1, lo0}};
    k.k0 += kPhiloxW0;
    k.k1 += kPhiloxW1;
  }
  return c;
}

// 52 random bits -> uniform on (0,1), exactly ((mant + 0.5) * 2^-52.
inline double u64_to_unit(uint64_t bits) {
  const double mant = static_cast<double>(bits >> 12);
  return (mant + 0.5) * 0x1p-52;
}

// Wichura's PPND16 rational approximation to the standard normal quantile.
// Central branch |u - 0.5| <= 0.425 is a pure rational function (add/mul/div
// only) and is what the AVX2 backend vectorizes; the tail branch below is the
// shared scalar fallback for both backends.
inline double normal_icdf_central(double q) {
  const double r = 0.180625 - q * q;
  const double num =
      (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
            4.5921953931549871457e4) *
               r +
           1.3731693765509461125e4) *
              r +
          1.9715909503065514427e3) *
             r +
         1.3314166789178437745e2) *
            r +
        3.3871328727963666080e0);
  const double den =
      (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
            2.1213794301586595867e4) *
               r +
           5.3941960214247511077e3) *
              r +
          6.8718700749205790830e2) *
             r +
         4.2313330701600911252e1) *
            r +
        1.0);
  return q * num / den;
}

inline double normal_icdf_tail(double u) {
  // u is in (0, 0.075) or (0.925, 1); evaluated via the smaller tail.
  const double p = (u < 0.5) ? u : 1.0 - u;
  double r = std::sqrt(-std::log(p));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
              1.27045825245236838258e0) *
                 r +
             3.64784832476320460504e0) *
                r +
            5.76949722146069140550e0) *
               r +
           4.63033784615654529590e0) *
              r +
          1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
              1.48103976427480074590e-1) *
                 r +
             6.89767334985100004550e-1) *
                r +
            1.67638483018380384940e0) *
               r +
           2.05319162663775882187e0) *
              r +
          1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
              2.65321895265761230930e-2) *
                 r +
             2.96560571828504891230e-1) *
                r +
            1.78482653991729133580e0) *
               r +
           5.46378491116411436990e0) *
              r +
          6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
              7.86869131145613259100e-4) *
                 r +
             1.48753612908506148525e-2) *
                r +
            1.36929880922735805310e-1) *
               r +
           5.99832206555887937690e-1) *
              r +
          1.0);
    x = num / den;
  }
  return (u < 0.5) ? -x : x;
}

inline double normal_icdf(double u) {
  const double q = u - 0.5;
  if (q <= 0.425 && q >= -0.425) return normal_icdf_central(q);
  return normal_icdf_tail(u);
}

// One counter block -> two uniforms / two normals. The low pair of output
// words forms the first variate, the high pair the second.
inline void block_uniforms(Ctr c, Key k, double& u0, double& u1) {
  const Ctr o = philox4x32_10(c, k);
  const uint64_t a = (static_cast<uint64_t>(o.v[1]) << 32) | o.v[0];
  const uint64_t b = (static_cast<uint64_t>(o.v[3]) << 32) | o.v[2];
  u0 = u64_to_unit(a);
  u1 = u64_to_unit(b);
}

inline void block_normals(Ctr c, Key k, double& z0, double& z1) {
  double u0, u1;
  block_uniforms(c, k, u0, u1);
  z0 = normal_icdf(u0);
  z1 = normal_icdf(u1);
}

inline Key key_from_seed(uint64_t seed) {
  return Key{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
}

} // namespace anneal::rngcore
