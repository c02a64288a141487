#include "anneal/quadrature.hpp"

#include <cmath>

namespace anneal {
namespace {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK qk15 nodes/weights).
constexpr double kXgk[8] = {0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
                            0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
                            0.2077849550078985, 0.0};
constexpr double kWgk[8] = {0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
                            0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
                            0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
                           0.4179591836734694};

struct Panel {
  double value;
  double error;
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(c);
  double gauss = kWg[3] * fc;
  double kron = kWgk[7] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kXgk[i];
    const double fsum = f(c - dx) + f(c + dx);
    kron += kWgk[i] * fsum;
    if (i % 2 == 1) gauss += kWg[i / 2] * fsum;
  }
  const double value = kron * half;
  const double err = std::abs((kron - gauss) * half);
  // QUADPACK-style sharpening of the raw difference.
  const double scaled = err > 0 ? std::pow(200.0 * err / std::max(std::abs(value), 1e-300), 1.5) *
                                      std::max(std::abs(value), 1e-300) / 200.0
                                : 0.0;
  return {value, std::min(err, scaled > 0 ? scaled : err)};
}

void refine(const std::function<double(double)>& f, double a, double b, double tol, int depth,
            int max_depth, double& total, double& total_err) {
  const Panel p = gk15(f, a, b);
  if (p.error <= tol || depth >= max_depth) {
    total += p.value;
    total_err += p.error;
    return;
  }
  const double m = 0.5 * (a + b);
  refine(f, a, m, 0.5 * tol, depth + 1, max_depth, total, total_err);
  refine(f, m, b, 0.5 * tol, depth + 1, max_depth, total, total_err);
}

} // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                     double abs_tol, int max_depth) {
  const Panel first = gk15(f, a, b);
  const double tol = std::max(abs_tol, rel_tol * std::abs(first.value));
  double total = 0.0, total_err = 0.0;
  refine(f, a, b, tol, 0, max_depth, total, total_err);
  const double final_tol = std::max(abs_tol, rel_tol * std::abs(total));
  if (!(total_err <= 10.0 * final_tol) || !std::isfinite(total))
    throw QuadratureError("quadrature did not converge",
                          std::abs(total) > 0 ? total_err / std::abs(total) : total_err);
  return {total, total_err};
}

QuadResult integrate_line(const std::function<double(double)>& f, double center, double curvature,
                          double rel_tol) {
  if (!(curvature > 0)) throw QuadratureError("integrate_line needs positive curvature", 0.0);
  double radius = std::sqrt(2.0 * 40.0 / curvature); // exp(-40) tail estimate
  QuadResult core = integrate(f, center - radius, center + radius, rel_tol);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double wider = radius * 1.5;
    const QuadResult left = integrate(f, center - wider, center - radius, rel_tol, 1e-300);
    const QuadResult right = integrate(f, center + radius, center + wider, rel_tol, 1e-300);
    const double shell = left.value + right.value;
    core.value += shell;
    core.error += left.error + right.error;
    radius = wider;
    if (std::abs(shell) <= rel_tol * std::abs(core.value)) return core;
  }
  throw QuadratureError("integrand tail does not decay",
                        std::abs(core.value) > 0 ? core.error / std::abs(core.value) : core.error);
}

} // namespace anneal
