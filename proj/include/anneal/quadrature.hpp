#pragma once
// Adaptive Gauss-Kronrod (15-point) quadrature for the analytic references:
// 1-d log-normalizers, stationary means, and the naive-IS relative variance.

#include <functional>
#include <stdexcept>
#include <string>

namespace anneal {

struct QuadratureError : std::runtime_error {
  double achieved_tol;
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_tol(achieved) {}
};

struct QuadResult {
  double value;
  double error; // estimated absolute error
};

// Adaptive bisection on [a, b]; throws QuadratureError if the requested
// tolerance cannot be met.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-10, double abs_tol = 1e-14, int max_depth = 48);

// Integral over the whole real line of a function decaying at least like a
// Gaussian with curvature `curvature` around `center`; the bracket is widened
// until the added shells are negligible.
QuadResult integrate_line(const std::function<double(double)>& f, double center, double curvature,
                          double rel_tol = 1e-10);

} // namespace anneal
