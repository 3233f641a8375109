#pragma once

// Two-tailed Student-t p-value by direct numerical integration of the
// density, independent of any incomplete-beta code.

#include <cmath>
#include <numbers>

namespace oracle {

inline double t_density(double x, double df) {
  const double log_c = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_c - (df + 1) / 2 * std::log1p(x * x / df));
}

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6 * (fa + 4 * fm + fb);
}

template <class F>
double adaptive(F f, double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) {
  const double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm), right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
  return adaptive(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

}  // namespace detail

/// 1 - 2 * integral_0^|t| density.
inline double two_tailed_p(double t, double df) {
  const double b = std::abs(t);
  if (b == 0) return 1.0;
  auto f = [df](double x) { return t_density(x, df); };
  const double fa = f(0), fb = f(b), fm = f(b / 2);
  const double area = detail::adaptive(f, 0.0, b, fa, fm, fb, detail::simpson(0.0, b, fa, fm, fb), 1e-13, 50);
  return 1.0 - 2.0 * area;
}

}  // namespace oracle
