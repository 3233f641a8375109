#include "retroid/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "retroid/errors.hpp"

namespace retroid::eval {

namespace {

// Continued fraction for I_x(a, b) (modified Lentz); converges for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ValidationError("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double two_tailed_p(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t distribution: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * two_tailed_p(t, df);
  return t < 0.0 ? tail : 1.0 - tail;
}

std::string to_string(TTestVariant v) { return v == TTestVariant::pooled ? "student-pooled" : "welch"; }

TTestVariant parse_ttest_variant(const std::string& s) {
  if (s == "pooled" || s == "student-pooled" || s == "student") return TTestVariant::pooled;
  if (s == "welch") return TTestVariant::welch;
  throw ConfigError("unknown t-test variant '" + s + "'");
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TTestResult ttest_two_sample(std::span<const double> a, std::span<const double> b, TTestVariant variant) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("ttest: each sample needs at least 2 values");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double m1 = mean(a), m2 = mean(b);
  const double v1 = std::pow(sample_std(a), 2), v2 = std::pow(sample_std(b), 2);

  TTestResult r;
  r.variant = variant;
  double se2 = 0.0;
  if (variant == TTestVariant::pooled) {
    r.df = n1 + n2 - 2.0;
    const double pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / r.df;
    se2 = pooled * (1.0 / n1 + 1.0 / n2);
  } else {
    const double q1 = v1 / n1, q2 = v2 / n2;
    se2 = q1 + q2;
    r.df = se2 > 0.0 ? (se2 * se2) / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0)) : n1 + n2 - 2.0;
  }

  const double diff = m1 - m2;
  if (se2 <= 0.0) {
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.p = two_tailed_p(r.t, r.df);
  return r;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("spearman: need two equal-length series (n >= 2)");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace retroid::eval
