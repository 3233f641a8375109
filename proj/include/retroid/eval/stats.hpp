#pragma once

#include <span>
#include <string>

namespace retroid::eval {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Student-t CDF with (possibly non-integer) df > 0.
double student_t_cdf(double t, double df);

/// Two-tailed p-value P(|T| >= |t|).
double two_tailed_p(double t, double df);

enum class TTestVariant { pooled, welch };

std::string to_string(TTestVariant v);
TTestVariant parse_ttest_variant(const std::string& s);

struct TTestResult {
  double t = 0.0;  // +/-infinity when the variance is zero and the means differ
  double p = 1.0;
  double df = 0.0;
  TTestVariant variant = TTestVariant::pooled;
};

/// Unpaired two-sample t-test, two-tailed. Requires at least 2 values per sample.
/// Pooled: df = n1 + n2 - 2. Welch: Welch-Satterthwaite df.
TTestResult ttest_two_sample(std::span<const double> a, std::span<const double> b,
                             TTestVariant variant = TTestVariant::pooled);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> v);

/// Spearman rank correlation with average ranks for ties; NaN if either
/// series is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace retroid::eval
