#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfclt/errors.hpp"

namespace rfclt {

/// Outcome of a hypothesis test.
struct TestResult {
  std::string tag;  // "ks", "ks2", "moment", "covariance"
  double statistic = 0.0;
  double p_value = 1.0;
  long long sample_size = 0;
  double alpha = 0.05;
  bool rejected = false;
};

/// Sample moments with influence-function standard errors, valid for any
/// distribution with enough finite moments (the normal-theory SEs
/// sqrt(6/n), sqrt(24/n) badly understate the spread for heavy tails).
struct Moments {
  long long n = 0;
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;  // unbiased
  double variance_se = 0.0;
  double skewness = 0.0;
  double skewness_se = 0.0;
  double kurtosis = 0.0;  // m4 / m2^2, equals 3 for a normal law
  double kurtosis_se = 0.0;
  [[nodiscard]] double excess_kurtosis() const { return kurtosis - 3.0; }
};

inline Moments sample_moments(std::span<const double> x) {
  Moments m;
  m.n = static_cast<long long>(x.size());
  if (m.n < 2) throw ParameterError("sample moments need at least two observations");
  const double n = static_cast<double>(m.n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    c2 += d2;
    c3 += d2 * d;
    c4 += d2 * d2;
  }
  c2 /= n;
  c3 /= n;
  c4 /= n;
  m.mean = mean;
  m.variance = c2 * n / (n - 1.0);
  m.mean_se = std::sqrt(m.variance / n);
  if (c2 <= 0.0) return m;
  m.skewness = c3 / std::pow(c2, 1.5);
  m.kurtosis = c4 / (c2 * c2);

  double var_if = 0.0;
  double skew_if = 0.0;
  double kurt_if = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    const double if_var = d2 - c2;
    const double if_skew =
        (d2 * d - c3 - 3.0 * c2 * d) / std::pow(c2, 1.5) - 1.5 * c3 / std::pow(c2, 2.5) * if_var;
    const double if_kurt = (d2 * d2 - c4 - 4.0 * c3 * d) / (c2 * c2) - 2.0 * c4 / (c2 * c2 * c2) * if_var;
    var_if += if_var * if_var;
    skew_if += if_skew * if_skew;
    kurt_if += if_kurt * if_kurt;
  }
  m.variance_se = std::sqrt(var_if / (n - 1.0) / n);
  m.skewness_se = std::sqrt(skew_if / (n - 1.0) / n);
  m.kurtosis_se = std::sqrt(kurt_if / (n - 1.0) / n);
  return m;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form, fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int j = 1; j <= 8; ++j) {
      const double k = 2.0 * j - 1.0;
      s += std::exp(-k * k * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Asymptotic p-value with Stephens' small-sample adjustment of sqrt(n) D.
inline double kolmogorov_p_value(double d, double effective_n) {
  const double rn = std::sqrt(effective_n);
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

/// sup_x |F_n(x) - F(x)| for a continuous reference CDF.
inline double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = cdf(s[k]);
    d = std::max({d, (static_cast<double>(k) + 1.0) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

/// Two-sample sup distance between empirical CDFs; ties handled by
/// advancing through equal values before comparing.
inline double ks_two_sample_statistic(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

inline TestResult ks_two_sample_test(std::span<const double> a, std::span<const double> b,
                                     double alpha) {
  if (a.size() < 2 || b.size() < 2) throw ParameterError("two-sample KS needs two nonempty samples");
  TestResult r;
  r.tag = "ks2";
  r.statistic = ks_two_sample_statistic(a, b);
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  r.p_value = kolmogorov_p_value(r.statistic, ne);
  r.sample_size = static_cast<long long>(a.size() + b.size());
  r.alpha = alpha;
  r.rejected = r.p_value < alpha;
  return r;
}

/// sup-CDF distance between the empirical law of `samples` and a discrete
/// law given as (value, probability) atoms.
inline double sup_cdf_distance_discrete(std::span<const double> samples,
                                        std::vector<std::pair<double, double>> atoms) {
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> points;
  points.reserve(s.size() + atoms.size());
  for (double v : s) points.push_back(v);
  for (const auto& a : atoms) points.push_back(a.first);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const double n = static_cast<double>(s.size());
  std::size_t si = 0;
  std::size_t ai = 0;
  double exact_cdf = 0.0;
  double d = 0.0;
  for (double p : points) {
    while (si < s.size() && s[si] <= p) ++si;
    while (ai < atoms.size() && atoms[ai].first <= p) exact_cdf += atoms[ai++].second;
    d = std::max(d, std::abs(static_cast<double>(si) / n - exact_cdf));
  }
  return d;
}

/// Normality check for S_n / |V_n|^{1/2}-type samples.
struct NormalityReport {
  TestResult ks;
  double variance_used = 0.0;
  Moments moments;
};

/// KS test against N(0, sigma^2) with sigma^2 = `variance` when given,
/// otherwise the sample variance; the asymptotic Kolmogorov law supplies
/// the p-value.
inline NormalityReport ks_normality_test(std::span<const double> samples, double alpha,
                                         std::optional<double> variance = std::nullopt) {
  if (samples.size() < 20) throw ParameterError("normality test needs at least 20 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw DegeneracyError("normality test on a constant sample");
  NormalityReport out;
  out.moments = sample_moments(samples);
  out.variance_used = variance.value_or(out.moments.variance);
  if (!(out.variance_used > 0.0)) throw ParameterError("reference variance must be positive");
  const double sd = std::sqrt(out.variance_used);
  out.ks.tag = "ks";
  out.ks.statistic = ks_statistic(samples, [sd](double v) { return normal_cdf(v / sd); });
  out.ks.sample_size = static_cast<long long>(samples.size());
  out.ks.p_value = kolmogorov_p_value(out.ks.statistic, static_cast<double>(samples.size()));
  out.ks.alpha = alpha;
  out.ks.rejected = out.ks.p_value < alpha;
  return out;
}

}  // namespace rfclt
