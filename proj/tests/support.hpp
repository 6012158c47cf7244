#pragma once

// Independent reference implementations used as oracles by the tests. None of
// these call into the library's own quadrature or estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace tlight::testing {

/// Composite Simpson rule with an even number of intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t intervals = 20000) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double acc = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) {
    acc += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  }
  return acc * h / 3.0;
}

/// Asymptotic Kolmogorov p-value for a one-sample KS statistic.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Sup distance between the empirical CDF of `xs` and `cdf`.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                  std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

/// Direct O(n * lags) G2 with truncated-range global means.
template <class T>
std::vector<double> naive_g2(const std::vector<T>& a, const std::vector<T>& b,
                             std::size_t max_k) {
  std::vector<double> out;
  const std::size_t n = a.size();
  for (std::size_t k = 0; k <= max_k; ++k) {
    const std::size_t m = n - k;
    double ab = 0.0, ha = 0.0, tb = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      ab += static_cast<double>(a[i]) * static_cast<double>(b[i + k]);
      ha += static_cast<double>(a[i]);
      tb += static_cast<double>(b[i + k]);
    }
    out.push_back((ab / m) / ((ha / m) * (tb / m)));
  }
  return out;
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace tlight::testing
