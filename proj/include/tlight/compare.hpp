#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tlight/estimators.hpp"

namespace tlight {

enum class Metric { TotalVariation, MaxAbsDeviation, ChiSquare };

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::TotalVariation:
      return "tvd";
    case Metric::MaxAbsDeviation:
      return "maxabs";
    case Metric::ChiSquare:
      return "chisq";
  }
  return "?";
}

inline Metric parse_metric(std::string_view name) {
  if (name == "tvd" || name == "total_variation") return Metric::TotalVariation;
  if (name == "maxabs" || name == "max_abs_deviation") return Metric::MaxAbsDeviation;
  if (name == "chisq" || name == "chi_square") return Metric::ChiSquare;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

struct ComparisonReport {
  std::string label;
  Metric metric = Metric::MaxAbsDeviation;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// A sampled function (x_i, y_i): a curve over lags or a distribution over n.
struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

inline Series to_series(const CorrelationCurve& c) { return {c.lags, c.values}; }

inline Series to_series(const NumberDistribution& d) {
  Series s;
  for (std::size_t n = 0; n < d.probs.size(); ++n) {
    s.x.push_back(static_cast<double>(n));
    s.y.push_back(d.probs[n]);
  }
  return s;
}

class DomainMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline bool same_point(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Analytic value at every empirical abscissa; the analytic series may extend
// further (it is re-truncated to the empirical support).
inline std::vector<double> align(const Series& empirical, const Series& analytic) {
  std::vector<double> out;
  out.reserve(empirical.x.size());
  std::size_t j = 0;
  for (double x : empirical.x) {
    while (j < analytic.x.size() && analytic.x[j] < x && !same_point(analytic.x[j], x)) ++j;
    if (j >= analytic.x.size() || !same_point(analytic.x[j], x)) {
      throw DomainMismatch("analytic series has no point at x = " + std::to_string(x));
    }
    out.push_back(analytic.y[j]);
  }
  return out;
}

inline bool is_distribution_domain(const Series& s) {
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (s.x[i] != static_cast<double>(i)) return false;
  }
  return true;
}

}  // namespace detail

/// Distance between an empirical and an analytic series; pass iff value < threshold.
///
/// TotalVariation treats both series as distributions over n = 0, 1, ... and
/// counts analytic mass beyond the empirical support. MaxAbsDeviation is the
/// largest |e - a| over the empirical abscissae; ChiSquare is
/// sum (e - a)^2 / a over the empirical abscissae with a > 0.
inline ComparisonReport compare(const Series& empirical, const Series& analytic, Metric metric,
                                double threshold, std::string label = {}) {
  if (empirical.x.size() != empirical.y.size() || analytic.x.size() != analytic.y.size()) {
    throw std::invalid_argument("series columns have different lengths");
  }
  if (empirical.x.empty()) throw std::invalid_argument("empty empirical series");
  ComparisonReport r;
  r.label = std::move(label);
  r.metric = metric;
  r.threshold = threshold;

  if (metric == Metric::TotalVariation) {
    if (!detail::is_distribution_domain(empirical) || !detail::is_distribution_domain(analytic)) {
      throw DomainMismatch("total variation needs distributions indexed n = 0, 1, ...");
    }
    const std::size_t n = std::max(empirical.y.size(), analytic.y.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = i < empirical.y.size() ? empirical.y[i] : 0.0;
      const double a = i < analytic.y.size() ? analytic.y[i] : 0.0;
      acc += std::abs(e - a);
    }
    r.value = 0.5 * acc;
  } else {
    const auto a = detail::align(empirical, analytic);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = empirical.y[i] - a[i];
      if (metric == Metric::MaxAbsDeviation) {
        if (!std::isfinite(d)) {
          acc = std::numeric_limits<double>::infinity();
          break;
        }
        acc = std::max(acc, std::abs(d));
      } else if (a[i] > 0.0) {
        acc += d * d / a[i];
      }
    }
    r.value = acc;
  }
  r.pass = r.value < threshold;
  return r;
}

inline ComparisonReport compare(const NumberDistribution& empirical,
                                const NumberDistribution& analytic, Metric metric,
                                double threshold, std::string label = {}) {
  return compare(to_series(empirical), to_series(analytic), metric, threshold, std::move(label));
}

inline ComparisonReport compare(const CorrelationCurve& empirical, const CorrelationCurve& analytic,
                                Metric metric, double threshold, std::string label = {}) {
  return compare(to_series(empirical), to_series(analytic), metric, threshold, std::move(label));
}

inline double total_variation(const NumberDistribution& a, const NumberDistribution& b) {
  return compare(a, b, Metric::TotalVariation, 1.0).value;
}

}  // namespace tlight
