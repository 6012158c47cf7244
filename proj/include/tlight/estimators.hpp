#pragma once

// Empirical second-order correlation, photon number distributions and the
// Mandel parameter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "tlight/detection.hpp"
#include "tlight/random.hpp"

namespace tlight {

struct CorrelationCurve {
  std::vector<double> lags;  ///< seconds
  std::vector<double> values;
  std::vector<double> std_error;

  std::size_t size() const noexcept { return lags.size(); }
};

enum class DistributionSource { Empirical, Analytic };

/// p(n) for n = 0 .. probs.size() - 1.
struct NumberDistribution {
  std::vector<double> probs;
  double mean = 0.0;
  DistributionSource source = DistributionSource::Analytic;

  std::size_t n_max() const noexcept { return probs.empty() ? 0 : probs.size() - 1; }
  double total() const noexcept {
    double acc = 0.0;
    for (double p : probs) acc += p;
    return acc;
  }
  double at(std::size_t n) const noexcept { return n < probs.size() ? probs[n] : 0.0; }
};

inline NumberDistribution make_distribution(std::vector<double> probs, DistributionSource source) {
  NumberDistribution d{std::move(probs), 0.0, source};
  for (std::size_t n = 0; n < d.probs.size(); ++n) d.mean += static_cast<double>(n) * d.probs[n];
  return d;
}

/// Lag grid and error-bar settings shared by the G2 estimators.
struct CorrelatorOptions {
  /// Lag grid step, in bins (samples).
  std::size_t lag_stride = 1;
  /// Block-bootstrap block length in seconds; 0 selects 2 * max_lag, which is
  /// ten coherence times on the default grid of five coherence times.
  double block_length = 0.0;
  int resamples = 200;
  std::uint64_t seed = 0;

  static CorrelatorOptions for_coherence_time(double tau_c, std::size_t stride = 1) {
    CorrelatorOptions opts;
    opts.lag_stride = stride;
    opts.block_length = 10.0 * tau_c;
    return opts;
  }
};

namespace detail {

// Per-block lag sums. pair_sum[b * lags + l] holds the sum over i in block b of
// x_i y_{i+k}, over both orderings (x, y) = (a, b) and (b, a) for two streams.
struct LagTable {
  std::size_t n = 0;
  std::size_t block = 0;
  std::size_t blocks = 0;
  std::size_t lags = 0;
  std::size_t stride = 1;
  std::vector<double> sum_a;  // per block
  std::vector<double> sum_b;
  std::vector<double> pair_sum;

  std::size_t valid_pairs(std::size_t blk, std::size_t l) const noexcept {
    const std::size_t k = l * stride;
    const std::size_t i0 = blk * block;
    const std::size_t i1 = std::min(n, i0 + block);
    const std::size_t end = std::min(i1, n - k);
    return end > i0 ? end - i0 : 0;
  }
};

template <class T>
using Wide = std::conditional_t<std::is_integral_v<T>, std::uint64_t, double>;

template <class T>
double product_zero(T x, T y, bool factorial) {
  if (factorial) {
    return x > 0 ? static_cast<double>(static_cast<Wide<T>>(x) * static_cast<Wide<T>>(x - 1))
                 : 0.0;
  }
  return static_cast<double>(static_cast<Wide<T>>(x) * static_cast<Wide<T>>(y));
}

template <class T>
void fill_dense(LagTable& t, std::span<const T> a, std::span<const T> b, bool same,
                bool factorial) {
  for (std::size_t blk = 0; blk < t.blocks; ++blk) {
    const std::size_t i0 = blk * t.block;
    const std::size_t i1 = std::min(t.n, i0 + t.block);
    for (std::size_t l = 0; l < t.lags; ++l) {
      const std::size_t k = l * t.stride;
      if (k >= t.n) break;
      const std::size_t end = std::min(i1, t.n - k);
      if (end <= i0) continue;
      Wide<T> acc{};
      if (k == 0 && factorial) {
        for (std::size_t i = i0; i < end; ++i) {
          if (a[i] > 0) acc += static_cast<Wide<T>>(a[i]) * static_cast<Wide<T>>(a[i] - 1);
        }
        t.pair_sum[blk * t.lags + l] = static_cast<double>(acc);
        continue;
      }
      for (std::size_t i = i0; i < end; ++i) {
        acc += static_cast<Wide<T>>(a[i]) * static_cast<Wide<T>>(b[i + k]);
      }
      if (!same) {
        for (std::size_t i = i0; i < end; ++i) {
          acc += static_cast<Wide<T>>(b[i]) * static_cast<Wide<T>>(a[i + k]);
        }
      }
      t.pair_sum[blk * t.lags + l] = static_cast<double>(acc);
    }
  }
}

// Sparse pass for count streams that are mostly zero: visits only pairs of
// non-empty bins within the lag window.
template <class T>
void add_sparse_direction(LagTable& t, std::span<const T> x, const std::vector<std::size_t>& nz_x,
                          std::span<const T> y, const std::vector<std::size_t>& nz_y, bool same,
                          bool factorial) {
  const std::size_t max_k = (t.lags - 1) * t.stride;
  std::size_t q0 = 0;
  for (const std::size_t i : nz_x) {
    while (q0 < nz_y.size() && nz_y[q0] < i) ++q0;
    const std::size_t row = (i / t.block) * t.lags;
    for (std::size_t q = q0; q < nz_y.size(); ++q) {
      const std::size_t j = nz_y[q];
      const std::size_t k = j - i;
      if (k > max_k) break;
      if (k % t.stride != 0) continue;
      const double prod = k == 0 ? product_zero(x[i], y[j], same && factorial)
                                 : static_cast<double>(static_cast<Wide<T>>(x[i]) *
                                                       static_cast<Wide<T>>(y[j]));
      t.pair_sum[row + k / t.stride] += prod;
    }
  }
}

template <class T>
std::vector<std::size_t> nonzero_indices(std::span<const T> x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != T{}) idx.push_back(i);
  return idx;
}

template <class T>
LagTable build_lag_table(std::span<const T> a, std::span<const T> b, bool same, bool factorial,
                         std::size_t max_k, std::size_t stride, std::size_t block) {
  LagTable t;
  t.n = a.size();
  t.stride = stride;
  t.lags = max_k / stride + 1;
  t.block = std::max<std::size_t>(1, std::min(block, t.n));
  t.blocks = (t.n + t.block - 1) / t.block;
  t.sum_a.assign(t.blocks, 0.0);
  t.sum_b.assign(t.blocks, 0.0);
  t.pair_sum.assign(t.blocks * t.lags, 0.0);
  for (std::size_t blk = 0; blk < t.blocks; ++blk) {
    const std::size_t i0 = blk * t.block;
    const std::size_t i1 = std::min(t.n, i0 + t.block);
    Wide<T> sa{};
    Wide<T> sb{};
    for (std::size_t i = i0; i < i1; ++i) {
      sa += static_cast<Wide<T>>(a[i]);
      sb += static_cast<Wide<T>>(b[i]);
    }
    t.sum_a[blk] = static_cast<double>(sa);
    t.sum_b[blk] = static_cast<double>(sb);
  }

  bool sparse = false;
  std::vector<std::size_t> nz_a;
  std::vector<std::size_t> nz_b;
  if constexpr (std::is_integral_v<T>) {
    nz_a = nonzero_indices(a);
    nz_b = same ? nz_a : nonzero_indices(b);
    const double rho_a = static_cast<double>(nz_a.size()) / static_cast<double>(t.n);
    const double rho_b = static_cast<double>(nz_b.size()) / static_cast<double>(t.n);
    sparse = rho_a * rho_b * static_cast<double>(stride) < 0.25;
  }
  if (sparse) {
    add_sparse_direction(t, a, nz_a, b, nz_b, same, factorial);
    if (!same) add_sparse_direction(t, b, nz_b, a, nz_a, same, factorial);
  } else {
    fill_dense(t, a, b, same, factorial);
  }
  return t;
}

// G2 at every lag from (possibly reweighted) block sums. With weights == nullptr
// every block counts once and the truncated-range means are exact.
inline void evaluate_lag_table(const LagTable& t, bool same, const std::vector<double>& prefix_a,
                               const std::vector<double>& prefix_b, std::vector<double>& out) {
  out.assign(t.lags, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t l = 0; l < t.lags; ++l) {
    const std::size_t k = l * t.stride;
    if (k >= t.n) break;
    const double m = static_cast<double>(t.n - k);
    double pairs = 0.0;
    for (std::size_t blk = 0; blk < t.blocks; ++blk) pairs += t.pair_sum[blk * t.lags + l];
    const double head_a = prefix_a[t.n - k] / m;
    const double tail_b = (prefix_b[t.n] - prefix_b[k]) / m;
    double norm = head_a * tail_b;
    double num = pairs / m;
    if (!same) {
      const double head_b = prefix_b[t.n - k] / m;
      const double tail_a = (prefix_a[t.n] - prefix_a[k]) / m;
      norm = 0.5 * (norm + head_b * tail_a);
      num *= 0.5;
    }
    if (norm > 0.0) out[l] = num / norm;
  }
}

inline std::vector<double> bootstrap_std_error(const LagTable& t, bool same, int resamples,
                                               std::uint64_t seed) {
  std::vector<double> se(t.lags, std::numeric_limits<double>::quiet_NaN());
  if (t.blocks < 2 || resamples < 2) return se;
  Rng rng(seed);
  std::vector<double> weight(t.blocks);
  std::vector<double> pair_acc(t.lags);
  std::vector<double> count_acc(t.lags);
  std::vector<double> sum(t.lags, 0.0);
  std::vector<double> sum_sq(t.lags, 0.0);
  std::vector<int> used(t.lags, 0);
  const double two = same ? 1.0 : 2.0;
  for (int r = 0; r < resamples; ++r) {
    std::fill(weight.begin(), weight.end(), 0.0);
    for (std::size_t d = 0; d < t.blocks; ++d) weight[rng.index(t.blocks)] += 1.0;
    std::fill(pair_acc.begin(), pair_acc.end(), 0.0);
    std::fill(count_acc.begin(), count_acc.end(), 0.0);
    double n_w = 0.0;
    double sa = 0.0;
    double sb = 0.0;
    for (std::size_t blk = 0; blk < t.blocks; ++blk) {
      const double w = weight[blk];
      if (w == 0.0) continue;
      const std::size_t i0 = blk * t.block;
      const double size = static_cast<double>(std::min(t.n, i0 + t.block) - i0);
      n_w += w * size;
      sa += w * t.sum_a[blk];
      sb += w * t.sum_b[blk];
      const double* row = &t.pair_sum[blk * t.lags];
      for (std::size_t l = 0; l < t.lags; ++l) {
        pair_acc[l] += w * row[l];
        count_acc[l] += w * static_cast<double>(t.valid_pairs(blk, l));
      }
    }
    const double norm = (sa / n_w) * (sb / n_w);
    if (!(norm > 0.0)) continue;
    for (std::size_t l = 0; l < t.lags; ++l) {
      if (!(count_acc[l] > 0.0)) continue;
      const double g = pair_acc[l] / (two * count_acc[l]) / norm;
      sum[l] += g;
      sum_sq[l] += g * g;
      ++used[l];
    }
  }
  for (std::size_t l = 0; l < t.lags; ++l) {
    if (used[l] < 2) continue;
    const double u = static_cast<double>(used[l]);
    const double mean = sum[l] / u;
    se[l] = std::sqrt(std::max(0.0, (sum_sq[l] - u * mean * mean) / (u - 1.0)));
  }
  return se;
}

template <class T>
std::vector<double> prefix_sums(std::span<const T> x) {
  std::vector<double> p(x.size() + 1, 0.0);
  Wide<T> acc{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<Wide<T>>(x[i]);
    p[i + 1] = static_cast<double>(acc);
  }
  return p;
}

template <class T>
CorrelationCurve correlate(std::span<const T> a, std::span<const T> b, bool same, bool factorial,
                           double bin_width, double max_lag, const CorrelatorOptions& opts) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be > 0");
  if (!(max_lag >= 0.0)) throw std::invalid_argument("max lag must be >= 0");
  if (opts.lag_stride == 0) throw std::invalid_argument("lag stride must be >= 1");
  const auto max_k = static_cast<std::size_t>(std::floor(max_lag / bin_width * (1.0 + 1e-9)));
  if (a.size() < 2 * max_k || a.empty()) {
    throw std::invalid_argument("record too short for the requested maximum lag");
  }
  const double block_seconds = opts.block_length > 0.0 ? opts.block_length : 2.0 * max_lag;
  const auto block = static_cast<std::size_t>(std::max(1.0, std::round(block_seconds / bin_width)));

  const auto prefix_a = prefix_sums(a);
  const auto prefix_b = same ? prefix_a : prefix_sums(b);
  if (!(prefix_a.back() > 0.0) || !(prefix_b.back() > 0.0)) {
    throw std::domain_error("G2 undefined: record has zero mean");
  }

  const LagTable table = build_lag_table(a, b, same, factorial, max_k, opts.lag_stride, block);
  CorrelationCurve curve;
  evaluate_lag_table(table, same, prefix_a, prefix_b, curve.values);
  curve.std_error = bootstrap_std_error(table, same, opts.resamples, opts.seed);
  curve.lags.resize(table.lags);
  for (std::size_t l = 0; l < table.lags; ++l) {
    curve.lags[l] = static_cast<double>(l * table.stride) * bin_width;
  }
  return curve;
}

}  // namespace detail

/// Classical intensity-intensity correlation <I_i I_{i+k}> / (<I_i><I_{i+k}>),
/// means over the overlapping index range of each lag.
inline CorrelationCurve g2_from_samples(std::span<const double> samples, double sample_period,
                                        double max_lag, const CorrelatorOptions& opts = {}) {
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("samples must be finite");
  }
  return detail::correlate(samples, samples, true, false, sample_period, max_lag, opts);
}

/// Two-detector (HBT) coincidence correlation, symmetrized over +/- lag.
inline CorrelationCurve g2_cross(const BinnedCounts& a, const BinnedCounts& b, double max_lag,
                                 const CorrelatorOptions& opts = {}) {
  if (a.bin_width != b.bin_width) throw std::invalid_argument("bin widths differ");
  if (a.size() != b.size()) throw std::invalid_argument("streams have different lengths");
  if (a.empty()) throw std::invalid_argument("empty count streams");
  return detail::correlate(std::span<const std::uint32_t>(a.counts),
                           std::span<const std::uint32_t>(b.counts), false, false, a.bin_width,
                           max_lag, opts);
}

/// Single-detector correlation; lag 0 is the factorial moment <n(n-1)>/<n>^2.
inline CorrelationCurve g2_auto(const BinnedCounts& counts, double max_lag,
                                const CorrelatorOptions& opts = {}) {
  if (counts.empty()) throw std::invalid_argument("empty count stream");
  const std::span<const std::uint32_t> c(counts.counts);
  return detail::correlate(c, c, true, true, counts.bin_width, max_lag, opts);
}

/// Re-bins to `pnd_bin` and histograms the occupation numbers.
inline NumberDistribution pnd_histogram(const BinnedCounts& counts, double pnd_bin) {
  if (!(counts.bin_width > 0.0) || !(pnd_bin > 0.0)) {
    throw std::invalid_argument("bin widths must be > 0");
  }
  const double ratio = pnd_bin / counts.bin_width;
  const double factor = std::round(ratio);
  if (factor < 1.0 || std::abs(ratio - factor) > 1e-6 * factor) {
    throw std::invalid_argument("PND bin must be an integer multiple of the count bin");
  }
  const BinnedCounts coarse = rebin(counts, static_cast<std::size_t>(factor));
  if (coarse.empty()) throw std::invalid_argument("record shorter than one PND bin");
  std::uint32_t top = 0;
  for (auto n : coarse.counts) top = std::max(top, n);
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(top) + 1, 0);
  for (auto n : coarse.counts) ++hist[n];
  const double total = static_cast<double>(coarse.size());
  std::vector<double> probs(hist.size());
  for (std::size_t n = 0; n < hist.size(); ++n) probs[n] = static_cast<double>(hist[n]) / total;
  return make_distribution(std::move(probs), DistributionSource::Empirical);
}

/// Q = (<n^2> - <n> - <n>^2) / <n>.
inline double mandel_q(const NumberDistribution& dist) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t n = 0; n < dist.probs.size(); ++n) {
    const double x = static_cast<double>(n);
    m1 += x * dist.probs[n];
    m2 += x * x * dist.probs[n];
  }
  if (!(m1 > 0.0)) throw std::domain_error("Mandel Q undefined for zero mean");
  return (m2 - m1 - m1 * m1) / m1;
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Variance-to-mean ratio of a count record.
inline double fano_factor(std::span<const std::uint32_t> counts) {
  if (counts.empty()) throw std::invalid_argument("empty count record");
  double s1 = 0.0;
  double s2 = 0.0;
  for (auto c : counts) {
    s1 += c;
    s2 += static_cast<double>(c) * c;
  }
  const double n = static_cast<double>(counts.size());
  const double mean = s1 / n;
  if (!(mean > 0.0)) throw std::domain_error("Fano factor undefined for zero mean");
  return (s2 / n - mean * mean) / mean;
}

/// Mandel Q of the occupation numbers in `counts` with a delete-one-group
/// jackknife standard error.
inline Estimate mandel_q_jackknife(std::span<const std::uint32_t> counts, std::size_t groups = 100) {
  if (counts.size() < 2 * groups || groups < 2) {
    throw std::invalid_argument("record too short for jackknife");
  }
  const std::size_t size = counts.size() / groups;
  std::vector<double> g1(groups, 0.0);
  std::vector<double> g2(groups, 0.0);
  double s1 = 0.0;
  double s2 = 0.0;
  double used = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = g * size; i < (g + 1) * size; ++i) {
      g1[g] += counts[i];
      g2[g] += static_cast<double>(counts[i]) * counts[i];
    }
    s1 += g1[g];
    s2 += g2[g];
    used += static_cast<double>(size);
  }
  const auto q_of = [](double sum1, double sum2, double n) {
    const double m = sum1 / n;
    if (!(m > 0.0)) throw std::domain_error("Mandel Q undefined for zero mean");
    return (sum2 / n - m - m * m) / m;
  };
  const double full = q_of(s1, s2, used);
  std::vector<double> leave(groups);
  double leave_mean = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    leave[g] = q_of(s1 - g1[g], s2 - g2[g], used - static_cast<double>(size));
    leave_mean += leave[g];
  }
  leave_mean /= static_cast<double>(groups);
  double var = 0.0;
  for (double q : leave) var += (q - leave_mean) * (q - leave_mean);
  const double k = static_cast<double>(groups);
  return {full, std::sqrt(var * (k - 1.0) / k)};
}

}  // namespace tlight
