#pragma once

// Detector models: noiseless sampling of the intensity (fast photodiodes) and
// bin-integrated Poisson photon counting (single-photon counting modules).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlight/modulation.hpp"

namespace tlight {

/// Reference bin that trace intensities are expressed in (expected photons
/// per 450 us, post-efficiency).
inline constexpr double kPndBin = 450e-6;

struct DetectorParams {
  double efficiency = 0.65;
  /// 2.25e-2 counts per 450 us bin.
  double dark_rate = 2.25e-2 / kPndBin;
  double count_bin = 30e-6;
  double max_rate = 94000.0;
  double reference_bin = kPndBin;

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
      throw std::invalid_argument("detector efficiency must lie in [0, 1]");
    }
    if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate)) {
      throw std::invalid_argument("dark rate must be >= 0");
    }
    if (!(count_bin > 0.0) || !std::isfinite(count_bin)) {
      throw std::invalid_argument("count bin must be > 0");
    }
    if (!(reference_bin > 0.0)) throw std::invalid_argument("reference bin must be > 0");
    if (!(max_rate > 0.0)) throw std::invalid_argument("max rate must be > 0");
  }
};

struct BinnedCounts {
  double bin_width = 0.0;
  std::vector<std::uint32_t> counts;
  double origin_time = 0.0;

  std::size_t size() const noexcept { return counts.size(); }
  bool empty() const noexcept { return counts.empty(); }

  std::uint64_t total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }

  double mean() const noexcept {
    return counts.empty() ? 0.0
                          : static_cast<double>(total()) / static_cast<double>(counts.size());
  }
};

struct CountRecord {
  BinnedCounts counts;
  /// Expected detection rate averaged over the run, counts per second.
  double mean_rate = 0.0;
  bool rate_cap_exceeded = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t bin_count(double duration, double width) {
  return static_cast<std::size_t>(std::floor(duration / width * (1.0 + kTimeSlack)));
}

}  // namespace detail

/// Photon counting as an inhomogeneous Poisson process, one draw per bin.
///
/// A trace value I (photons per reference bin, post-efficiency) is the rate
/// I / (efficiency * reference_bin) at the detector face; efficiency scales it
/// back, so the expected count in a bin is the bin integral of I divided by
/// reference_bin, plus dark_rate * bin width.
inline CountRecord simulate_counts(const ModulationTrace& intensity, const DetectorParams& det,
                                   double duration, std::uint64_t seed) {
  det.validate();
  if (intensity.kind() != TraceKind::Intensity) {
    throw std::invalid_argument("simulate_counts requires an intensity trace");
  }
  if (!(duration > 0.0) || duration > intensity.duration() * (1.0 + kTimeSlack)) {
    throw std::invalid_argument("count duration must be positive and within the trace");
  }

  const double width = det.count_bin;
  const std::size_t bins = detail::bin_count(duration, width);
  const double to_counts = det.efficiency > 0.0 ? 1.0 / det.reference_bin : 0.0;
  const double dark = det.dark_rate * width;
  const auto& segs = intensity.segments();

  CountRecord record;
  record.counts.bin_width = width;
  record.counts.counts.resize(bins);

  Rng rng(seed);
  std::size_t s = 0;
  double expected_total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) * width;
    const double hi = lo + width;
    // Exact integral of the piecewise-constant trace over [lo, hi).
    double integral = 0.0;
    while (s + 1 < segs.size() && segs[s + 1].start <= lo) ++s;
    std::size_t k = s;
    while (k < segs.size() && segs[k].start < hi) {
      const double a = std::max(lo, segs[k].start);
      const double z = std::min(hi, intensity.segment_end(k));
      if (z > a) integral += segs[k].value * (z - a);
      ++k;
    }
    const double mu = integral * to_counts + dark;
    expected_total += mu;
    record.counts.counts[b] = rng.poisson(mu);
  }

  record.mean_rate = bins > 0 ? expected_total / (static_cast<double>(bins) * width) : 0.0;
  if (record.mean_rate > det.max_rate) {
    record.rate_cap_exceeded = true;
    record.warnings.push_back("mean detection rate " + std::to_string(record.mean_rate) +
                              " cps exceeds detector cap " + std::to_string(det.max_rate) +
                              " cps");
  }
  return record;
}

/// 50:50 splitter: every count goes to A with probability 1/2, else to B.
inline std::pair<BinnedCounts, BinnedCounts> split_stream(const BinnedCounts& counts,
                                                          std::uint64_t seed) {
  BinnedCounts a{counts.bin_width, std::vector<std::uint32_t>(counts.size()), counts.origin_time};
  BinnedCounts b{counts.bin_width, std::vector<std::uint32_t>(counts.size()), counts.origin_time};
  Rng rng(seed);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::uint32_t n = counts.counts[i];
    const std::uint32_t to_a = n == 0 ? 0 : rng.binomial(n, 0.5);
    a.counts[i] = to_a;
    b.counts[i] = n - to_a;
  }
  return {std::move(a), std::move(b)};
}

/// Trace values at t = k * sample_period for all k with t < duration.
inline std::vector<double> sample_classical(const ModulationTrace& intensity,
                                            double sample_period) {
  if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
    throw std::invalid_argument("sample period must be > 0");
  }
  const std::size_t n = detail::bin_count(intensity.duration(), sample_period);
  std::vector<double> out(n);
  const auto& segs = intensity.segments();
  std::size_t s = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * sample_period;
    while (s + 1 < segs.size() && segs[s + 1].start <= t) ++s;
    out[k] = segs[s].value;
  }
  return out;
}

/// Sums groups of `factor` consecutive bins; a trailing partial group is dropped.
inline BinnedCounts rebin(const BinnedCounts& counts, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("rebin factor must be >= 1");
  BinnedCounts out;
  out.bin_width = counts.bin_width * static_cast<double>(factor);
  out.origin_time = counts.origin_time;
  const std::size_t groups = counts.size() / factor;
  out.counts.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    std::uint32_t acc = 0;
    for (std::size_t i = 0; i < factor; ++i) acc += counts.counts[g * factor + i];
    out.counts[g] = acc;
  }
  return out;
}

}  // namespace tlight
