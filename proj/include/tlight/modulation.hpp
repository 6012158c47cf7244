#pragma once

// Stochastic piecewise-constant phase and intensity traces: the simulated
// effect of the noisy rf drive on the acousto-optic modulators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlight/random.hpp"

namespace tlight {

/// Relative slack used when comparing accumulated segment times against a
/// run duration, so that e.g. 100 dwells of 10 ms fill exactly 1 s.
inline constexpr double kTimeSlack = 1e-12;

// ---------------------------------------------------------------------------
// Dwell-time laws
// ---------------------------------------------------------------------------

enum class DwellKind { Constant, Exponential, TruncatedExponential };

/// Law of the waiting time between two consecutive jumps of the rf drive.
class DwellDistribution {
 public:
  static DwellDistribution constant(double tau_c) {
    if (!(tau_c > 0.0)) throw std::invalid_argument("constant dwell requires tau_c > 0");
    return DwellDistribution(DwellKind::Constant, tau_c, tau_c, tau_c);
  }

  /// Untruncated exponential with mean tau_c.
  static DwellDistribution exponential(double tau_c) {
    if (!(tau_c > 0.0)) throw std::invalid_argument("exponential dwell requires tau_c > 0");
    return DwellDistribution(DwellKind::Exponential, tau_c, 0.0,
                             std::numeric_limits<double>::infinity());
  }

  /// exp(-t/tau_c) renormalized on [t_min, t_max].
  static DwellDistribution truncated_exponential(double tau_c, double t_min = 1e-3,
                                                 double t_max = 100e-3) {
    if (!(tau_c > 0.0)) throw std::invalid_argument("truncated exponential dwell requires tau_c > 0");
    if (!(t_min > 0.0) || !(t_min < t_max)) {
      throw std::invalid_argument("truncated exponential dwell requires 0 < t_min < t_max");
    }
    return DwellDistribution(DwellKind::TruncatedExponential, tau_c, t_min, t_max);
  }

  DwellKind kind() const noexcept { return kind_; }
  double tau_c() const noexcept { return tau_c_; }
  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }

  double sample(Rng& rng) const {
    switch (kind_) {
      case DwellKind::Constant:
        return tau_c_;
      case DwellKind::Exponential:
        return rng.exponential(tau_c_);
      case DwellKind::TruncatedExponential: {
        const double span = t_max_ - t_min_;
        const double mass = -std::expm1(-span / tau_c_);
        const double t = t_min_ - tau_c_ * std::log1p(-rng.uniform() * mass);
        return std::clamp(t, t_min_, t_max_);
      }
    }
    return tau_c_;
  }

  /// Mean dwell; differs from tau_c for the truncated law.
  double mean() const noexcept {
    if (kind_ != DwellKind::TruncatedExponential) return tau_c_;
    const double span = t_max_ - t_min_;
    const double tail = std::exp(-span / tau_c_);
    return t_min_ + tau_c_ - span * tail / (1.0 - tail);
  }

  /// Probability density P(t). Zero for the Constant (atomic) law.
  double density(double t) const noexcept {
    switch (kind_) {
      case DwellKind::Constant:
        return 0.0;
      case DwellKind::Exponential:
        return t < 0.0 ? 0.0 : std::exp(-t / tau_c_) / tau_c_;
      case DwellKind::TruncatedExponential: {
        if (t < t_min_ || t > t_max_) return 0.0;
        const double mass = -std::expm1(-(t_max_ - t_min_) / tau_c_);
        return std::exp(-(t - t_min_) / tau_c_) / (tau_c_ * mass);
      }
    }
    return 0.0;
  }

 private:
  DwellDistribution(DwellKind kind, double tau_c, double t_min, double t_max)
      : kind_(kind), tau_c_(tau_c), t_min_(t_min), t_max_(t_max) {}

  DwellKind kind_;
  double tau_c_;
  double t_min_;
  double t_max_;
};

// ---------------------------------------------------------------------------
// Phase jumps
// ---------------------------------------------------------------------------

enum class PhaseJumpKind { UniformFullCircle, Frozen };

class PhaseJumpLaw {
 public:
  static PhaseJumpLaw uniform_full_circle() {
    return PhaseJumpLaw(PhaseJumpKind::UniformFullCircle, 0.0);
  }
  static PhaseJumpLaw frozen(double phi = 0.0) {
    if (!(phi > -std::numbers::pi && phi <= std::numbers::pi)) {
      throw std::invalid_argument("frozen phase must lie in (-pi, pi]");
    }
    return PhaseJumpLaw(PhaseJumpKind::Frozen, phi);
  }

  PhaseJumpKind kind() const noexcept { return kind_; }
  bool is_frozen() const noexcept { return kind_ == PhaseJumpKind::Frozen; }
  double frozen_phase() const noexcept { return phi_; }

  double sample(Rng& rng) const noexcept {
    if (kind_ == PhaseJumpKind::Frozen) return phi_;
    return rng.uniform(-std::numbers::pi, std::numbers::pi);
  }

 private:
  PhaseJumpLaw(PhaseJumpKind kind, double phi) : kind_(kind), phi_(phi) {}
  PhaseJumpKind kind_;
  double phi_;
};

// ---------------------------------------------------------------------------
// Intensity laws
// ---------------------------------------------------------------------------

enum class IntensityKind { Degenerate, Exponential, GammaTwo, Tabulated };

/// Probability density f(I) over transmitted intensity I = |alpha|^2, in units
/// of expected (post-efficiency) photon counts per PND bin.
///
/// The thermal P function maps to an exponential density with mean nbar and
/// the zeta state to zeta^2 I exp(-zeta I), a shape-2 gamma law with mean
/// 2/zeta. Every law carries an upper cut I_max, the maximally transmitted
/// intensity, and samples above it are clipped.
class IntensityLaw {
 public:
  static constexpr std::size_t kTableGrid = 10000;

  static IntensityLaw degenerate(double intensity) {
    if (!(intensity >= 0.0) || !std::isfinite(intensity)) {
      throw std::invalid_argument("degenerate intensity must be finite and >= 0");
    }
    IntensityLaw law(IntensityKind::Degenerate, intensity);
    law.i_max_ = intensity;
    return law;
  }

  /// Thermal law; i_max <= 0 selects the default cut 20 * nbar.
  static IntensityLaw exponential(double nbar, double i_max = 0.0) {
    if (!(nbar > 0.0) || !std::isfinite(nbar)) {
      throw std::invalid_argument("exponential intensity law requires nbar > 0");
    }
    IntensityLaw law(IntensityKind::Exponential, nbar);
    law.i_max_ = i_max > 0.0 ? i_max : 20.0 * nbar;
    return law;
  }

  /// Zeta-state law with rate zeta (mean 2/zeta); i_max <= 0 selects 20 * mean.
  static IntensityLaw gamma_two(double zeta, double i_max = 0.0) {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) {
      throw std::invalid_argument("gamma-two intensity law requires zeta > 0");
    }
    IntensityLaw law(IntensityKind::GammaTwo, zeta);
    law.i_max_ = i_max > 0.0 ? i_max : 40.0 / zeta;
    return law;
  }

  static IntensityLaw gamma_two_with_mean(double nbar, double i_max = 0.0) {
    if (!(nbar > 0.0)) throw std::invalid_argument("gamma-two intensity law requires nbar > 0");
    return gamma_two(2.0 / nbar, i_max);
  }

  /// Piecewise-linear density through the given points, renormalized to unit
  /// mass. Intensities must be non-negative and strictly increasing.
  static IntensityLaw tabulated(std::vector<double> intensity, std::vector<double> density) {
    if (intensity.size() < 2 || intensity.size() != density.size()) {
      throw std::invalid_argument("tabulated intensity law needs >= 2 matching points");
    }
    if (intensity.front() < 0.0) throw std::invalid_argument("tabulated intensities must be >= 0");
    for (std::size_t i = 0; i < intensity.size(); ++i) {
      if (!(density[i] >= 0.0) || !std::isfinite(density[i])) {
        throw std::invalid_argument("tabulated density must be finite and >= 0");
      }
      if (i > 0 && !(intensity[i] > intensity[i - 1])) {
        throw std::invalid_argument("tabulated intensities must be strictly increasing");
      }
    }
    double mass = 0.0;
    for (std::size_t i = 1; i < intensity.size(); ++i) {
      mass += 0.5 * (density[i] + density[i - 1]) * (intensity[i] - intensity[i - 1]);
    }
    if (!(mass > 0.0)) throw std::invalid_argument("tabulated density has zero mass");
    for (double& d : density) d /= mass;

    IntensityLaw law(IntensityKind::Tabulated, 0.0);
    law.i_max_ = intensity.back();
    law.table_i_ = std::move(intensity);
    law.table_f_ = std::move(density);
    law.build_inverse_cdf();
    return law;
  }

  IntensityKind kind() const noexcept { return kind_; }
  /// I0 (Degenerate), nbar (Exponential) or zeta (GammaTwo); 0 for Tabulated.
  double parameter() const noexcept { return param_; }
  double i_max() const noexcept { return i_max_; }
  const std::vector<double>& table_intensity() const noexcept { return table_i_; }
  const std::vector<double>& table_density() const noexcept { return table_f_; }

  double mean() const noexcept {
    switch (kind_) {
      case IntensityKind::Degenerate:
      case IntensityKind::Exponential:
        return param_;
      case IntensityKind::GammaTwo:
        return 2.0 / param_;
      case IntensityKind::Tabulated:
        return table_moment(1);
    }
    return 0.0;
  }

  double second_moment() const noexcept {
    switch (kind_) {
      case IntensityKind::Degenerate:
        return param_ * param_;
      case IntensityKind::Exponential:
        return 2.0 * param_ * param_;
      case IntensityKind::GammaTwo:
        return 6.0 / (param_ * param_);
      case IntensityKind::Tabulated:
        return table_moment(2);
    }
    return 0.0;
  }

  /// <I^2>/<I>^2, the zero-delay G2 of light modulated by this law.
  double g2_zero() const {
    const double m = mean();
    if (!(m > 0.0)) throw std::domain_error("intensity law has zero mean");
    return second_moment() / (m * m);
  }

  /// Density f(I). The Degenerate law is atomic and reports 0 everywhere.
  double density(double x) const noexcept {
    if (x < 0.0) return 0.0;
    switch (kind_) {
      case IntensityKind::Degenerate:
        return 0.0;
      case IntensityKind::Exponential:
        return std::exp(-x / param_) / param_;
      case IntensityKind::GammaTwo:
        return param_ * param_ * x * std::exp(-param_ * x);
      case IntensityKind::Tabulated:
        return table_density_at(x);
    }
    return 0.0;
  }

  double cdf(double x) const noexcept {
    if (x < 0.0) return 0.0;
    switch (kind_) {
      case IntensityKind::Degenerate:
        return x >= param_ ? 1.0 : 0.0;
      case IntensityKind::Exponential:
        return -std::expm1(-x / param_);
      case IntensityKind::GammaTwo:
        return 1.0 - (1.0 + param_ * x) * std::exp(-param_ * x);
      case IntensityKind::Tabulated:
        return table_cdf_at(x);
    }
    return 0.0;
  }

  /// Unclipped draw.
  double sample(Rng& rng) const {
    switch (kind_) {
      case IntensityKind::Degenerate:
        return param_;
      case IntensityKind::Exponential:
        return -param_ * std::log1p(-rng.uniform());
      case IntensityKind::GammaTwo:
        // Shape 2 is exactly the sum of two exponentials of rate zeta.
        return (-std::log1p(-rng.uniform()) - std::log1p(-rng.uniform())) / param_;
      case IntensityKind::Tabulated:
        return inverse_cdf(rng.uniform());
    }
    return 0.0;
  }

  /// Upper integration limit for quadratures over f.
  double support_upper() const noexcept {
    switch (kind_) {
      case IntensityKind::Degenerate:
        return param_;
      case IntensityKind::Exponential:
      case IntensityKind::GammaTwo:
        return 40.0 * mean();
      case IntensityKind::Tabulated:
        return table_i_.back();
    }
    return 0.0;
  }

 private:
  IntensityLaw(IntensityKind kind, double param) : kind_(kind), param_(param) {}

  double table_density_at(double x) const noexcept {
    if (x < table_i_.front() || x > table_i_.back()) return 0.0;
    auto it = std::upper_bound(table_i_.begin(), table_i_.end(), x);
    if (it == table_i_.end()) return table_f_.back();
    const auto j = static_cast<std::size_t>(it - table_i_.begin());
    const double w = (x - table_i_[j - 1]) / (table_i_[j] - table_i_[j - 1]);
    return table_f_[j - 1] + w * (table_f_[j] - table_f_[j - 1]);
  }

  double table_cdf_at(double x) const noexcept {
    if (x <= table_i_.front()) return 0.0;
    if (x >= table_i_.back()) return 1.0;
    double acc = 0.0;
    for (std::size_t j = 1; j < table_i_.size(); ++j) {
      const double lo = table_i_[j - 1];
      const double hi = std::min(table_i_[j], x);
      acc += 0.5 * (table_f_[j - 1] + table_density_at(hi)) * (hi - lo);
      if (table_i_[j] >= x) break;
    }
    return std::min(acc, 1.0);
  }

  // Exact moment of the piecewise-linear density.
  double table_moment(int order) const noexcept {
    double acc = 0.0;
    for (std::size_t j = 1; j < table_i_.size(); ++j) {
      const double a = table_i_[j - 1];
      const double b = table_i_[j];
      const double fa = table_f_[j - 1];
      const double slope = (table_f_[j] - fa) / (b - a);
      // integral of (fa + slope (x - a)) x^order over [a, b]
      const auto power = [](double x, int k) { return std::pow(x, k); };
      const double c0 = fa - slope * a;
      acc += c0 * (power(b, order + 1) - power(a, order + 1)) / (order + 1) +
             slope * (power(b, order + 2) - power(a, order + 2)) / (order + 2);
    }
    return acc;
  }

  void build_inverse_cdf() {
    const double lo = table_i_.front();
    const double hi = table_i_.back();
    grid_i_.resize(kTableGrid);
    grid_cdf_.resize(kTableGrid);
    const double step = (hi - lo) / static_cast<double>(kTableGrid - 1);
    double prev_f = table_density_at(lo);
    grid_i_[0] = lo;
    grid_cdf_[0] = 0.0;
    for (std::size_t k = 1; k < kTableGrid; ++k) {
      grid_i_[k] = lo + step * static_cast<double>(k);
      const double f = table_density_at(grid_i_[k]);
      grid_cdf_[k] = grid_cdf_[k - 1] + 0.5 * (prev_f + f) * step;
      prev_f = f;
    }
    const double total = grid_cdf_.back();
    for (double& c : grid_cdf_) c /= total;
  }

  double inverse_cdf(double u) const noexcept {
    auto it = std::upper_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
    if (it == grid_cdf_.begin()) return grid_i_.front();
    if (it == grid_cdf_.end()) return grid_i_.back();
    const auto k = static_cast<std::size_t>(it - grid_cdf_.begin());
    const double c0 = grid_cdf_[k - 1];
    const double c1 = grid_cdf_[k];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return grid_i_[k - 1] + w * (grid_i_[k] - grid_i_[k - 1]);
  }

  IntensityKind kind_;
  double param_;
  double i_max_ = 0.0;
  std::vector<double> table_i_;
  std::vector<double> table_f_;
  std::vector<double> grid_i_;
  std::vector<double> grid_cdf_;
};

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

enum class TraceKind { Phase, Intensity };

struct Segment {
  double start;
  double value;
};

/// Piecewise-constant, right-continuous time series on [0, duration).
class ModulationTrace {
 public:
  ModulationTrace(TraceKind kind, std::vector<Segment> segments, double duration)
      : kind_(kind), segments_(std::move(segments)), duration_(duration) {
    if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
      throw std::invalid_argument("trace duration must be positive");
    }
    if (segments_.empty() || segments_.front().start != 0.0) {
      throw std::invalid_argument("trace must start with a segment at t = 0");
    }
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      if (i > 0 && !(s.start > segments_[i - 1].start)) {
        throw std::invalid_argument("segment start times must be strictly increasing");
      }
      if (!(s.start < duration_)) throw std::invalid_argument("segment starts beyond duration");
      if (kind_ == TraceKind::Phase &&
          !(s.value > -std::numbers::pi && s.value <= std::numbers::pi)) {
        throw std::invalid_argument("phase values must lie in (-pi, pi]");
      }
      if (kind_ == TraceKind::Intensity && !(s.value >= 0.0)) {
        throw std::invalid_argument("intensity values must be >= 0");
      }
    }
  }

  TraceKind kind() const noexcept { return kind_; }
  double duration() const noexcept { return duration_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }

  double segment_end(std::size_t i) const noexcept {
    return i + 1 < segments_.size() ? segments_[i + 1].start : duration_;
  }

  /// Index of the segment containing t; t is clamped into [0, duration).
  std::size_t segment_index_at(double t) const noexcept {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double x, const Segment& s) { return x < s.start; });
    if (it == segments_.begin()) return 0;
    return static_cast<std::size_t>(it - segments_.begin()) - 1;
  }

  double value_at(double t) const noexcept { return segments_[segment_index_at(t)].value; }

  /// Duration-weighted mean value.
  double time_average() const noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      acc += segments_[i].value * (segment_end(i) - segments_[i].start);
    }
    return acc / duration_;
  }

 private:
  TraceKind kind_;
  std::vector<Segment> segments_;
  double duration_;
};

struct IntensityTraceResult {
  ModulationTrace trace;
  /// Segments whose drawn value exceeded I_max and were clipped to it.
  std::size_t clipped_segments = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Draws i.i.d. dwell lengths until they cover `duration`. With a positive
/// `time_grid` each dwell is rounded to a whole number (>= 1) of grid steps,
/// which aligns segment boundaries with a counting grid.
inline std::vector<double> sample_dwells(const DwellDistribution& dist, double duration,
                                         std::uint64_t seed, double time_grid = 0.0) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("sample_dwells requires duration > 0");
  }
  if (time_grid < 0.0) throw std::invalid_argument("time grid must be >= 0");
  Rng rng(seed);
  std::vector<double> dwells;
  const double target = duration * (1.0 - kTimeSlack);
  double covered = 0.0;
  while (covered < target) {
    double t = dist.sample(rng);
    if (time_grid > 0.0) {
      t = std::max(1.0, std::round(t / time_grid)) * time_grid;
    }
    dwells.push_back(t);
    covered += t;
  }
  return dwells;
}

namespace detail {

// Segment start times from dwells; integer-tick accumulation on a grid keeps
// boundaries at exact multiples of the grid step.
inline std::vector<double> segment_starts(const std::vector<double>& dwells, double duration,
                                          double time_grid) {
  std::vector<double> starts;
  starts.reserve(dwells.size());
  double t = 0.0;
  long long ticks = 0;
  const double limit = duration * (1.0 - kTimeSlack);
  for (double d : dwells) {
    if (t >= limit) break;
    starts.push_back(t);
    if (time_grid > 0.0) {
      ticks += std::llround(d / time_grid);
      t = static_cast<double>(ticks) * time_grid;
    } else {
      t += d;
    }
  }
  return starts;
}

}  // namespace detail

inline ModulationTrace build_phase_trace(const DwellDistribution& dwell, const PhaseJumpLaw& jumps,
                                         double duration, std::uint64_t seed,
                                         double time_grid = 0.0) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("build_phase_trace requires duration > 0");
  }
  if (jumps.is_frozen()) {
    return ModulationTrace(TraceKind::Phase, {{0.0, jumps.frozen_phase()}}, duration);
  }
  const auto dwells = sample_dwells(dwell, duration, derive_seed(seed, 0), time_grid);
  const auto starts = detail::segment_starts(dwells, duration, time_grid);
  Rng rng(derive_seed(seed, 1));
  std::vector<Segment> segments;
  segments.reserve(starts.size());
  for (double s : starts) segments.push_back({s, jumps.sample(rng)});
  return ModulationTrace(TraceKind::Phase, std::move(segments), duration);
}

inline IntensityTraceResult build_intensity_trace(const IntensityLaw& law,
                                                  const DwellDistribution& dwell, double duration,
                                                  std::uint64_t seed, double time_grid = 0.0) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("build_intensity_trace requires duration > 0");
  }
  const auto dwells = sample_dwells(dwell, duration, derive_seed(seed, 0), time_grid);
  const auto starts = detail::segment_starts(dwells, duration, time_grid);
  Rng rng(derive_seed(seed, 1));
  std::vector<Segment> segments;
  segments.reserve(starts.size());
  std::size_t clipped = 0;
  for (double s : starts) {
    double value = law.sample(rng);
    if (value > law.i_max()) {
      value = law.i_max();
      ++clipped;
    }
    segments.push_back({s, std::max(0.0, value)});
  }
  return {ModulationTrace(TraceKind::Intensity, std::move(segments), duration), clipped};
}

}  // namespace tlight
