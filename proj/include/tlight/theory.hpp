#pragma once

// Closed-form and quadrature results: temporal overlap xi(tau), G2(tau),
// photon number distributions of intensity-modulated coherent light,
// photon-added states, their P functions and Mandel Q, and the scalar
// beamsplitter entanglement criterion.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tlight/estimators.hpp"
#include "tlight/modulation.hpp"
#include "tlight/quadrature.hpp"

namespace tlight {

/// Dwell law of one interferometer arm; std::nullopt is a frozen phase.
using ArmDwell = std::optional<DwellDistribution>;

// ---------------------------------------------------------------------------
// Temporal overlap
// ---------------------------------------------------------------------------

/// Probability that one arm makes no phase jump over a window of length tau:
///   int_tau^inf (t - tau) P(t) dt / int_0^inf t P(t) dt.
inline double xi_single(const DwellDistribution& dwell, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("xi requires tau >= 0");
  switch (dwell.kind()) {
    case DwellKind::Constant:
      return std::max(0.0, 1.0 - tau / dwell.tau_c());
    case DwellKind::Exponential:
      return std::exp(-tau / dwell.tau_c());
    case DwellKind::TruncatedExponential: {
      const double lo = std::max(tau, dwell.t_min());
      const double hi = dwell.t_max();
      if (lo >= hi) return 0.0;
      const double tc = dwell.tau_c();
      // Work in units of tau_c with an unnormalized weight; the normalization
      // cancels in the ratio.
      const auto weight = [&](double t) { return std::exp(-(t - dwell.t_min()) / tc); };
      const QuadratureOptions opts{1e-14, 50};
      const double numerator = integrate([&](double t) { return (t - tau) * weight(t); }, lo, hi,
                                         opts);
      const double denominator =
          integrate([&](double t) { return t * weight(t); }, dwell.t_min(), hi, opts);
      return std::clamp(numerator / denominator, 0.0, 1.0);
    }
  }
  return 0.0;
}

/// Overlap for two independently jumping arms (product of single-arm factors);
/// a frozen arm contributes 1.
inline double xi_overlap(const ArmDwell& arm1, const ArmDwell& arm2, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("xi requires tau >= 0");
  const double f1 = arm1 ? xi_single(*arm1, tau) : 1.0;
  const double f2 = arm2 ? xi_single(*arm2, tau) : 1.0;
  return f1 * f2;
}

/// G2 behind a full-circle phase-noise interferometer: 1 + xi / 2.
inline double g2_phase_noise(double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
  return 1.0 + 0.5 * xi;
}

/// G2 of intensity-modulated light: 1 + (G2(0) - 1) xi with G2(0) = <I^2>/<I>^2.
inline double g2_intensity_modulated(const IntensityLaw& law, double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
  return 1.0 + (law.g2_zero() - 1.0) * xi;
}

// ---------------------------------------------------------------------------
// Photon number distributions
// ---------------------------------------------------------------------------

/// Bose-Einstein p(n) = (1 - q) q^n, q = nbar / (nbar + 1).
inline NumberDistribution pnd_thermal(double nbar, std::size_t n_max) {
  if (!(nbar > 0.0) || !std::isfinite(nbar)) throw std::invalid_argument("thermal PND requires nbar > 0");
  const double q = nbar / (nbar + 1.0);
  std::vector<double> p(n_max + 1);
  double term = 1.0 / (nbar + 1.0);
  for (std::size_t n = 0; n <= n_max; ++n) {
    p[n] = term;
    term *= q;
  }
  return make_distribution(std::move(p), DistributionSource::Analytic);
}

/// p(n) = (zeta / (zeta + 1))^2 (n + 1) / (zeta + 1)^n with zeta = 2 / nbar.
inline NumberDistribution pnd_zeta(double nbar, std::size_t n_max) {
  if (!(nbar > 0.0) || !std::isfinite(nbar)) throw std::invalid_argument("zeta PND requires nbar > 0");
  const double zeta = 2.0 / nbar;
  const double base = zeta / (zeta + 1.0);
  const double ratio = 1.0 / (zeta + 1.0);
  std::vector<double> p(n_max + 1);
  double geometric = base * base;
  for (std::size_t n = 0; n <= n_max; ++n) {
    p[n] = geometric * static_cast<double>(n + 1);
    geometric *= ratio;
  }
  return make_distribution(std::move(p), DistributionSource::Analytic);
}

inline NumberDistribution pnd_poisson(double mean, std::size_t n_max) {
  if (!(mean >= 0.0)) throw std::invalid_argument("Poisson PND requires mean >= 0");
  std::vector<double> p(n_max + 1, 0.0);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double x = static_cast<double>(n);
    p[n] = mean == 0.0 ? (n == 0 ? 1.0 : 0.0)
                       : std::exp(x * std::log(mean) - mean - std::lgamma(x + 1.0));
  }
  return make_distribution(std::move(p), DistributionSource::Analytic);
}

namespace detail {

// e^{-x} x^n / n!, evaluated in log space.
inline double poisson_kernel(double x, std::size_t n) {
  if (x <= 0.0) return n == 0 ? 1.0 : 0.0;
  const double k = static_cast<double>(n);
  return std::exp(k * std::log(x) - x - std::lgamma(k + 1.0));
}

// Mixes a density over [0, upper] with the Poisson kernel, term by term.
template <class Density>
NumberDistribution poisson_mixture(const Density& density, const std::vector<double>& breakpoints,
                                   std::size_t n_max) {
  std::vector<double> p(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    p[n] = integrate([&](double x) { return density(x) * poisson_kernel(x, n); }, breakpoints);
  }
  return make_distribution(std::move(p), DistributionSource::Analytic);
}

}  // namespace detail

/// p(n) = int f(I) e^{-I} I^n / n! dI by adaptive quadrature.
inline NumberDistribution pnd_from_intensity_law(const IntensityLaw& law, std::size_t n_max) {
  if (law.kind() == IntensityKind::Degenerate) return pnd_poisson(law.parameter(), n_max);
  std::vector<double> breaks;
  if (law.kind() == IntensityKind::Tabulated) {
    breaks = law.table_intensity();
  } else {
    // Split so each panel holds the peak of some Poisson kernels.
    const double upper = std::max(law.support_upper(), 2.0 * static_cast<double>(n_max) + 40.0);
    constexpr int kPanels = 16;
    for (int i = 0; i <= kPanels; ++i) breaks.push_back(upper * i / kPanels);
  }
  return detail::poisson_mixture([&](double x) { return law.density(x); }, breaks, n_max);
}

// ---------------------------------------------------------------------------
// Photon addition
// ---------------------------------------------------------------------------

/// Normalized a^dagger rho a on a diagonal state: p1(m) = m p(m - 1) / (<n> + 1).
inline NumberDistribution add_photon(const NumberDistribution& dist) {
  double norm = 0.0;
  for (std::size_t n = 0; n < dist.probs.size(); ++n) {
    norm += static_cast<double>(n + 1) * dist.probs[n];
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("add_photon requires a distribution with support");
  }
  std::vector<double> p(dist.probs.size() + 1, 0.0);
  for (std::size_t m = 1; m < p.size(); ++m) {
    p[m] = static_cast<double>(m) * dist.probs[m - 1] / norm;
  }
  return make_distribution(std::move(p), dist.source);
}

enum class BaseState { Thermal, Zeta };

struct PhotonAddedState {
  BaseState base = BaseState::Thermal;
  double nbar = 1.0;  ///< mean photon number before addition
  int added_photons = 1;

  void validate() const {
    if (!(nbar > 0.0) || !std::isfinite(nbar)) throw std::invalid_argument("nbar must be > 0");
    if (added_photons != 0 && added_photons != 1) {
      throw std::invalid_argument("added_photons must be 0 or 1");
    }
  }
};

/// Glauber-Sudarshan P of the one-photon-added thermal or zeta state at
/// |alpha|^2 = x. Negative values certify nonclassicality.
inline double p_function_added(const PhotonAddedState& state, double x) {
  state.validate();
  if (state.added_photons != 1) {
    throw std::invalid_argument("p_function_added needs added_photons = 1; use the base law");
  }
  if (!(x >= 0.0)) throw std::invalid_argument("|alpha|^2 must be >= 0");
  const double nb = state.nbar;
  if (state.base == BaseState::Thermal) {
    return (x * (1.0 + nb) - nb) * std::exp(-x / nb) / (std::numbers::pi * nb * nb * nb);
  }
  const double quad = nb * nb - 3.0 * nb * (nb + 2.0) * x + (nb + 2.0) * (nb + 2.0) * x * x;
  return 4.0 / (std::numbers::pi * nb * nb * nb * nb * (1.0 + nb)) * quad *
         std::exp(-2.0 * x / nb);
}

/// pi * P, the density over x = |alpha|^2 (integrates to 1).
inline double added_intensity_density(const PhotonAddedState& state, double x) {
  return std::numbers::pi * p_function_added(state, x);
}

/// Interval of |alpha|^2 where the photon-added P function is negative.
inline std::pair<double, double> p_function_negative_interval(const PhotonAddedState& state) {
  state.validate();
  const double nb = state.nbar;
  if (state.base == BaseState::Thermal) return {0.0, nb / (1.0 + nb)};
  const double s5 = std::sqrt(5.0);
  return {nb * (3.0 - s5) / (2.0 * (nb + 2.0)), nb * (3.0 + s5) / (2.0 * (nb + 2.0))};
}

/// Base-state PND (before addition).
inline NumberDistribution base_pnd(BaseState base, double nbar, std::size_t n_max) {
  return base == BaseState::Thermal ? pnd_thermal(nbar, n_max) : pnd_zeta(nbar, n_max);
}

/// Photon-added PND by mixing pi * P1 directly with the Poisson kernel.
inline NumberDistribution pnd_photon_added_quadrature(const PhotonAddedState& state,
                                                      std::size_t n_max) {
  state.validate();
  const double upper = std::max(40.0 * state.nbar, 2.0 * static_cast<double>(n_max) + 40.0);
  std::vector<double> breaks;
  const auto [lo, hi] = p_function_negative_interval(state);
  breaks.push_back(0.0);
  if (lo > 0.0) breaks.push_back(lo);
  breaks.push_back(hi);
  constexpr int kPanels = 16;
  for (int i = 1; i <= kPanels; ++i) {
    const double b = hi + (upper - hi) * i / kPanels;
    if (b > breaks.back()) breaks.push_back(b);
  }
  return detail::poisson_mixture([&](double x) { return added_intensity_density(state, x); },
                                 breaks, n_max);
}

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kTailMass = 1e-10;

/// PND of a (possibly photon-added) state, truncated adaptively until the
/// missing tail mass drops below kTailMass.
inline NumberDistribution photon_added_pnd(const PhotonAddedState& state) {
  state.validate();
  auto n_max = static_cast<std::size_t>(50.0 * state.nbar + 100.0);
  constexpr std::size_t kLimit = std::size_t{1} << 24;
  while (n_max <= kLimit) {
    NumberDistribution d = base_pnd(state.base, state.nbar, n_max);
    if (state.added_photons == 1) d = add_photon(d);
    if (1.0 - d.total() < kTailMass) return d;
    n_max *= 2;
  }
  throw TruncationError("Fock truncation did not reach the tail-mass bound");
}

/// Mandel Q of the one-photon-added state for each base nbar on the grid.
inline std::vector<std::pair<double, double>> mandel_q_curve(BaseState base,
                                                             const std::vector<double>& nbar_grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(nbar_grid.size());
  for (double nb : nbar_grid) {
    if (!(nb > 0.0)) throw std::invalid_argument("nbar grid must be positive");
    out.emplace_back(nb, mandel_q(photon_added_pnd({base, nb, 1})));
  }
  return out;
}

/// Closed form Q of the photon-added thermal state, (2 nbar^2 - 1) / (2 nbar + 1).
inline double mandel_q_added_thermal(double nbar) {
  return (2.0 * nbar * nbar - 1.0) / (2.0 * nbar + 1.0);
}

/// Mean photon number after adding one photon, <(n + 1)^2> / (<n> + 1), for a
/// base state of mean nbar.
inline double added_mean(BaseState base, double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("nbar must be >= 0");
  if (base == BaseState::Thermal) return 2.0 * nbar + 1.0;
  return (1.5 * nbar * nbar + 3.0 * nbar + 1.0) / (nbar + 1.0);
}

/// Inverse of added_mean: the base nbar whose photon-added state has mean m > 1.
inline double base_nbar_for_added_mean(BaseState base, double m) {
  if (!(m > 1.0)) throw std::invalid_argument("photon-added mean must exceed 1");
  if (base == BaseState::Thermal) return 0.5 * (m - 1.0);
  return (m + std::sqrt(m * m + 3.0)) / 3.0 - 1.0;
}

// ---------------------------------------------------------------------------
// Entanglement at a 50:50 beamsplitter
// ---------------------------------------------------------------------------

struct SqueezingSpec {
  double mu = 0.0;
};

/// Sufficient condition 2 nbar + 1 < e^mu for a squeezed vacuum mixed with a
/// state of mean photon number nbar.
inline bool entanglement_criterion(double nbar, const SqueezingSpec& sq) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("nbar must be >= 0");
  if (!(sq.mu >= 0.0)) throw std::invalid_argument("squeezing parameter must be >= 0");
  return 2.0 * nbar + 1.0 < std::exp(sq.mu);
}

/// Squeezing at which the criterion switches on.
inline double entanglement_boundary(double nbar) { return std::log(2.0 * nbar + 1.0); }

}  // namespace tlight
