#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tlight/theory.hpp"

using namespace tlight;
using tlight::testing::simpson;

namespace {

constexpr double kPi = std::numbers::pi;

// Single-arm overlap straight from its integral definition.
double xi_by_simpson(const DwellDistribution& d, double tau, double lo, double hi) {
  const auto p = [&](double t) { return d.density(t); };
  const double num = simpson([&](double t) { return (t - tau) * p(t); }, std::max(lo, tau), hi,
                             200000);
  const double den = simpson([&](double t) { return t * p(t); }, lo, hi, 200000);
  return num / den;
}

// Diagonal of a^dagger rho a in a truncated Fock space, by dense matrices.
std::vector<double> conjugate_by_creation(const std::vector<double>& p) {
  const std::size_t dim = p.size() + 1;
  std::vector<std::vector<double>> create(dim, std::vector<double>(dim, 0.0));
  for (std::size_t n = 0; n + 1 < dim; ++n) create[n + 1][n] = std::sqrt(double(n + 1));
  std::vector<std::vector<double>> rho(dim, std::vector<double>(dim, 0.0));
  for (std::size_t n = 0; n < p.size(); ++n) rho[n][n] = p[n];
  const auto mul = [&](const auto& x, const auto& y) {
    std::vector<std::vector<double>> z(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        for (std::size_t j = 0; j < dim; ++j) z[i][j] += x[i][k] * y[k][j];
    return z;
  };
  auto annihilate = create;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) annihilate[i][j] = create[j][i];
  const auto out = mul(mul(create, rho), annihilate);
  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) trace += out[i][i];
  std::vector<double> diag(dim);
  for (std::size_t i = 0; i < dim; ++i) diag[i] = out[i][i] / trace;
  return diag;
}

}  // namespace

TEST(Xi, ConstantDwellTriangle) {
  const auto d = DwellDistribution::constant(10e-3);
  EXPECT_DOUBLE_EQ(xi_overlap(d, std::nullopt, 5e-3), 0.5);
  EXPECT_EQ(xi_overlap(d, std::nullopt, 10e-3), 0.0);
  EXPECT_EQ(xi_overlap(std::nullopt, d, 30e-3), 0.0);
  EXPECT_EQ(xi_overlap(d, std::nullopt, 0.0), 1.0);
}

TEST(Xi, ExponentialBothArmsMatchesQuadrature) {
  const double tc = 10e-3;
  const auto d = DwellDistribution::exponential(tc);
  for (double tau : {0.0, 2e-3, 5e-3, 10e-3, 25e-3}) {
    const double single = xi_by_simpson(d, tau, 0.0, 60 * tc);
    EXPECT_NEAR(xi_overlap(d, d, tau), single * single, 1e-8);
    EXPECT_NEAR(xi_overlap(d, d, tau), std::exp(-2 * tau / tc), 1e-14);
  }
}

TEST(Xi, TruncatedExponentialMatchesQuadrature) {
  const auto d = DwellDistribution::truncated_exponential(10e-3, 1e-3, 100e-3);
  for (double tau : {0.0, 0.5e-3, 1e-3, 3e-3, 10e-3, 40e-3, 99e-3}) {
    EXPECT_NEAR(xi_single(d, tau), xi_by_simpson(d, tau, 1e-3, 100e-3), 1e-8) << tau;
  }
  EXPECT_EQ(xi_single(d, 100e-3), 0.0);
  EXPECT_EQ(xi_single(d, 1.0), 0.0);
}

TEST(Xi, MonotoneFromOneToZero) {
  const std::vector<DwellDistribution> laws{
      DwellDistribution::constant(7e-3), DwellDistribution::exponential(7e-3),
      DwellDistribution::truncated_exponential(7e-3, 1e-3, 50e-3)};
  for (const auto& d : laws) {
    double prev = xi_single(d, 0.0);
    EXPECT_NEAR(prev, 1.0, 1e-12);
    for (double tau = 1e-4; tau < 0.5; tau *= 1.3) {
      const double x = xi_single(d, tau);
      ASSERT_LE(x, prev + 1e-15);
      ASSERT_GE(x, 0.0);
      prev = x;
    }
    EXPECT_LT(xi_single(d, 2.0), 1e-12);
  }
  EXPECT_THROW(xi_single(laws[0], -1.0), std::invalid_argument);
  EXPECT_THROW(xi_overlap(laws[0], laws[1], -1.0), std::invalid_argument);
}

TEST(G2Theory, PhaseNoise) {
  EXPECT_EQ(g2_phase_noise(1.0), 1.5);
  EXPECT_EQ(g2_phase_noise(0.0), 1.0);
  EXPECT_EQ(g2_phase_noise(0.5), 1.25);
  EXPECT_THROW(g2_phase_noise(1.1), std::invalid_argument);
  EXPECT_THROW(g2_phase_noise(-0.1), std::invalid_argument);
}

TEST(G2Theory, IntensityModulated) {
  EXPECT_DOUBLE_EQ(g2_intensity_modulated(IntensityLaw::exponential(1.91), 1.0), 2.0);
  EXPECT_DOUBLE_EQ(g2_intensity_modulated(IntensityLaw::gamma_two(0.5), 1.0), 1.5);
  for (double xi : {0.0, 0.3, 1.0}) {
    EXPECT_DOUBLE_EQ(g2_intensity_modulated(IntensityLaw::degenerate(42.0), xi), 1.0);
  }
  EXPECT_THROW(g2_intensity_modulated(IntensityLaw::degenerate(0.0), 0.5), std::domain_error);
}

TEST(PndThermal, Values) {
  EXPECT_NEAR(pnd_thermal(1.91, 10).probs[0], 1.0 / 2.91, 1e-15);
  EXPECT_NEAR(pnd_thermal(1.91, 10).probs[0], 0.34364, 1e-5);
  EXPECT_GT(pnd_thermal(1e-9, 5).probs[0], 1.0 - 1e-8);
  EXPECT_NEAR(pnd_thermal(2.0, 500).mean, 2.0, 1e-6);
  EXPECT_THROW(pnd_thermal(0.0, 5), std::invalid_argument);
}

TEST(PndZeta, Values) {
  const auto d = pnd_zeta(2.0, 10);
  EXPECT_NEAR(d.probs[0], 0.25, 1e-15);
  EXPECT_NEAR(d.probs[1], 0.25, 1e-15);
  EXPECT_NEAR(d.probs[2], 3.0 / 16.0, 1e-15);
  EXPECT_NEAR(pnd_zeta(2.60, 500).total(), 1.0, 1e-9);
  EXPECT_NEAR(pnd_zeta(4.88, 500).mean, 4.88, 1e-6);
  EXPECT_THROW(pnd_zeta(-1.0, 5), std::invalid_argument);
}

TEST(PndFromLaw, MatchesClosedForms) {
  const auto th = pnd_from_intensity_law(IntensityLaw::exponential(3.85), 100);
  const auto th_ref = pnd_thermal(3.85, 100);
  const auto z = pnd_from_intensity_law(IntensityLaw::gamma_two(2.0 / 4.88), 100);
  const auto z_ref = pnd_zeta(4.88, 100);
  for (std::size_t n = 0; n <= 100; ++n) {
    ASSERT_NEAR(th.probs[n], th_ref.probs[n], 1e-8) << n;
    ASSERT_NEAR(z.probs[n], z_ref.probs[n], 1e-8) << n;
  }
}

TEST(PndFromLaw, DegenerateIsPoisson) {
  const auto d = pnd_from_intensity_law(IntensityLaw::degenerate(42.0), 120);
  EXPECT_NEAR(d.mean, 42.0, 1e-9);
  EXPECT_NEAR(d.probs[42], std::exp(42 * std::log(42.0) - 42 - std::lgamma(43.0)), 1e-15);
}

TEST(PndFromLaw, TabulatedMixture) {
  // Uniform density on [0, 2]: p(n) = (1 - Q(n+1, 2)) / 2 by direct summation.
  const auto d = pnd_from_intensity_law(IntensityLaw::tabulated({0.0, 2.0}, {1.0, 1.0}), 20);
  for (std::size_t n = 0; n <= 20; ++n) {
    double tail = 0.0;  // P(Poisson(2) <= n)
    for (std::size_t k = 0; k <= n; ++k) tail += std::exp(k * std::log(2.0) - 2.0 - std::lgamma(k + 1.0));
    EXPECT_NEAR(d.probs[n], 0.5 * (1.0 - tail), 1e-10) << n;
  }
}

TEST(AddPhoton, VacuumTermVanishes) {
  EXPECT_EQ(add_photon(pnd_thermal(1.3, 50)).probs[0], 0.0);
  EXPECT_EQ(add_photon(pnd_zeta(0.4, 50)).probs[0], 0.0);
}

TEST(AddPhoton, ThermalMeanAndFockOracle) {
  const auto base = pnd_thermal(1.0, 60);
  const auto added = add_photon(base);
  const auto oracle = conjugate_by_creation(base.probs);
  ASSERT_EQ(added.probs.size(), oracle.size());
  for (std::size_t m = 0; m < oracle.size(); ++m) EXPECT_NEAR(added.probs[m], oracle[m], 1e-14);
  EXPECT_NEAR(added.mean, 3.0, 1e-6);
  EXPECT_NEAR(photon_added_pnd({BaseState::Thermal, 1.0, 1}).mean, 3.0, 1e-9);
}

TEST(AddPhoton, MeanAfterAdditionAndInverse) {
  for (const BaseState base : {BaseState::Thermal, BaseState::Zeta}) {
    for (double nb : {0.2, 1.0, 4.0}) {
      const double m = photon_added_pnd({base, nb, 1}).mean;
      EXPECT_NEAR(added_mean(base, nb), m, 1e-8);
      EXPECT_NEAR(base_nbar_for_added_mean(base, m), nb, 1e-8);
    }
  }
  EXPECT_THROW(base_nbar_for_added_mean(BaseState::Zeta, 1.0), std::invalid_argument);
}

TEST(AddPhoton, FockState) {
  std::vector<double> p(6, 0.0);
  p[5] = 1.0;
  const auto out = add_photon(make_distribution(p, DistributionSource::Analytic));
  EXPECT_NEAR(out.probs[6], 1.0, 1e-15);
  EXPECT_THROW(add_photon(make_distribution({0.0, 0.0}, DistributionSource::Analytic)),
               std::invalid_argument);
}

TEST(PFunction, ThermalAtOriginAndCrossing) {
  for (double nb : {0.3, 1.0, 2.5}) {
    const PhotonAddedState s{BaseState::Thermal, nb, 1};
    EXPECT_NEAR(p_function_added(s, 0.0), -1.0 / (kPi * nb * nb), 1e-12);
    EXPECT_NEAR(p_function_added(s, nb / (1 + nb)), 0.0, 1e-15);
    EXPECT_LT(p_function_added(s, 0.99 * nb / (1 + nb)), 0.0);
    EXPECT_GT(p_function_added(s, 1.01 * nb / (1 + nb)), 0.0);
  }
}

TEST(PFunction, ZetaNegativeExactlyBetweenRoots) {
  for (double nb : {0.5, 1.0, 3.0}) {
    const PhotonAddedState s{BaseState::Zeta, nb, 1};
    const double lo = nb * (3 - std::sqrt(5.0)) / (2 * (nb + 2));
    const double hi = nb * (3 + std::sqrt(5.0)) / (2 * (nb + 2));
    const auto [a, b] = p_function_negative_interval(s);
    EXPECT_NEAR(a, lo, 1e-15);
    EXPECT_NEAR(b, hi, 1e-15);
    for (int i = 0; i <= 4000; ++i) {
      const double x = 3.0 * hi * i / 4000.0;
      if (std::abs(x - lo) < 1e-9 || std::abs(x - hi) < 1e-9) continue;
      ASSERT_EQ(p_function_added(s, x) < 0.0, x > lo && x < hi) << "x=" << x;
    }
  }
}

TEST(PFunction, NormalizedUnderIntensityConvention) {
  for (const BaseState base : {BaseState::Thermal, BaseState::Zeta}) {
    for (double nb : {0.5, 1.0, 2.0}) {
      const PhotonAddedState s{base, nb, 1};
      const double mass = simpson([&](double x) { return kPi * p_function_added(s, x); }, 0.0,
                                  80.0 * nb, 400000);
      EXPECT_NEAR(mass, 1.0, 1e-8);
    }
  }
}

TEST(PFunction, RequiresOneAddedPhoton) {
  EXPECT_THROW(p_function_added({BaseState::Thermal, 1.0, 0}, 0.5), std::invalid_argument);
  EXPECT_THROW(p_function_added({BaseState::Thermal, 1.0, 2}, 0.5), std::invalid_argument);
  EXPECT_THROW(p_function_added({BaseState::Thermal, 1.0, 1}, -0.5), std::invalid_argument);
  EXPECT_THROW(p_function_added({BaseState::Zeta, 0.0, 1}, 0.5), std::invalid_argument);
}

TEST(PhotonAddedPnd, TwoRoutesAgree) {
  for (const BaseState base : {BaseState::Thermal, BaseState::Zeta}) {
    for (double nb : {0.3, 1.0, 2.5}) {
      const auto direct = pnd_photon_added_quadrature({base, nb, 1}, 80);
      const auto via_add = add_photon(base_pnd(base, nb, 400));
      for (std::size_t n = 0; n <= 80; ++n) ASSERT_NEAR(direct.probs[n], via_add.probs[n], 1e-6);
    }
  }
}

TEST(PhotonAddedPnd, TailCertificate) {
  for (double nb : {0.1, 1.0, 20.0}) {
    const auto d = photon_added_pnd({BaseState::Zeta, nb, 1});
    EXPECT_GT(d.total(), 1.0 - kTailMass);
    EXPECT_GE(d.probs.size(), static_cast<std::size_t>(50 * nb + 100));
  }
  const auto base_only = photon_added_pnd({BaseState::Thermal, 1.5, 0});
  EXPECT_NEAR(base_only.mean, 1.5, 1e-8);
}

TEST(MandelQCurve, ThermalMatchesClosedForm) {
  const auto curve = mandel_q_curve(BaseState::Thermal, {0.2, 0.5, 1.0, 2.0, 5.0});
  for (const auto& [nb, q] : curve) {
    EXPECT_NEAR(q, (2 * nb * nb - 1) / (2 * nb + 1), 1e-6) << nb;
    EXPECT_NEAR(q, mandel_q_added_thermal(nb), 1e-6);
  }
  EXPECT_THROW(mandel_q_curve(BaseState::Thermal, {0.0}), std::invalid_argument);
}

TEST(MandelQCurve, KeyPoints) {
  const double q_cross = mandel_q_curve(BaseState::Thermal, {1.0 / std::sqrt(2.0)})[0].second;
  EXPECT_NEAR(q_cross, 0.0, 1e-6);
  EXPECT_NEAR(mandel_q_curve(BaseState::Thermal, {1.0})[0].second, 1.0 / 3.0, 1e-9);
  EXPECT_LT(mandel_q_curve(BaseState::Zeta, {1.0})[0].second, 0.0);
  std::vector<double> grid;
  for (int i = 0; i <= 18; ++i) grid.push_back(0.1 + 0.05 * i);
  const auto qz = mandel_q_curve(BaseState::Zeta, grid);
  const auto qt = mandel_q_curve(BaseState::Thermal, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_LT(qz[i].second, qt[i].second) << grid[i];
}

TEST(Entanglement, Criterion) {
  EXPECT_FALSE(entanglement_criterion(0.0, {0.0}));
  EXPECT_TRUE(entanglement_criterion(1.0, {1.2}));
  EXPECT_FALSE(entanglement_criterion(1.0, {1.0}));
  EXPECT_NEAR(entanglement_boundary(1.0), std::log(3.0), 1e-15);
  EXPECT_THROW(entanglement_criterion(-1.0, {1.0}), std::invalid_argument);
  EXPECT_THROW(entanglement_criterion(1.0, {-1.0}), std::invalid_argument);
}
