// Randomized invariant checks. Each property draws its cases from a small
// generator seeded with a fixed value, so failures are reproducible by case
// index.

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tlight/tlight.hpp"

using namespace tlight;

namespace {

constexpr double kPi = std::numbers::pi;

struct Gen {
  Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double real(double lo, double hi) { return rng.uniform(lo, hi); }
  double log_real(double lo, double hi) { return std::exp(real(std::log(lo), std::log(hi))); }
  std::size_t count(std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); }

  DwellDistribution dwell() {
    const double tc = log_real(1e-3, 30e-3);
    switch (rng.index(3)) {
      case 0:
        return DwellDistribution::constant(tc);
      case 1:
        return DwellDistribution::exponential(tc);
      default: {
        const double lo = log_real(1e-4, 5e-3);
        return DwellDistribution::truncated_exponential(tc, lo, lo * log_real(2.0, 200.0));
      }
    }
  }

  IntensityLaw law() {
    const double nbar = log_real(0.1, 20.0);
    switch (rng.index(4)) {
      case 0:
        return IntensityLaw::degenerate(nbar);
      case 1:
        return IntensityLaw::exponential(nbar);
      case 2:
        return IntensityLaw::gamma_two_with_mean(nbar);
      default: {
        std::vector<double> x{0.0}, f{real(0.0, 1.0)};
        const std::size_t n = count(2, 8);
        for (std::size_t i = 0; i < n; ++i) {
          x.push_back(x.back() + log_real(0.1, 3.0));
          f.push_back(real(0.0, 1.0));
        }
        f[1] += 0.1;
        return IntensityLaw::tabulated(x, f);
      }
    }
  }

  ModulationTrace phase_trace(double duration) {
    const bool frozen = rng.index(5) == 0;
    return build_phase_trace(dwell(),
                             frozen ? PhaseJumpLaw::frozen(real(-3.0, 3.0))
                                    : PhaseJumpLaw::uniform_full_circle(),
                             duration, rng.engine()());
  }
};

constexpr int kCases = 40;

}  // namespace

TEST(Property, TransferMatrixUnitaryAndPortsSumToOne) {
  Gen g(1);
  for (int c = 0; c < 2000; ++c) {
    const double a = g.real(-10, 10), b = g.real(-10, 10);
    const Matrix2 m = transfer_matrix(a, b);
    const Matrix2 p = multiply(m, adjoint(m));
    ASSERT_NEAR(std::abs(p[0][0] - 1.0) + std::abs(p[1][1] - 1.0) + std::abs(p[0][1]) +
                    std::abs(p[1][0]),
                0.0, 1e-12)
        << c;
    const auto f = port_fractions(a, b);
    ASSERT_NEAR(f[0] + f[1], 1.0, 1e-12) << c;
  }
}

TEST(Property, MziEnergyConservation) {
  Gen g(2);
  for (int c = 0; c < kCases; ++c) {
    const double duration = g.real(0.2, 2.0);
    const auto p1 = g.phase_trace(duration), p2 = g.phase_trace(duration);
    MziConfig cfg;
    cfg.input_intensity = g.log_real(0.01, 100.0);
    cfg.port = OutputPort::Port1Prime;
    const auto o1 = mzi_output_intensity(p1, p2, cfg);
    cfg.port = OutputPort::Port2Prime;
    const auto o2 = mzi_output_intensity(p1, p2, cfg);
    ASSERT_EQ(o1.size(), o2.size());
    for (std::size_t i = 0; i < o1.size(); ++i) {
      ASSERT_NEAR(o1.segments()[i].value + o2.segments()[i].value, cfg.input_intensity,
                  1e-12 * cfg.input_intensity)
          << c;
    }
    ASSERT_LE(o2.size(), p1.size() + p2.size());
  }
}

TEST(Property, TraceInvariants) {
  Gen g(3);
  for (int c = 0; c < kCases; ++c) {
    const double duration = g.real(0.05, 3.0);
    const double grid = g.rng.index(2) ? 30e-6 * static_cast<double>(g.count(1, 15)) : 0.0;
    const auto dwell = g.dwell();
    const std::uint64_t seed = g.rng.engine()();

    const auto phase = build_phase_trace(dwell, PhaseJumpLaw::uniform_full_circle(), duration,
                                         seed, grid);
    ASSERT_EQ(phase.segments().front().start, 0.0);
    for (std::size_t i = 0; i < phase.size(); ++i) {
      const auto& s = phase.segments()[i];
      ASSERT_GT(s.value, -kPi);
      ASSERT_LE(s.value, kPi);
      ASSERT_LT(s.start, duration);
      if (i > 0) ASSERT_GT(s.start, phase.segments()[i - 1].start);
      if (grid > 0.0) {
        const double steps = s.start / grid;
        ASSERT_NEAR(steps, std::round(steps), 1e-6) << c << " segment " << i;
      }
    }

    const auto law = g.law();
    const auto built = build_intensity_trace(law, dwell, duration, seed, grid);
    // Same seed, same dwell stream: both traces share their boundaries.
    ASSERT_EQ(built.trace.size(), phase.size());
    std::size_t at_cap = 0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < built.trace.size(); ++i) {
      const auto& s = built.trace.segments()[i];
      ASSERT_EQ(s.start, phase.segments()[i].start);
      ASSERT_GE(s.value, 0.0);
      ASSERT_LE(s.value, law.i_max());
      if (s.value == law.i_max()) ++at_cap;
      weighted += s.value * (built.trace.segment_end(i) - s.start);
    }
    ASSERT_LE(built.clipped_segments, at_cap);
    ASSERT_NEAR(built.trace.time_average(), weighted / duration, 1e-12 * (1.0 + law.i_max()));
  }
}

TEST(Property, ThinningConservesCounts) {
  Gen g(4);
  for (int c = 0; c < kCases; ++c) {
    BinnedCounts in{30e-6, std::vector<std::uint32_t>(g.count(1, 5000)), 0.0};
    const double mean = g.log_real(0.01, 50.0);
    for (auto& n : in.counts) n = g.rng.poisson(mean);
    const auto [a, b] = split_stream(in, g.rng.engine()());
    for (std::size_t i = 0; i < in.size(); ++i) ASSERT_EQ(a.counts[i] + b.counts[i], in.counts[i]);
  }
}

TEST(Property, PndHistogramIsNormalized) {
  Gen g(5);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t factor = g.count(1, 20);
    BinnedCounts in{30e-6, std::vector<std::uint32_t>(factor * g.count(1, 3000)), 0.0};
    const double mean = g.log_real(0.001, 10.0);
    for (auto& n : in.counts) n = g.rng.poisson(mean);
    const auto d = pnd_histogram(in, 30e-6 * static_cast<double>(factor));
    ASSERT_DOUBLE_EQ(d.total(), 1.0) << c;
    for (double p : d.probs) ASSERT_GE(p, 0.0);
    ASSERT_GT(d.probs.back(), 0.0);
  }
}

TEST(Property, IntensityLawsNormalizedAndSamplersMatchCdf) {
  Gen g(6);
  for (int c = 0; c < kCases; ++c) {
    const IntensityLaw law = g.law();
    if (law.kind() == IntensityKind::Degenerate) continue;
    const double mass = tlight::testing::simpson([&](double x) { return law.density(x); }, 0.0,
                                                 law.support_upper(), 100000);
    ASSERT_NEAR(mass, 1.0, 1e-6) << c;
    Rng rng(static_cast<std::uint64_t>(c));
    std::vector<double> xs(20000);
    for (auto& x : xs) x = law.sample(rng);
    // 20000 draws: the 0.1% KS critical value is about 0.0138.
    ASSERT_LT(tlight::testing::ks_statistic(xs, [&](double x) { return law.cdf(x); }), 0.0138)
        << c;
  }
}

TEST(Property, XiIsMonotoneWithUnitStart) {
  Gen g(7);
  for (int c = 0; c < kCases; ++c) {
    const auto a = g.dwell(), b = g.dwell();
    const bool freeze = g.rng.index(3) == 0;
    const ArmDwell arm2 = freeze ? ArmDwell{} : ArmDwell{b};
    ASSERT_NEAR(xi_overlap(a, arm2, 0.0), 1.0, 1e-12) << c;
    double prev = 1.0;
    for (double tau = 1e-5; tau < 1.0; tau *= 1.25) {
      const double x = xi_overlap(a, arm2, tau);
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, prev + 1e-12) << c << " tau=" << tau;
      prev = x;
    }
    ASSERT_LT(xi_overlap(a, arm2, 10.0), 1e-12) << c;
  }
}

TEST(Property, TheoryPndsNormalizedAndConsistent) {
  Gen g(8);
  for (int c = 0; c < 15; ++c) {
    const double nb = g.log_real(0.05, 8.0);
    const std::size_t n_max = static_cast<std::size_t>(60 * nb + 80);
    const auto th = pnd_thermal(nb, n_max);
    const auto z = pnd_zeta(nb, n_max);
    ASSERT_NEAR(th.total(), 1.0, 1e-9);
    ASSERT_NEAR(z.total(), 1.0, 1e-9);
    ASSERT_NEAR(th.mean, nb, 1e-6);
    ASSERT_NEAR(z.mean, nb, 1e-6);
    const auto th_q = pnd_from_intensity_law(IntensityLaw::exponential(nb, 1e9), 40);
    const auto z_q = pnd_from_intensity_law(IntensityLaw::gamma_two_with_mean(nb, 1e9), 40);
    for (std::size_t n = 0; n <= 40; ++n) {
      ASSERT_NEAR(th_q.probs[n], th.probs[n], 1e-8) << c << " n=" << n;
      ASSERT_NEAR(z_q.probs[n], z.probs[n], 1e-8) << c << " n=" << n;
    }
  }
}

TEST(Property, PhotonAdditionInvariants) {
  Gen g(9);
  for (int c = 0; c < kCases; ++c) {
    const BaseState base = g.rng.index(2) ? BaseState::Thermal : BaseState::Zeta;
    const double nb = g.log_real(0.05, 5.0);
    const auto added = photon_added_pnd({base, nb, 1});
    ASSERT_EQ(added.probs[0], 0.0);
    ASSERT_NEAR(added.total(), 1.0, kTailMass);
    ASSERT_NEAR(added.mean, added_mean(base, nb), 1e-8);
    const auto [lo, hi] = p_function_negative_interval({base, nb, 1});
    ASSERT_LT(p_function_added({base, nb, 1}, 0.5 * (lo + hi)), 0.0);
    ASSERT_GT(p_function_added({base, nb, 1}, hi * 1.5 + 1e-3), 0.0);
  }
}

TEST(Property, EstimatorsAgreeWithBruteForce) {
  Gen g(10);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = g.count(200, 3000);
    const std::size_t max_k = g.count(0, 40);
    std::vector<double> s(n);
    const double scale = g.log_real(0.1, 10.0);
    for (auto& x : s) x = g.rng.exponential(scale);
    const auto curve = g2_from_samples(s, 1e-3, static_cast<double>(max_k) * 1e-3);
    const auto oracle = tlight::testing::naive_g2(s, s, max_k);
    ASSERT_EQ(curve.size(), max_k + 1);
    for (std::size_t k = 0; k <= max_k; ++k) ASSERT_NEAR(curve.values[k], oracle[k], 1e-10) << c;

    BinnedCounts cnt{30e-6, std::vector<std::uint32_t>(n), 0.0};
    const double mean = g.log_real(0.002, 3.0);
    for (auto& x : cnt.counts) x = g.rng.poisson(mean);
    if (cnt.total() < 2) continue;
    const auto a = g2_auto(cnt, static_cast<double>(max_k) * 30e-6);
    std::vector<double> as(cnt.counts.begin(), cnt.counts.end());
    const auto naive = tlight::testing::naive_g2(as, as, max_k);
    double fact = 0.0, sum = 0.0;
    for (double x : as) {
      fact += x * (x - 1);
      sum += x;
    }
    const double m = sum / static_cast<double>(n);
    ASSERT_NEAR(a.values[0], fact / static_cast<double>(n) / (m * m), 1e-10) << c;
    for (std::size_t k = 1; k <= max_k; ++k) {
      if (std::isfinite(naive[k])) ASSERT_NEAR(a.values[k], naive[k], 1e-10) << c << " k=" << k;
    }
  }
}

TEST(Property, SeedDeterminismAcrossPipeline) {
  Gen g(11);
  for (int c = 0; c < 10; ++c) {
    const auto law = g.law();
    const auto dwell = g.dwell();
    const std::uint64_t seed = g.rng.engine()();
    const auto t1 = build_intensity_trace(law, dwell, 0.5, seed).trace;
    const auto t2 = build_intensity_trace(law, dwell, 0.5, seed).trace;
    const auto c1 = simulate_counts(t1, DetectorParams{}, 0.5, seed).counts.counts;
    const auto c2 = simulate_counts(t2, DetectorParams{}, 0.5, seed).counts.counts;
    ASSERT_EQ(c1, c2) << c;
  }
}
