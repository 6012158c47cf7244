#pragma once

// Mach-Zehnder interferometer with an AOM in each arm.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tlight/modulation.hpp"

namespace tlight {

using Complex = std::complex<double>;
using Matrix2 = std::array<std::array<Complex, 2>, 2>;

inline Matrix2 multiply(const Matrix2& a, const Matrix2& b) noexcept {
  Matrix2 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return out;
}

inline Matrix2 adjoint(const Matrix2& a) noexcept {
  return {{{std::conj(a[0][0]), std::conj(a[1][0])}, {std::conj(a[0][1]), std::conj(a[1][1])}}};
}

/// 50:50 beamsplitter (1/sqrt2) [[1, 1], [-1, 1]].
inline Matrix2 beamsplitter() noexcept {
  const double r = 1.0 / std::numbers::sqrt2;
  return {{{Complex(r), Complex(r)}, {Complex(-r), Complex(r)}}};
}

/// Phases imparted by the two AOMs.
inline Matrix2 phase_matrix(double phi1, double phi2) noexcept {
  return {{{std::polar(1.0, phi1), Complex(0.0)}, {Complex(0.0), std::polar(1.0, phi2)}}};
}

/// Interferometer transfer matrix B * Phi * B.
inline Matrix2 transfer_matrix(double phi1, double phi2) noexcept {
  const Matrix2 b = beamsplitter();
  return multiply(b, multiply(phase_matrix(phi1, phi2), b));
}

enum class OutputPort { Port1Prime, Port2Prime };

struct MziConfig {
  /// Input intensity, expected photons per PND bin.
  double input_intensity = 1.0;
  OutputPort port = OutputPort::Port2Prime;
  /// Optional slow drift of the phase difference, rad/s. Zero means matched
  /// dynamical paths.
  double phase_drift_rate = 0.0;
  /// Largest phase change allowed within one output segment when drifting.
  double drift_step = 0.01;

  void validate() const {
    if (!(input_intensity > 0.0) || !std::isfinite(input_intensity)) {
      throw std::invalid_argument("MZI input intensity must be > 0");
    }
    if (!std::isfinite(phase_drift_rate)) throw std::invalid_argument("drift rate must be finite");
    if (!(drift_step > 0.0)) throw std::invalid_argument("drift step must be > 0");
  }
};

/// Intensity fractions (|E1'|^2, |E2'|^2) for light entering port 1 only.
inline std::array<double, 2> port_fractions(double phi1, double phi2) noexcept {
  const Matrix2 m = transfer_matrix(phi1, phi2);
  return {std::norm(m[0][0]), std::norm(m[1][0])};
}

/// Output intensity trace at the configured port. Boundaries are the union of
/// the two input boundary sets (refined further only when drift is enabled).
inline ModulationTrace mzi_output_intensity(const ModulationTrace& phase1,
                                            const ModulationTrace& phase2, const MziConfig& cfg) {
  cfg.validate();
  if (phase1.kind() != TraceKind::Phase || phase2.kind() != TraceKind::Phase) {
    throw std::invalid_argument("mzi_output_intensity requires phase traces");
  }
  const double duration = phase1.duration();
  if (std::abs(duration - phase2.duration()) > kTimeSlack * duration) {
    throw std::invalid_argument("phase traces have different durations");
  }

  const auto& s1 = phase1.segments();
  const auto& s2 = phase2.segments();
  const int port = cfg.port == OutputPort::Port1Prime ? 0 : 1;

  std::vector<Segment> out;
  out.reserve(s1.size() + s2.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double t = 0.0;
  while (t < duration) {
    const double phi1 = s1[i].value;
    const double phi2 = s2[j].value;
    const double end1 = phase1.segment_end(i);
    const double end2 = phase2.segment_end(j);
    const double end = std::min(end1, end2);

    if (cfg.phase_drift_rate == 0.0) {
      out.push_back({t, cfg.input_intensity * port_fractions(phi1, phi2)[port]});
    } else {
      const double piece = cfg.drift_step / std::abs(cfg.phase_drift_rate);
      for (double u = t; u < end; u += piece) {
        const double mid = 0.5 * (u + std::min(u + piece, end));
        out.push_back({u, cfg.input_intensity *
                              port_fractions(phi1 + cfg.phase_drift_rate * mid, phi2)[port]});
      }
    }

    if (end1 <= end) ++i;
    if (end2 <= end) ++j;
    t = end;
    if (i >= s1.size() || j >= s2.size()) break;
  }
  return ModulationTrace(TraceKind::Intensity, std::move(out), duration);
}

}  // namespace tlight
