#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tlight {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureOptions {
  double abs_tol = 1e-12;
  int max_depth = 40;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Returns (kronrod estimate, |kronrod - gauss|).
template <class F>
std::pair<double, double> gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double fsum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * fsum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * fsum;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

template <class F>
double adaptive(F& f, double a, double b, double whole, double err, double tol, int depth,
                int max_depth) {
  if (err <= tol || b - a <= 0.0) return whole;
  if (depth >= max_depth) {
    throw QuadratureError("adaptive quadrature did not converge on [" + std::to_string(a) +
                          ", " + std::to_string(b) + "]");
  }
  const double mid = 0.5 * (a + b);
  const auto [left, left_err] = gk15(f, a, mid);
  const auto [right, right_err] = gk15(f, mid, b);
  // Each half receives half of the absolute budget.
  return adaptive(f, a, mid, left, left_err, 0.5 * tol, depth + 1, max_depth) +
         adaptive(f, mid, b, right, right_err, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) integration of f over [a, b] to an absolute
/// tolerance. Panels are bisected until the Gauss/Kronrod difference on each
/// falls below its share of the budget.
template <class F>
double integrate(F&& f, double a, double b, QuadratureOptions opts = {}) {
  if (!(b > a)) return 0.0;
  auto [whole, err] = detail::gk15(f, a, b);
  // The budget cannot go below what double rounding of the total allows.
  const double tol = std::max(opts.abs_tol, 1e-15 * std::abs(whole));
  return detail::adaptive(f, a, b, whole, err, tol, 0, opts.max_depth);
}

/// Integral over [a, b] split at the given interior breakpoints.
template <class F>
double integrate(F&& f, const std::vector<double>& breakpoints, QuadratureOptions opts = {}) {
  double total = 0.0;
  if (breakpoints.size() < 2) return total;
  const auto panels = static_cast<double>(breakpoints.size() - 1);
  QuadratureOptions per_panel = opts;
  per_panel.abs_tol = opts.abs_tol / panels;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    total += integrate(f, breakpoints[i], breakpoints[i + 1], per_panel);
  }
  return total;
}

}  // namespace tlight
