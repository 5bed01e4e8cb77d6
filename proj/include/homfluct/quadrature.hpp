#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace homfluct::quad {

/// Adaptive 31-point Gauss-Kronrod on [a, b]. Infinite limits are allowed.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-11,
                 unsigned max_depth = 25) {
  if (a == b) return 0.0;
  // Intervals a few ulps wide: adaptive refinement only chases rounding.
  if (std::isfinite(a) && std::isfinite(b) &&
      std::abs(b - a) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)))
    return (b - a) * f(0.5 * (a + b));
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, rel_tol, &err);
}

/// Integrate over consecutive pieces [breaks[i], breaks[i+1]].
///
/// The tolerance applies to the total: a coarse first pass estimates each piece,
/// and pieces that are small against the total get a looser relative target.
template <class F>
double integrate_pieces(F&& f, std::span<const double> breaks, double rel_tol = 1e-11,
                        unsigned max_depth = 25) {
  const std::size_t n = breaks.size() < 2 ? 0 : breaks.size() - 1;
  std::vector<double> rough(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rough[i] = integrate(f, breaks[i], breaks[i + 1], 1e-6, 4);
    scale += std::abs(rough[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::abs(rough[i]);
    const double tol = w > 0.0 ? std::min(1e-3, std::max(rel_tol, rel_tol * scale / (w * double(n))))
                               : 1e-3;
    total += integrate(f, breaks[i], breaks[i + 1], tol, max_depth);
  }
  return total;
}

/// Break points for a radial integrand on [0, r_max] with features at `scales`.
///
/// Each scale contributes a geometric ladder (scale/64 .. 64*scale) so that
/// sharp peaks such as (λ + r²/2)^-2 near r ~ √λ are resolved.
inline std::vector<double> radial_breaks(double r_max, std::span<const double> scales) {
  std::vector<double> b{0.0, r_max};
  for (double s : scales) {
    if (!(s > 0.0)) continue;
    for (double f = 1.0 / 64.0; f <= 64.0; f *= 2.0) {
      const double p = s * f;
      if (p < r_max) b.push_back(p);
    }
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

/// Composite Gauss-Legendre nodes and weights on [a, b].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Rule gauss_legendre(double a, double b, int panels) {
  using G = boost::math::quadrature::gauss<double, 20>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  Rule r;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double half = 0.5 * h;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) {
        r.nodes.push_back(mid);
        r.weights.push_back(w[i] * half);
        continue;
      }
      r.nodes.push_back(mid - half * x[i]);
      r.weights.push_back(w[i] * half);
      r.nodes.push_back(mid + half * x[i]);
      r.weights.push_back(w[i] * half);
    }
  }
  return r;
}

}  // namespace homfluct::quad
