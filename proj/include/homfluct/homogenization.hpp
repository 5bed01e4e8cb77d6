#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mc_estimate.hpp"
#include "rng.hpp"
#include "spectrum.hpp"

namespace homfluct {

/// Initial data f: a constant or an isotropic Gaussian bump.
struct InitialCondition {
  enum class Kind { constant, gaussian_bump };
  Kind kind = Kind::constant;
  double value = 1.0;           // constant
  std::vector<double> center;   // gaussian_bump
  double width = 1.0;
  double height = 1.0;

  static InitialCondition constant(double v) {
    InitialCondition f;
    f.value = v;
    return f;
  }

  static InitialCondition gaussian_bump(std::vector<double> center, double width, double height) {
    if (!(width > 0.0)) throw std::invalid_argument("initial condition: width must be > 0");
    InitialCondition f;
    f.kind = Kind::gaussian_bump;
    f.center = std::move(center);
    f.width = width;
    f.height = height;
    return f;
  }

  double dist2(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double c = k < center.size() ? center[k] : 0.0;
      s += (x[k] - c) * (x[k] - c);
    }
    return s;
  }

  double operator()(std::span<const double> x) const {
    if (kind == Kind::constant) return value;
    return height * std::exp(-0.5 * dist2(x) / (width * width));
  }

  /// ∂_k f(x).
  double partial(std::span<const double> x, std::size_t k) const {
    if (kind == Kind::constant) return 0.0;
    const double c = k < center.size() ? center[k] : 0.0;
    return -(x[k] - c) / (width * width) * (*this)(x);
  }

  /// sup |f|.
  double sup() const { return kind == Kind::constant ? std::abs(value) : std::abs(height); }

  /// (q_t ⋆ f)(x) with q_t the heat kernel of ½Δ.
  double heat(double t, std::span<const double> x) const {
    if (kind == Kind::constant) return value;
    const double w2 = width * width;
    const double d = double(x.size());
    return height * std::pow(w2 / (w2 + t), 0.5 * d) * std::exp(-0.5 * dist2(x) / (w2 + t));
  }
};

/// σ² = 4(2π)^{−d} ∫ R̂(ξ)/|ξ|² dξ.
inline double sigma2(const SpectrumModel& spec) {
  if (spec.dimension() < 3)
    throw std::invalid_argument("sigma2: needs d >= 3 for |xi|^-2 to be integrable");
  return 4.0 * spec.radial_integral([](double k) { return 1.0 / (k * k); }, {}, 1e-12);
}

struct HomogenizedModel {
  double sigma2 = 0.0;
  int dimension = 3;
  InitialCondition initial;

  HomogenizedModel() = default;
  HomogenizedModel(const SpectrumModel& spec, InitialCondition f)
      : sigma2(homfluct::sigma2(spec)), dimension(spec.dimension()), initial(std::move(f)) {}
  HomogenizedModel(double s2, int d, InitialCondition f)
      : sigma2(s2), dimension(d), initial(std::move(f)) {}
};

/// u_hom(t, x) = e^{−σ²t/2} (q_t ⋆ f)(x).
inline double u_hom(const HomogenizedModel& m, double t, std::span<const double> x) {
  if (t < 0.0) throw std::invalid_argument("u_hom: t must be >= 0");
  if (t == 0.0) return m.initial(x);
  return std::exp(-0.5 * m.sigma2 * t) * m.initial.heat(t, x);
}

/// Monte Carlo of E_W{f(x + W_t)} e^{−σ²t/2}.
inline MCEstimate u_hom_mc_check(const HomogenizedModel& m, double t, std::span<const double> x,
                                 std::size_t N, std::uint64_t seed) {
  if (N == 0) throw std::invalid_argument("u_hom_mc_check: N must be >= 1");
  const std::size_t d = x.size();
  const double damp = std::exp(-0.5 * m.sigma2 * t);
  const double sd = std::sqrt(t);
  MCEstimate est;
  std::vector<double> y(d);
  Rng rng(derive_seed(seed, StreamTag::path, {}));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < d; ++k) y[k] = x[k] + sd * rng.normal();
    est.add(m.initial(y) * damp);
  }
  return est;
}

namespace detail {
inline double green_nu(int d) { return 0.5 * d - 1.0; }
}  // namespace detail

/// Radial Green's function of λ − ½Δ in R^d: 2(2π)^{−d/2} (a/r)^ν K_ν(ar), a = √(2λ).
inline double green_lambda_radial(double r, double lambda, int d) {
  if (!(r > 0.0)) throw std::invalid_argument("green_lambda: x = 0 is the singular point");
  if (!(lambda > 0.0)) throw std::invalid_argument("green_lambda: lambda must be > 0");
  const double a = std::sqrt(2.0 * lambda);
  const double z = a * r;
  if (d == 3) return std::exp(-z) / (2.0 * std::numbers::pi * r);
  if (z > 700.0) return 0.0;
  const double nu = detail::green_nu(d);
  return 2.0 * std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(a / r, nu) *
         std::cyl_bessel_k(nu, z);
}

inline double green_lambda(std::span<const double> x, double lambda, int d) {
  return green_lambda_radial(norm(x), lambda, d);
}

/// dG_λ/dr.
inline double green_lambda_prime(double r, double lambda, int d) {
  const double a = std::sqrt(2.0 * lambda);
  const double z = a * r;
  if (d == 3) return -std::exp(-z) * (1.0 + z) / (2.0 * std::numbers::pi * r * r);
  if (z > 700.0) return 0.0;
  const double nu = detail::green_nu(d);
  return -2.0 * std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(a, 2.0 * nu + 1.0) *
         std::pow(z, -nu) * std::cyl_bessel_k(nu + 1.0, z);
}

/// Spherical mean of the regular radial solution of (λ − ½Δ)u = 0:
/// Γ(ν+1)(2/(as))^ν I_ν(as), equal to 1 at s = 0.
inline double green_regular_mean(double s, double lambda, int d) {
  const double z = std::sqrt(2.0 * lambda) * s;
  const double nu = detail::green_nu(d);
  if (z < 1e-4) return 1.0 + z * z / (4.0 * (nu + 1.0));
  if (d == 3) return std::sinh(z) / z;
  return std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * std::cyl_bessel_i(nu, z);
}

inline double green_regular_mean_prime(double s, double lambda, int d) {
  const double a = std::sqrt(2.0 * lambda);
  const double z = a * s;
  const double nu = detail::green_nu(d);
  if (z < 1e-4) return a * z / (2.0 * (nu + 1.0));
  return std::tgamma(nu + 1.0) * std::pow(2.0, nu) * a * std::pow(z, -nu) *
         std::cyl_bessel_i(nu + 1.0, z);
}

}  // namespace homfluct
