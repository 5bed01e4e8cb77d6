#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "quadrature.hpp"

namespace homfluct {

inline double sphere_area(int d) {
  // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

inline double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

/// Radial Fourier kernel Γ(ν+1)(2/z)^ν J_ν(z), ν = d/2 − 1, equal to the
/// average of e^{iz e·ω} over the unit sphere of R^d. Equals 1 at z = 0.
inline double sphere_average_kernel(int d, double z) {
  z = std::abs(z);
  const double nu = 0.5 * d - 1.0;
  if (z < 1e-3) {
    const double z2 = z * z;
    return 1.0 - z2 / (4.0 * (nu + 1.0)) + z2 * z2 / (32.0 * (nu + 1.0) * (nu + 2.0));
  }
  if (d == 3) return std::sin(z) / z;
  if (d == 5) return 3.0 * (std::sin(z) - z * std::cos(z)) / (z * z * z);
  return std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * std::cyl_bessel_j(nu, z);
}

/// Compactly supported bump φ(x) = c·exp(−1/(1−|x/r₀|²)) on |x| < r₀.
class ShapeFunction {
 public:
  ShapeFunction(int d, double r0, double c) : d_(d), r0_(r0), c_(c) {
    if (d < 1) throw std::invalid_argument("shape: dimension must be positive");
    if (!(r0 > 0.0) || !std::isfinite(r0)) throw std::invalid_argument("shape: r0 must be > 0");
    if (!std::isfinite(c)) throw std::invalid_argument("shape: scale must be finite");
    rule_ = quad::gauss_legendre(0.0, r0_, 48);
    mass_ = radial_moment([this](double s) { return profile(s); });
    l2_ = radial_moment([this](double s) {
      const double p = profile(s);
      return p * p;
    });
  }

  int dimension() const { return d_; }
  double radius() const { return r0_; }
  double scale() const { return c_; }

  double profile(double r) const {
    const double q = r / r0_;
    if (q >= 1.0) return 0.0;
    return c_ * std::exp(-1.0 / (1.0 - q * q));
  }

  double operator()(std::span<const double> x) const { return profile(norm(x)); }

  /// c_φ = ∫φ.
  double mass() const { return mass_; }
  /// ∫φ², the variance of the induced shot noise.
  double l2_norm_sq() const { return l2_; }

  /// φ̂(k) for |ξ| = k.
  double fourier(double k) const {
    return radial_moment([&](double s) { return profile(s) * sphere_average_kernel(d_, k * s); });
  }

  /// dφ̂/dk.
  double fourier_prime(double k) const {
    // d/dz Λ_ν(z) = −z/d · Λ_{ν+1}(z)
    return radial_moment([&](double s) {
      const double z = k * s;
      return -profile(s) * s * z / d_ * sphere_average_kernel(d_ + 2, z);
    });
  }

  /// |S^{d-1}| ∫₀^{r₀} g(s) s^{d−1} ds on the fixed Gauss-Legendre rule.
  template <class G>
  double radial_moment(G&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule_.nodes.size(); ++i) {
      const double s = rule_.nodes[i];
      acc += rule_.weights[i] * g(s) * std::pow(s, d_ - 1);
    }
    return sphere_area(d_) * acc;
  }

 private:
  int d_;
  double r0_;
  double c_;
  quad::Rule rule_;
  double mass_ = 0.0;
  double l2_ = 0.0;
};

enum class SpectrumFamily { gaussian_bump, poisson_induced };

inline std::string to_string(SpectrumFamily f) {
  return f == SpectrumFamily::gaussian_bump ? "gaussian_bump" : "poisson_induced";
}

/// Isotropic power spectrum R̂(ξ) = R̂(|ξ|).
class SpectrumModel {
 public:
  static SpectrumModel gaussian_bump(int d, double amplitude, double rho) {
    if (d < 1) throw std::invalid_argument("spectrum: dimension must be positive");
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
      throw std::invalid_argument("spectrum: amplitude must be finite and >= 0");
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("spectrum: width must be finite and > 0");
    SpectrumModel s;
    s.family_ = SpectrumFamily::gaussian_bump;
    s.d_ = d;
    s.amplitude_ = amplitude;
    s.rho_ = rho;
    return s;
  }

  /// R̂ = |φ̂|², the spectrum of the shot noise built from `shape`.
  static SpectrumModel poisson_induced(const ShapeFunction& shape) {
    if (shape.mass() == 0.0) throw std::invalid_argument("spectrum: shape has zero mass");
    SpectrumModel s;
    s.family_ = SpectrumFamily::poisson_induced;
    s.d_ = shape.dimension();
    s.amplitude_ = 1.0;
    s.rho_ = 1.0 / shape.radius();
    s.shape_ = std::make_shared<const ShapeFunction>(shape);
    s.table_ = std::make_shared<const Table>(*s.shape_);
    return s;
  }

  SpectrumFamily family() const { return family_; }
  int dimension() const { return d_; }
  /// Overall multiplier of R̂ (for poisson_induced: 1 unless rescaled).
  double amplitude() const { return amplitude_; }
  /// Characteristic frequency scale: ρ, or 1/r₀ for poisson_induced.
  double width() const { return rho_; }
  const ShapeFunction* shape() const { return shape_.get(); }

  SpectrumModel scaled(double c) const {
    if (!(c >= 0.0)) throw std::invalid_argument("spectrum: scale factor must be >= 0");
    SpectrumModel s = *this;
    s.amplitude_ *= c;
    return s;
  }

  /// R̂ at radius k = |ξ|.
  double density(double k) const {
    if (family_ == SpectrumFamily::gaussian_bump)
      return amplitude_ * std::exp(-0.5 * k * k / (rho_ * rho_));
    if (k >= table_->k_max) return 0.0;
    const double f = table_->phi_hat(k);
    return amplitude_ * f * f;
  }

  double operator()(std::span<const double> xi) const { return density(norm(xi)); }

  double at_origin() const { return density(0.0); }

  /// Radius beyond which R̂(k)k^{d−1} is negligible (< 1e-12 of its peak).
  double radial_cutoff() const {
    if (family_ == SpectrumFamily::gaussian_bump) return rho_ * (8.0 + std::sqrt(double(d_)));
    return table_->cutoff;
  }

  /// (2π)^{−d}|S^{d−1}| ∫₀^∞ R̂(k) g(k) k^{d−1} dk, with extra break points at `scales`.
  template <class G>
  double radial_integral(G&& g, std::span<const double> scales = {}, double rel_tol = 1e-12) const {
    if (amplitude_ == 0.0) return 0.0;
    std::vector<double> sc(scales.begin(), scales.end());
    sc.push_back(rho_);
    const double r_max = radial_cutoff();
    auto br = quad::radial_breaks(r_max, sc);
    const auto integrand = [&](double k) {
      return density(k) * g(k) * std::pow(k, d_ - 1);
    };
    const double pref = sphere_area(d_) / std::pow(2.0 * std::numbers::pi, d_);
    return pref * quad::integrate_pieces(integrand, br, rel_tol);
  }

  /// ∫R̂(ξ) dξ.
  double total_mass() const {
    if (family_ == SpectrumFamily::gaussian_bump)
      return amplitude_ * std::pow(2.0 * std::numbers::pi * rho_ * rho_, 0.5 * d_);
    return std::pow(2.0 * std::numbers::pi, d_) * radial_integral([](double) { return 1.0; });
  }

  /// Quantile of the radial law with density ∝ R̂(k)k^{d−1}.
  double radial_quantile(double u) const {
    if (family_ == SpectrumFamily::gaussian_bump)
      return rho_ * std::sqrt(2.0 * boost::math::gamma_p_inv(0.5 * d_, u));
    return table_->quantile(u);
  }

  /// Radial CDF of the same law.
  double radial_cdf(double k) const {
    if (family_ == SpectrumFamily::gaussian_bump)
      return boost::math::gamma_p(0.5 * d_, 0.5 * k * k / (rho_ * rho_));
    return table_->cdf(k);
  }

 private:
  // φ̂ on a uniform grid plus the radial CDF of |φ̂|²k^{d−1}.
  struct Table {
    explicit Table(const ShapeFunction& shape) {
      const int d = shape.dimension();
      const double r0 = shape.radius();
      k_max = 400.0 / r0;
      const std::size_t n = 8001;
      h = k_max / double(n - 1);
      std::vector<double> y(n), dy(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double k = h * double(i);
        y[i] = shape.fourier(k);
        dy[i] = shape.fourier_prime(k);
      }
      spline = std::make_shared<boost::math::interpolators::cardinal_cubic_hermite<std::vector<double>>>(
          std::move(y), std::move(dy), 0.0, h);
      // Cumulative radial mass by Simpson on the grid, used for sampling.
      cum.assign(n, 0.0);
      double peak = 0.0;
      std::vector<double> m(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double k = h * double(i);
        const double f = phi_hat(k);
        m[i] = f * f * std::pow(k, d - 1);
        peak = std::max(peak, m[i]);
      }
      for (std::size_t i = 1; i < n; ++i) {
        const double km = h * (double(i) - 0.5);
        const double f = phi_hat(km);
        cum[i] = cum[i - 1] + h / 6.0 * (m[i - 1] + 4.0 * f * f * std::pow(km, d - 1) + m[i]);
      }
      const double total = cum.back();
      for (double& c : cum) c /= total;
      cutoff = k_max;
      for (std::size_t i = n; i-- > 1;) {
        if (m[i] > 1e-13 * peak) {
          cutoff = std::min(k_max, h * double(i + 1));
          break;
        }
      }
    }

    double phi_hat(double k) const { return (*spline)(k); }

    double cdf(double k) const {
      if (k <= 0.0) return 0.0;
      if (k >= k_max) return 1.0;
      const double pos = k / h;
      const auto i = static_cast<std::size_t>(pos);
      const double f = pos - double(i);
      return cum[i] + f * (cum[i + 1] - cum[i]);
    }

    double quantile(double u) const {
      u = std::clamp(u, 0.0, 1.0);
      const auto it = std::upper_bound(cum.begin(), cum.end(), u);
      if (it == cum.end()) return k_max;
      const auto i = static_cast<std::size_t>(it - cum.begin());
      const double c0 = cum[i - 1], c1 = cum[i];
      const double f = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
      return h * (double(i - 1) + f);
    }

    double k_max = 0.0;
    double h = 0.0;
    double cutoff = 0.0;
    std::vector<double> cum;
    std::shared_ptr<boost::math::interpolators::cardinal_cubic_hermite<std::vector<double>>> spline;
  };

  SpectrumFamily family_ = SpectrumFamily::gaussian_bump;
  int d_ = 3;
  double amplitude_ = 1.0;
  double rho_ = 1.0;
  std::shared_ptr<const ShapeFunction> shape_;
  std::shared_ptr<const Table> table_;
};

/// Covariance R(x) = (2π)^{−d} ∫ R̂(ξ) e^{iξ·x} dξ.
inline double covariance(const SpectrumModel& spec, std::span<const double> x) {
  const double r = norm(x);
  const int d = spec.dimension();
  if (spec.family() == SpectrumFamily::gaussian_bump) {
    const double rho = spec.width();
    return spec.amplitude() * std::pow(rho, d) * std::pow(2.0 * std::numbers::pi, -0.5 * d) *
           std::exp(-0.5 * rho * rho * r * r);
  }
  // φ⋆φ vanishes beyond twice the support radius.
  if (r >= 2.0 * spec.shape()->radius()) return 0.0;
  const double scale = r > 0.0 ? 1.0 / r : 0.0;
  return spec.radial_integral([&](double k) { return sphere_average_kernel(d, k * r); },
                              std::span<const double>(&scale, r > 0.0 ? 1 : 0), 1e-10);
}

}  // namespace homfluct
