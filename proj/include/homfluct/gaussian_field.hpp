#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "rng.hpp"
#include "simd_math.hpp"
#include "spectrum.hpp"

namespace homfluct {

namespace detail {

// Σ_j c_j cos(θ_j + Σ_k x_k ξ_{kj}) over modes stored coordinate-major.
template <int D>
double cos_sum_fixed(const double* coef, const double* freq, const double* phase, std::size_t J,
                     const double* x) {
  double s = 0.0;
  HOMFLUCT_SIMD_REDUCE(s)
  for (std::size_t j = 0; j < J; ++j) {
    double a = phase[j];
    for (int k = 0; k < D; ++k) a += x[k] * freq[k * J + j];
    s += coef[j] * std::cos(a);
  }
  return s;
}

inline double cos_sum(int d, const double* coef, const double* freq, const double* phase,
                      std::size_t J, const double* x) {
  switch (d) {
    case 3: return cos_sum_fixed<3>(coef, freq, phase, J, x);
    case 4: return cos_sum_fixed<4>(coef, freq, phase, J, x);
    case 5: return cos_sum_fixed<5>(coef, freq, phase, J, x);
    default: break;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    double a = phase[j];
    for (int k = 0; k < d; ++k) a += x[k] * freq[k * J + j];
    s += coef[j] * std::cos(a);
  }
  return s;
}

}  // namespace detail

enum class ModeSampling {
  /// ξ_j iid from R̂/∫R̂, equal weights.
  spectral,
  /// Stratified mixture of the spectral law and a log-uniform radial law,
  /// weights from the mixture density. Resolves small |ξ| with few modes.
  stratified_log,
};

struct ModeSamplingOptions {
  ModeSampling kind = ModeSampling::spectral;
  /// Fraction of modes drawn from the log-uniform radial component.
  double log_fraction = 0.5;
  /// Log-uniform radial range in units of the spectral width.
  double log_low = 1e-5;
  double log_high = 10.0;
};

/// One frozen sample V(x) = Σ_j w_j cos(ξ_j·x + θ_j).
class GaussianFieldRealization {
 public:
  GaussianFieldRealization() = default;

  /// Build from explicit modes; `freqs` holds J rows of d coordinates.
  static GaussianFieldRealization from_modes(int d, std::vector<double> weights,
                                             const std::vector<std::vector<double>>& freqs,
                                             std::vector<double> phases) {
    const std::size_t J = weights.size();
    if (freqs.size() != J || phases.size() != J)
      throw std::invalid_argument("gaussian field: mode arrays differ in length");
    GaussianFieldRealization g;
    g.d_ = d;
    g.w_ = std::move(weights);
    g.theta_ = std::move(phases);
    g.freq_.assign(std::size_t(d) * J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      if (freqs[j].size() != std::size_t(d))
        throw std::invalid_argument("gaussian field: frequency has wrong dimension");
      for (int k = 0; k < d; ++k) g.freq_[k * J + j] = freqs[j][k];
    }
    return g;
  }

  /// The identically zero field.
  static GaussianFieldRealization zero(int d) {
    GaussianFieldRealization g;
    g.d_ = d;
    return g;
  }

  int dimension() const { return d_; }
  std::size_t modes() const { return w_.size(); }
  std::uint64_t seed() const { return seed_; }

  double weight(std::size_t j) const { return w_[j]; }
  double phase(std::size_t j) const { return theta_[j]; }
  double freq(std::size_t j, int k) const { return freq_[k * modes() + j]; }
  double freq_norm_sq(std::size_t j) const {
    double s = 0.0;
    for (int k = 0; k < d_; ++k) s += freq(j, k) * freq(j, k);
    return s;
  }

  const double* weights_data() const { return w_.data(); }
  const double* phases_data() const { return theta_.data(); }
  /// Coordinate-major frequencies: entry (k, j) at k*J + j.
  const double* freq_data() const { return freq_.data(); }

  double operator()(std::span<const double> x) const {
    if (w_.empty()) return 0.0;
    return detail::cos_sum(d_, w_.data(), freq_.data(), theta_.data(), modes(), x.data());
  }

  /// Σ_j c_j cos(ξ_j·x + θ_j) for caller-supplied per-mode coefficients.
  double mode_sum(const std::vector<double>& coef, std::span<const double> x) const {
    if (w_.empty()) return 0.0;
    return detail::cos_sum(d_, coef.data(), freq_.data(), theta_.data(), modes(), x.data());
  }

  bool operator==(const GaussianFieldRealization&) const = default;

 private:
  friend GaussianFieldRealization make_gaussian_field(const SpectrumModel&, std::size_t,
                                                      std::uint64_t, const ModeSamplingOptions&);
  int d_ = 3;
  std::uint64_t seed_ = 0;
  std::vector<double> w_;
  std::vector<double> theta_;
  std::vector<double> freq_;
};

namespace detail {

inline void random_direction(Rng& rng, int d, double* out) {
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (int k = 0; k < d; ++k) {
      out[k] = rng.normal();
      n2 += out[k] * out[k];
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (int k = 0; k < d; ++k) out[k] *= inv;
}

}  // namespace detail

/// Randomized spectral synthesis of a stationary Gaussian field with spectrum `spec`.
inline GaussianFieldRealization make_gaussian_field(const SpectrumModel& spec, std::size_t J,
                                                    std::uint64_t seed,
                                                    const ModeSamplingOptions& opt = {}) {
  if (J == 0) throw std::invalid_argument("gaussian field: J must be >= 1");
  const int d = spec.dimension();
  const double mass = spec.total_mass();
  if (!std::isfinite(mass) || mass < 0.0)
    throw std::invalid_argument("gaussian field: spectrum is not integrable");

  GaussianFieldRealization g;
  g.d_ = d;
  g.seed_ = seed;
  g.w_.resize(J);
  g.theta_.resize(J);
  g.freq_.assign(std::size_t(d) * J, 0.0);
  Rng rng(derive_seed(seed, StreamTag::field, {}));
  const double two_pi = 2.0 * std::numbers::pi;
  const double two_pi_d = std::pow(two_pi, d);
  std::vector<double> dir(d);

  auto put = [&](std::size_t j, double r) {
    detail::random_direction(rng, d, dir.data());
    for (int k = 0; k < d; ++k) g.freq_[k * J + j] = r * dir[k];
    g.theta_[j] = two_pi * rng.uniform();
  };

  if (opt.kind == ModeSampling::spectral) {
    const double w = std::sqrt(2.0 * mass / (two_pi_d * double(J)));
    for (std::size_t j = 0; j < J; ++j) {
      g.w_[j] = w;
      if (spec.family() == SpectrumFamily::gaussian_bump) {
        // R̂ ∝ N(0, ρ² I): sample ξ directly.
        for (int k = 0; k < d; ++k) g.freq_[k * J + j] = spec.width() * rng.normal();
        g.theta_[j] = two_pi * rng.uniform();
      } else {
        put(j, spec.radial_quantile(rng.uniform()));
      }
    }
    return g;
  }

  if (!(opt.log_fraction >= 0.0 && opt.log_fraction < 1.0) || !(opt.log_low > 0.0) ||
      !(opt.log_high > opt.log_low))
    throw std::invalid_argument("gaussian field: invalid mode sampling options");
  const auto n_log = static_cast<std::size_t>(std::llround(opt.log_fraction * double(J)));
  const std::size_t n_spec = J - n_log;
  const double q = double(n_log) / double(J);
  const double r_lo = opt.log_low * spec.width();
  const double r_hi = opt.log_high * spec.width();
  const double log_span = std::log(r_hi / r_lo);
  const double area = sphere_area(d);

  for (std::size_t j = 0; j < J; ++j) {
    const bool from_log = j < n_log;
    const std::size_t i = from_log ? j : j - n_log;
    const std::size_t n = from_log ? n_log : n_spec;
    const double u = (double(i) + rng.uniform()) / double(n);
    const double r = from_log ? r_lo * std::exp(u * log_span) : spec.radial_quantile(u);
    put(j, r);
    const double rhat = spec.density(r);
    double p = mass > 0.0 ? (1.0 - q) * rhat / mass : 0.0;
    if (r >= r_lo && r <= r_hi) p += q / (log_span * area * std::pow(r, d));
    g.w_[j] = p > 0.0 && rhat > 0.0 ? std::sqrt(2.0 * rhat / (two_pi_d * double(J) * p)) : 0.0;
  }
  return g;
}

}  // namespace homfluct
