#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "field.hpp"
#include "homogenization.hpp"
#include "quadrature.hpp"
#include "simd_math.hpp"

namespace homfluct {

/// ⟨Φ_λ, Φ_λ⟩ = (2π)^{−d} ∫ R̂(ξ) / (λ + |ξ|²/2)² dξ.
inline double corrector_variance(const SpectrumModel& spec, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("corrector_variance: lambda must be > 0");
  const double scale = std::sqrt(2.0 * lambda);
  return spec.radial_integral(
      [lambda](double k) {
        const double den = lambda + 0.5 * k * k;
        return 1.0 / (den * den);
      },
      std::span<const double>(&scale, 1), 1e-10);
}

/// σ_λ² = (2π)^{−d} ∫ R̂(ξ)|ξ|² / (λ + |ξ|²/2)² dξ.
inline double sigma_lambda2(const SpectrumModel& spec, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("sigma_lambda2: lambda must be > 0");
  const double scale = std::sqrt(2.0 * lambda);
  return spec.radial_integral(
      [lambda](double k) {
        const double den = lambda + 0.5 * k * k;
        return k * k / (den * den);
      },
      std::span<const double>(&scale, 1), 1e-10);
}

struct CorrectorExistence {
  bool exists = false;
  /// ∫ R̂(ξ)|ξ|^{−4} dξ, or +inf when it diverges.
  double integral = std::numeric_limits<double>::infinity();
};

/// The stationary corrector exists in L² iff R̂(ξ)|ξ|^{−4} is integrable.
inline CorrectorExistence stationary_corrector_exists(const SpectrumModel& spec) {
  const int d = spec.dimension();
  CorrectorExistence r;
  // Near the origin the integrand behaves like R̂(0) k^{d−5}.
  if (spec.at_origin() > 0.0 && d <= 4) return r;
  r.exists = true;
  r.integral = std::pow(2.0 * std::numbers::pi, d) *
               spec.radial_integral([](double k) { return std::pow(k, -4.0); }, {}, 1e-10);
  return r;
}

struct D4LogRow {
  double lambda = 0.0;
  double variance = 0.0;  // ⟨Φ_λ, Φ_λ⟩
  double ratio = 0.0;     // ⟨Φ_λ, Φ_λ⟩ / |log λ|
};

struct D4LogAsymptotics {
  std::vector<D4LogRow> rows;
  /// 2(2π)^{−4} R̂(0).
  double limit = 0.0;
  /// |S³| · 2(2π)^{−4} R̂(0): the λ → 0 limit of the radial integral itself.
  double limit_sphere = 0.0;
  /// |ratio − limit| / limit at the last row.
  double last_relative_deviation = 0.0;
  double last_relative_deviation_sphere = 0.0;
};

inline D4LogAsymptotics d4_log_asymptotics(const SpectrumModel& spec,
                                           std::span<const double> lambdas) {
  if (spec.dimension() != 4) throw std::invalid_argument("d4_log_asymptotics: needs d = 4");
  D4LogAsymptotics out;
  for (double l : lambdas) {
    if (!(l > 0.0 && l < 1.0)) throw std::invalid_argument("d4_log_asymptotics: need 0 < lambda < 1");
    D4LogRow row;
    row.lambda = l;
    row.variance = corrector_variance(spec, l);
    row.ratio = row.variance / std::abs(std::log(l));
    out.rows.push_back(row);
  }
  out.limit = 2.0 * std::pow(2.0 * std::numbers::pi, -4.0) * spec.at_origin();
  out.limit_sphere = sphere_area(4) * out.limit;
  if (!out.rows.empty() && out.limit > 0.0) {
    out.last_relative_deviation = std::abs(out.rows.back().ratio - out.limit) / out.limit;
    out.last_relative_deviation_sphere =
        std::abs(out.rows.back().ratio - out.limit_sphere) / out.limit_sphere;
  }
  return out;
}

namespace detail {

// Per-thread scratch for the mode kernels.
struct ModeScratch {
  std::vector<double> arg, c, s;
  void resize(std::size_t J) {
    if (arg.size() < J) {
      arg.resize(J);
      c.resize(J);
      s.resize(J);
    }
  }
};

inline ModeScratch& mode_scratch() {
  thread_local ModeScratch s;
  return s;
}

}  // namespace detail

/// Φ_λ for a Gaussian realization, diagonal on the modes.
class GaussianCorrector {
 public:
  GaussianCorrector(GaussianFieldRealization field, double lambda)
      : field_(std::move(field)), lambda_(lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("corrector: lambda must be > 0");
    const std::size_t J = field_.modes();
    const int d = field_.dimension();
    b_.resize(J);
    gb_.assign(std::size_t(d) * J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      b_[j] = field_.weight(j) / (lambda + 0.5 * field_.freq_norm_sq(j));
      for (int k = 0; k < d; ++k) gb_[k * J + j] = -b_[j] * field_.freq(j, k);
    }
  }

  int dimension() const { return field_.dimension(); }
  double lambda() const { return lambda_; }
  const GaussianFieldRealization& field() const { return field_; }

  double value(std::span<const double> x) const { return field_.mode_sum(b_, x); }

  void gradient(std::span<const double> x, std::span<double> grad) const {
    double v, p;
    eval_all(x, v, p, grad);
  }

  /// V(x), Φ_λ(x) and ∇Φ_λ(x) from one pass over the modes.
  void eval_all(std::span<const double> x, double& V, double& phi, std::span<double> grad) const {
    const std::size_t J = field_.modes();
    const int d = field_.dimension();
    if (J == 0) {
      V = phi = 0.0;
      for (int k = 0; k < d; ++k) grad[k] = 0.0;
      return;
    }
    auto& sc = detail::mode_scratch();
    sc.resize(J);
    double* arg = sc.arg.data();
    double* cs = sc.c.data();
    double* sn = sc.s.data();
    const double* th = field_.phases_data();
    const double* fr = field_.freq_data();
    const double* w = field_.weights_data();
    const double* b = b_.data();
    for (std::size_t j = 0; j < J; ++j) arg[j] = th[j];
    for (int k = 0; k < d; ++k) {
      const double xk = x[k];
      const double* f = fr + k * J;
#pragma omp simd
      for (std::size_t j = 0; j < J; ++j) arg[j] += xk * f[j];
    }
#pragma omp simd
    for (std::size_t j = 0; j < J; ++j) cs[j] = std::cos(arg[j]);
#pragma omp simd
    for (std::size_t j = 0; j < J; ++j) sn[j] = std::sin(arg[j]);
    double v = 0.0, p = 0.0;
    HOMFLUCT_SIMD_REDUCE(v, p)
    for (std::size_t j = 0; j < J; ++j) {
      v += w[j] * cs[j];
      p += b[j] * cs[j];
    }
    V = v;
    phi = p;
    for (int k = 0; k < d; ++k) {
      const double* gb = gb_.data() + k * J;
      double g = 0.0;
      HOMFLUCT_SIMD_REDUCE(g)
      for (std::size_t j = 0; j < J; ++j) g += gb[j] * sn[j];
      grad[k] = g;
    }
  }

 private:
  GaussianFieldRealization field_;
  double lambda_;
  std::vector<double> b_;   // w_j / (λ + |ξ_j|²/2)
  std::vector<double> gb_;  // −b_j ξ_{kj}, coordinate-major
};

/// Radial kernel f^λ = φ ⋆ G_λ and its derivative.
///
/// Uses the mean-value property of G_λ on spheres: for |y| = s the average of
/// G_λ(x − y) over the sphere is G_λ(r)m(s) if s < r = |x| and m(r)G_λ(s)
/// otherwise, with m the regular radial solution normalized to m(0) = 1.
class CorrectorKernel {
 public:
  CorrectorKernel(const ShapeFunction& shape, double lambda)
      : d_(shape.dimension()), r0_(shape.radius()), lambda_(lambda), area_(sphere_area(d_)) {
    if (!(lambda > 0.0)) throw std::invalid_argument("corrector kernel: lambda must be > 0");
    const std::size_t n = 2049;
    h_ = r0_ / double(n - 1);
    std::vector<double> P(n, 0.0), dP(n), Q(n, 0.0), dQ(n);
    auto p_int = [&](double s) {
      return shape.profile(s) * std::pow(s, d_ - 1) * green_regular_mean(s, lambda, d_);
    };
    auto q_int = [&](double s) {
      if (s <= 0.0) return 0.0;
      return shape.profile(s) * std::pow(s, d_ - 1) * green_lambda_radial(s, lambda, d_);
    };
    // Cells are tiny against the scale of the integrands; fixed Gauss-Legendre is exact to
    // rounding. The 1/s singularity of q_int for d = 3 is cancelled by s^{d−1}.
    using GL = boost::math::quadrature::gauss<double, 15>;
    for (std::size_t i = 1; i < n; ++i)
      P[i] = P[i - 1] + GL::integrate(p_int, h_ * double(i - 1), h_ * double(i));
    for (std::size_t i = n - 1; i-- > 0;)
      Q[i] = Q[i + 1] + GL::integrate(q_int, h_ * double(i), h_ * double(i + 1));
    for (std::size_t i = 0; i < n; ++i) {
      dP[i] = p_int(h_ * double(i));
      dQ[i] = -q_int(h_ * double(i));
    }
    p_total_ = P.back();
    q_origin_ = Q.front();
    P_ = std::make_shared<Spline>(std::move(P), std::move(dP), 0.0, h_);
    Q_ = std::make_shared<Spline>(std::move(Q), std::move(dQ), 0.0, h_);
    mass_ = shape.mass() / lambda;
  }

  int dimension() const { return d_; }
  double lambda() const { return lambda_; }
  double support() const { return r0_; }
  /// ∫ f^λ = c_φ / λ.
  double total_mass() const { return mass_; }

  double operator()(double r) const {
    if (r <= 1e-12 * r0_) return area_ * q_origin_;
    const double G = green_lambda_radial(r, lambda_, d_);
    if (r >= r0_) return area_ * G * p_total_;
    return area_ * (G * (*P_)(r) + green_regular_mean(r, lambda_, d_) * (*Q_)(r));
  }

  double derivative(double r) const {
    if (r <= 1e-12 * r0_) return 0.0;
    const double Gp = green_lambda_prime(r, lambda_, d_);
    if (r >= r0_) return area_ * Gp * p_total_;
    return area_ * (Gp * (*P_)(r) + green_regular_mean_prime(r, lambda_, d_) * (*Q_)(r));
  }

  /// ∫_{r1 < |y| < r2} g(f^λ(|y|)) dy.
  template <class Fn>
  double shell_integral(double r1, double r2, Fn&& g) const {
    auto integrand = [&](double r) { return area_ * std::pow(r, d_ - 1) * g((*this)(r)); };
    const double ell = 1.0 / std::sqrt(2.0 * lambda_);
    const double hi = std::min(r2, r0_ + 60.0 * ell);
    if (!(hi > r1)) return 0.0;
    double inner = 0.0;
    // Inside the support: one fixed rule per spline cell.
    using GL = boost::math::quadrature::gauss<double, 10>;
    const double in_hi = std::min(hi, r0_);
    for (double a = r1; a < in_hi;) {
      const double b = std::min(in_hi, h_ * (std::floor(a / h_ + 1e-9) + 1.0));
      if (b > a) inner += GL::integrate(integrand, a, b);
      a = b;
    }
    if (hi <= r0_) return inner;
    std::vector<double> br{std::max(r1, r0_)};
    for (double s = r0_; s < hi - 1e-6 * ell; s = s < ell ? 2.0 * s : s + ell)
      if (s > br.back()) br.push_back(s);
    br.push_back(hi);
    return inner + quad::integrate_pieces(integrand, br, 1e-10);
  }

 private:
  using Spline = boost::math::interpolators::cardinal_cubic_hermite<std::vector<double>>;
  int d_;
  double r0_;
  double lambda_;
  double area_;
  double h_ = 0.0;
  double p_total_ = 0.0;
  double q_origin_ = 0.0;
  double mass_ = 0.0;
  std::shared_ptr<Spline> P_, Q_;
};

/// Φ_λ for shot noise: Σ_p f^λ(x − y_p) minus its mean, truncated at r_trunc.
class PoissonCorrector {
 public:
  PoissonCorrector(PoissonFieldRealization field, double lambda)
      : field_(std::move(field)),
        kernel_(std::make_shared<CorrectorKernel>(field_.shape(), lambda)) {
    r_trunc_ = 10.0 / std::sqrt(2.0 * lambda) + field_.shape().radius();
    inner_mass_ = kernel_->shell_integral(0.0, r_trunc_, [](double v) { return v; });
  }

  int dimension() const { return field_.dimension(); }
  double lambda() const { return kernel_->lambda(); }
  double truncation_radius() const { return r_trunc_; }
  const CorrectorKernel& kernel() const { return *kernel_; }
  const PoissonFieldRealization& field() const { return field_; }

  /// Kernel mass beyond r_trunc, relative to c_φ/λ.
  double relative_tail_mass() const {
    return std::abs(kernel_->total_mass() - inner_mass_) / std::abs(kernel_->total_mass());
  }

  double value(std::span<const double> x) const {
    double phi = -inner_mass_;
    const int d = dimension();
    field_.for_each_point_within(x, r_trunc_, [&](std::span<const double> y) {
      phi += (*kernel_)(distance(x, y, d));
    });
    return phi;
  }

  void gradient(std::span<const double> x, std::span<double> grad) const {
    double v, p;
    eval_all(x, v, p, grad);
  }

  void eval_all(std::span<const double> x, double& V, double& phi, std::span<double> grad) const {
    const int d = dimension();
    const auto& shape = field_.shape();
    V = -shape.mass();
    phi = -inner_mass_;
    for (int k = 0; k < d; ++k) grad[k] = 0.0;
    field_.for_each_point_within(x, r_trunc_, [&](std::span<const double> y) {
      const double r = distance(x, y, d);
      V += shape.profile(r);
      phi += (*kernel_)(r);
      if (r > 0.0) {
        const double fp = kernel_->derivative(r) / r;
        for (int k = 0; k < d; ++k) grad[k] += fp * (x[k] - y[k]);
      }
    });
  }

 private:
  static double distance(std::span<const double> x, std::span<const double> y, int d) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return std::sqrt(s);
  }

  PoissonFieldRealization field_;
  std::shared_ptr<const CorrectorKernel> kernel_;
  double r_trunc_ = 0.0;
  double inner_mass_ = 0.0;
};

/// Regularized corrector Φ_λ = (λ − ½Δ)^{−1} V of one realization.
class CorrectorEvaluator {
 public:
  CorrectorEvaluator(const FieldRealization& field, double lambda)
      : impl_(std::visit(
            [&](const auto& f) -> Impl {
              using F = std::decay_t<decltype(f)>;
              if constexpr (std::is_same_v<F, GaussianFieldRealization>)
                return GaussianCorrector(f, lambda);
              else
                return PoissonCorrector(f, lambda);
            },
            field)) {}

  double lambda() const {
    return std::visit([](const auto& c) { return c.lambda(); }, impl_);
  }
  int dimension() const {
    return std::visit([](const auto& c) { return c.dimension(); }, impl_);
  }

  double value(std::span<const double> x) const {
    return std::visit([&](const auto& c) { return c.value(x); }, impl_);
  }
  void gradient(std::span<const double> x, std::span<double> g) const {
    std::visit([&](const auto& c) { c.gradient(x, g); }, impl_);
  }
  void eval_all(std::span<const double> x, double& V, double& phi, std::span<double> g) const {
    std::visit([&](const auto& c) { c.eval_all(x, V, phi, g); }, impl_);
  }

  template <class Fn>
  decltype(auto) visit(Fn&& fn) const {
    return std::visit(std::forward<Fn>(fn), impl_);
  }

 private:
  using Impl = std::variant<GaussianCorrector, PoissonCorrector>;
  Impl impl_;
};

inline double eval_corrector(const CorrectorEvaluator& ev, std::span<const double> x) {
  return ev.value(x);
}

inline std::vector<double> eval_corrector_grad(const CorrectorEvaluator& ev,
                                               std::span<const double> x) {
  std::vector<double> g(ev.dimension());
  ev.gradient(x, g);
  return g;
}

}  // namespace homfluct
