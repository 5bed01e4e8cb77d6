#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "corrector.hpp"
#include "feynman_kac.hpp"
#include "field.hpp"
#include "homogenization.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "spectrum.hpp"
#include "stats.hpp"

namespace homfluct {

namespace detail {

// ∫₀ᵗ∫₀ᵗ K(s, u) ds du for kernels singular like (s+u)^{-3/2} at the origin,
// after s = t p², u = t q² and polar coordinates in (p, q); the Jacobian
// cancels the singularity.
template <class K>
double corner_singular_square(K&& kern, double t, double rel_tol) {
  auto angular = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    const double r_max = 1.0 / std::max(c, s);
    auto radial = [&](double r) {
      const double p = r * c, q = r * s;
      return kern(t * p * p, t * q * q) * 4.0 * t * t * p * q * r;
    };
    const double br[] = {0.0, 0.05 * r_max, 0.3 * r_max, r_max};
    return quad::integrate_pieces(radial, br, 0.01 * rel_tol, 12);
  };
  const double q = 0.25 * std::numbers::pi;
  const double br[] = {0.0, 0.5 * q, q, 1.5 * q, 2.0 * q};
  return quad::integrate_pieces(angular, br, rel_tol, 12);
}

// Heat kernel density q_V(m) in R^3.
inline double heat3(double V, double m2) {
  return std::pow(2.0 * std::numbers::pi * V, -1.5) * std::exp(-0.5 * m2 / V);
}

// Shared integrand of var and var_ε. eps = 0 selects the limit.
inline double fluct_variance(const SpectrumModel& spec, const InitialCondition& f, double t,
                             std::span<const double> x, double sigma2, double eps) {
  if (spec.dimension() != 3 || x.size() != 3)
    throw std::invalid_argument("fluctuation variance: defined for d = 3");
  if (!(t > 0.0)) throw std::invalid_argument("fluctuation variance: t must be > 0");
  const double H = f.heat(t, x);
  const double pre = std::exp(-sigma2 * t) * H * H;
  if (pre == 0.0 || spec.at_origin() == 0.0) return 0.0;
  const bool bump = f.kind == InitialCondition::Kind::gaussian_bump;
  const double T = bump ? f.width * f.width + t : 0.0;
  const double z2 = bump ? f.dist2(x) : 0.0;
  // Variance of the Brownian displacement seen at time s and the mean shift (s − u)z/T.
  auto v_of = [&](double s) { return bump ? s * (T - s) / T : s; };
  auto m2_of = [&](double s, double u) { return bump ? z2 * (s - u) * (s - u) / (T * T) : 0.0; };

  std::function<double(double, double)> kern;
  if (eps == 0.0) {
    const double r0 = spec.at_origin();
    kern = [=](double s, double u) {
      const double V = v_of(s) + v_of(u);
      return V > 0.0 ? r0 * heat3(V, m2_of(s, u)) : 0.0;
    };
  } else if (spec.family() == SpectrumFamily::gaussian_bump) {
    const double A = spec.amplitude();
    const double rho = spec.width();
    kern = [=](double s, double u) {
      const double V = v_of(s) + v_of(u) + eps * eps / (rho * rho);
      return A * heat3(V, m2_of(s, u));
    };
  } else {
    kern = [=, &spec](double s, double u) {
      const double V = v_of(s) + v_of(u);
      const double m = std::sqrt(m2_of(s, u));
      const double e3 = eps * eps * eps;
      return spec.radial_integral(
                 [&](double k) {
                   const double q = k / eps;
                   return std::exp(-0.5 * V * q * q) * sphere_average_kernel(3, q * m);
                 },
                 {}, 1e-8) /
             e3;
    };
  }
  return pre * corner_singular_square(kern, t, 1e-7);
}

}  // namespace detail

/// Variance of the limit v(t, x): R̂(0)∫∫∫𝒢_{t−s}(x−z)𝒢_{t−u}(x−z)f f dz ds du.
inline double var_limit(const SpectrumModel& spec, const InitialCondition& f, double t,
                        std::span<const double> x, double sigma2) {
  return detail::fluct_variance(spec, f, t, x, sigma2, 0.0);
}

/// Variance of v_ε(t, x) over the potential (R̂(0) replaced by R̂(εξ)).
inline double var_eps(const SpectrumModel& spec, const InitialCondition& f, double t,
                      std::span<const double> x, double sigma2, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("var_eps: eps must be > 0");
  return detail::fluct_variance(spec, f, t, x, sigma2, eps);
}

/// Draws of the limit law i·Z, Z ~ N(0, var).
inline std::vector<std::complex<double>> sample_limit_v(double var, std::size_t N,
                                                        std::uint64_t seed) {
  if (var < 0.0) throw std::invalid_argument("sample_limit_v: var must be >= 0");
  std::vector<std::complex<double>> out(N);
  Rng rng(derive_seed(seed, StreamTag::limit_law, {}));
  const double sd = std::sqrt(var);
  for (auto& z : out) z = {0.0, sd * rng.normal()};
  return out;
}

struct DistTestResult {
  std::size_t n = 0;
  double ks_statistic = 0.0;
  double p_value = 0.0;
  std::string target;
  double target_variance = 0.0;
  stats::Moments moments;  // of the tested (imaginary) component
  /// Real-part null check.
  double re_mean = 0.0;
  double re_stderr = 0.0;
  bool re_null_ok = true;
};

/// KS test of Im(samples) against N(0, var) plus |mean Re| ≤ 4 stderr.
inline DistTestResult clt_test_d3(std::span<const std::complex<double>> samples, double var) {
  if (samples.size() < 100) throw std::invalid_argument("clt_test_d3: need >= 100 samples");
  std::vector<double> im, re;
  for (const auto& z : samples) {
    im.push_back(z.imag());
    re.push_back(z.real());
  }
  DistTestResult r;
  r.n = samples.size();
  r.target = "N(0, var)";
  r.target_variance = var;
  const auto ks = stats::ks_test_normal(im, 0.0, var);
  r.ks_statistic = ks.statistic;
  r.p_value = ks.p_value;
  r.moments = stats::moments(im);
  const auto mr = stats::moments(re);
  r.re_mean = mr.mean;
  r.re_stderr = std::sqrt(mr.variance / double(re.size()));
  r.re_null_ok = std::abs(r.re_mean) <= 4.0 * r.re_stderr || r.re_mean == 0.0;
  return r;
}

/// Fraction of `trials` runs of clt_test_d3 on exact limit-law samples with p < threshold.
inline double clt_false_rejection_rate(double var, std::size_t n, std::size_t trials,
                                       std::uint64_t seed, double threshold = 0.01) {
  std::size_t rejected = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto s = sample_limit_v(var, n, derive_seed(seed, {k}));
    if (clt_test_d3(s, var).p_value < threshold) ++rejected;
  }
  return double(rejected) / double(trials);
}

/// v_ε(t, x) over an ensemble of Gaussian realizations, evaluated without inner sampling.
inline std::vector<std::complex<double>> v_eps_ensemble(const FieldSpec& fs,
                                                        const InitialCondition& f, double t,
                                                        std::span<const double> x, double eps,
                                                        double sigma2, std::size_t n_omega,
                                                        std::uint64_t master, unsigned workers) {
  if (fs.kind != FieldSpec::Kind::gaussian)
    throw std::invalid_argument("v_eps_ensemble: needs a Gaussian field");
  std::vector<std::complex<double>> out(n_omega);
  parallel_for(n_omega, workers, [&](std::size_t w) {
    const auto field = std::get<GaussianFieldRealization>(fs.realize(master, w));
    out[w] = v_eps_exact(field, f, t, x, eps, sigma2);
  });
  return out;
}

// ---------------------------------------------------------------------------
// ε-rate experiments

struct EnsembleCell {
  double eps = 0.0;
  std::size_t omega = 0;
  std::complex<double> u_eps;
  std::size_t n_paths = 0;
  double inner_ci = 0.0;
  double inner_variance = 0.0;  // per-path variance
};

struct RateExperimentSpec {
  FieldSpec field;
  InitialCondition initial;
  double t = 1.0;
  std::vector<double> x;
  std::vector<double> eps_list;
  std::size_t n_omega = 256;
  /// Fixed inner sample size; 0 selects it adaptively from a pilot run.
  std::size_t n_paths = 0;
  std::size_t pilot_omega = 16;
  std::size_t pilot_paths = 128;
  std::size_t min_paths = 64;
  std::size_t max_paths = 20000;
  double dt = 0.05;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  /// Inner CI must not exceed this fraction of the mean error.
  double inner_fraction = 1.0 / 3.0;
};

struct RateRow {
  double eps = 0.0;
  double mean_abs_err = 0.0;
  double std_err = 0.0;
  /// RMS over ω of the inner 95% half-width.
  double inner_ci = 0.0;
  std::size_t n_paths = 0;
  bool valid = true;
};

struct RateFitResult {
  std::vector<RateRow> rows;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double nominal_slope = 0.5;
  bool log_correction_applied = false;
  bool valid = true;
  std::string message;
  /// Every (ε, ω) estimate, in (ε index, ω) order.
  std::vector<EnsembleCell> cells;
};

inline double nominal_rate(int d) { return d == 3 ? 0.5 : 1.0; }

inline std::uint64_t ensemble_path_seed(std::uint64_t master, std::size_t omega,
                                        std::size_t eps_index) {
  return derive_seed(master, StreamTag::path, {omega, eps_index});
}

/// u_ε at (t, x) for ω in [0, n_omega) and one ε, with n_paths inner paths each.
inline std::vector<EnsembleCell> u_eps_ensemble(const RateExperimentSpec& s, std::size_t eps_index,
                                                std::size_t n_omega, std::size_t n_paths) {
  const double eps = s.eps_list.at(eps_index);
  std::vector<EnsembleCell> cells(n_omega);
  parallel_for(n_omega, s.workers, [&](std::size_t w) {
    const auto field = s.field.realize(s.master_seed, w);
    const auto est = u_eps_estimate(field, s.initial, s.t, s.x, eps, n_paths, s.dt,
                                    ensemble_path_seed(s.master_seed, w, eps_index));
    cells[w] = {eps, w, est.mean(), n_paths, est.ci(), est.variance()};
  });
  return cells;
}

/// Inner sample size that keeps the inner CI below `inner_fraction` of the mean error,
/// from a pilot ensemble. Returns max_paths when the pilot shows no signal.
inline std::size_t adaptive_paths(const RateExperimentSpec& s, std::size_t eps_index,
                                  double u_ref) {
  const std::size_t m = std::min(s.pilot_omega, s.n_omega);
  const auto cells = u_eps_ensemble(s, eps_index, m, s.pilot_paths);
  double inner = 0.0, err2 = 0.0;
  for (const auto& c : cells) {
    inner += c.inner_variance;
    err2 += std::norm(c.u_eps - u_ref);
  }
  inner /= double(m);
  err2 = err2 / double(m) - inner / double(s.pilot_paths);
  if (!(err2 > 0.0)) return s.max_paths;
  // E|Z| ≈ 0.8 √E|Z|² for a roughly Gaussian error; keep a 25% margin.
  const double mean_err = 0.8 * std::sqrt(err2);
  const double need = std::pow(1.96 * std::sqrt(inner) / (0.75 * s.inner_fraction * mean_err), 2);
  return std::clamp<std::size_t>(std::size_t(std::ceil(need)), s.min_paths, s.max_paths);
}

inline RateFitResult rate_experiment(const RateExperimentSpec& s) {
  const int d = s.field.dimension();
  if (d < 3 || d > 5) throw std::invalid_argument("rate_experiment: d must be 3, 4 or 5");
  if (s.eps_list.size() < 3) throw std::invalid_argument("rate_experiment: need >= 3 eps values");
  {
    auto sorted = s.eps_list;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("rate_experiment: eps values must be distinct");
  }
  const HomogenizedModel model(s.field.spectrum, s.initial);
  const double u_ref = u_hom(model, s.t, s.x);
  RateFitResult out;
  out.nominal_slope = nominal_rate(d);
  out.log_correction_applied = d == 4;
  std::vector<double> lx, ly;
  for (std::size_t e = 0; e < s.eps_list.size(); ++e) {
    const double eps = s.eps_list[e];
    const std::size_t n_paths = s.n_paths > 0 ? s.n_paths : adaptive_paths(s, e, u_ref);
    auto cells = u_eps_ensemble(s, e, s.n_omega, n_paths);
    std::vector<double> errs;
    double ci2 = 0.0;
    for (const auto& c : cells) {
      errs.push_back(std::abs(c.u_eps - u_ref));
      ci2 += c.inner_ci * c.inner_ci;
    }
    const auto m = stats::moments(errs);
    RateRow row;
    row.eps = eps;
    row.mean_abs_err = m.mean;
    row.std_err = std::sqrt(m.variance / double(errs.size()));
    row.inner_ci = std::sqrt(ci2 / double(cells.size()));
    row.n_paths = n_paths;
    row.valid = row.mean_abs_err > 0.0 && row.inner_ci <= s.inner_fraction * row.mean_abs_err;
    out.valid = out.valid && row.valid;
    out.rows.push_back(row);
    out.cells.insert(out.cells.end(), cells.begin(), cells.end());
    double y = row.mean_abs_err;
    if (d == 4) y /= std::sqrt(std::abs(std::log(eps)));
    lx.push_back(std::log(eps));
    ly.push_back(std::log(y));
  }
  if (!out.valid) {
    const bool zero = std::any_of(out.rows.begin(), out.rows.end(),
                                  [](const RateRow& r) { return !(r.mean_abs_err > 0.0); });
    out.message = zero ? "zero error at some eps: no rate to fit"
                       : "inner Monte Carlo noise exceeds the allowed fraction of the error";
    if (zero) return out;
  }
  const auto fit = stats::least_squares(lx, ly);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.r_squared = fit.r_squared;
  return out;
}

// ---------------------------------------------------------------------------
// d = 4 corrector CLT

struct D4ClTRow {
  double eps = 0.0;
  DistTestResult stated;      // against N(0, 4R̂(0)/(2π)^4)
  DistTestResult sphere;      // against N(0, 4|S³|R̂(0)/(2π)^4)
  DistTestResult quadrature;  // against N(0, ⟨Φ_λ,Φ_λ⟩/|log ε|)
  double sample_variance = 0.0;
  /// ⟨Φ_λ,Φ_λ⟩/|log ε|, the exact variance at this ε.
  double variance_over_log_eps = 0.0;
  /// ⟨Φ_λ,Φ_λ⟩/|log λ| = half of the above.
  double variance_over_log_lambda = 0.0;
};

struct D4ClTResult {
  std::vector<D4ClTRow> rows;
  double target_variance = 0.0;         // 4R̂(0)/(2π)^4
  double target_variance_sphere = 0.0;  // with the |S³| factor
  double lemma_limit = 0.0;             // 2(2π)^{-4}R̂(0)
};

/// Φ_{ε²}(0) of shot noise: exact contribution of points within r_near plus a
/// Gaussian stand-in, with matching mean and variance, for the far points.
inline double poisson_corrector_origin(const CorrectorKernel& kern, const PoissonFieldRealization& f,
                                       double r_near, double near_mass, double far_sd, Rng& rng) {
  const int d = f.dimension();
  std::vector<double> origin(d, 0.0);
  double phi = -near_mass;
  f.for_each_point_within(origin, r_near, [&](std::span<const double> y) {
    phi += kern(norm(y));
  });
  return phi + far_sd * rng.normal();
}

inline D4ClTResult d4_corrector_clt(const FieldSpec& fs, std::span<const double> eps_list,
                                    std::size_t N, std::uint64_t seed, unsigned workers,
                                    double r_near = 6.0) {
  if (fs.dimension() != 4) throw std::invalid_argument("d4_corrector_clt: needs d = 4");
  const double r0 = fs.spectrum.at_origin();
  const double c4 = std::pow(2.0 * std::numbers::pi, -4.0);
  D4ClTResult out;
  out.target_variance = 4.0 * c4 * r0;
  out.target_variance_sphere = sphere_area(4) * out.target_variance;
  out.lemma_limit = 2.0 * c4 * r0;
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const double eps = eps_list[e];
    const double lambda = eps * eps;
    const double loge = std::abs(std::log(eps));
    std::vector<double> samples(N);
    if (fs.kind == FieldSpec::Kind::gaussian) {
      const std::vector<double> origin(4, 0.0);
      parallel_for(N, workers, [&](std::size_t n) {
        const auto field = std::get<GaussianFieldRealization>(fs.realize(derive_seed(seed, {e}), n));
        samples[n] = GaussianCorrector(field, lambda).value(origin) / std::sqrt(loge);
      });
    } else {
      const CorrectorKernel kern(*fs.shape, lambda);
      const double near_mass = kern.shell_integral(0.0, r_near, [](double v) { return v; });
      const double far_var = kern.shell_integral(r_near, std::numeric_limits<double>::infinity(),
                                                 [](double v) { return v * v; });
      parallel_for(N, workers, [&](std::size_t n) {
        const auto field = std::get<PoissonFieldRealization>(fs.realize(derive_seed(seed, {e}), n));
        Rng rng(derive_seed(seed, StreamTag::limit_law, {e, n}));
        samples[n] = poisson_corrector_origin(kern, field, r_near, near_mass, std::sqrt(far_var), rng) /
                     std::sqrt(loge);
      });
    }
    D4ClTRow row;
    row.eps = eps;
    const double cv = corrector_variance(fs.spectrum, lambda);
    row.variance_over_log_eps = cv / loge;
    row.variance_over_log_lambda = cv / std::abs(std::log(lambda));
    auto run = [&](double var, const std::string& name) {
      DistTestResult r;
      const auto ks = stats::ks_test_normal(samples, 0.0, var);
      r.n = N;
      r.ks_statistic = ks.statistic;
      r.p_value = ks.p_value;
      r.target = name;
      r.target_variance = var;
      r.moments = stats::moments(samples);
      return r;
    };
    row.stated = run(out.target_variance, "N(0, 4R(0)/(2pi)^4)");
    row.sphere = run(out.target_variance_sphere, "N(0, 4|S^3|R(0)/(2pi)^4)");
    row.quadrature = run(row.variance_over_log_eps, "N(0, <Phi,Phi>/|log eps|)");
    row.sample_variance = row.stated.moments.variance;
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// d ≥ 5 first-order expansion

struct RemainderRow {
  double eps = 0.0;
  double dt = 0.0;
  /// E|R_t^ε|² over ω and paths, with the standard error across ω.
  double mean_R2 = 0.0;
  double std_err = 0.0;
  /// E|X − R − M| / E|R| at the chosen dt.
  double residual_fraction = 0.0;
};

struct RemainderStudy {
  std::vector<RemainderRow> rows;
  /// Least-squares slope of log E|R|² against log ε.
  double slope = 0.0;
  double r_squared = 0.0;
};

struct RemainderSpec {
  FieldSpec field;
  double t = 1.0;
  std::vector<double> x;
  std::vector<double> eps_list;
  std::size_t n_omega = 200;
  std::size_t n_paths = 200;
  double dt = 0.05;
  /// Halve dt (at most this many times) while a pilot's residual fraction exceeds 10%.
  int max_halvings = 4;
  std::size_t pilot_omega = 8;
  std::size_t pilot_paths = 16;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
};

/// E|R_t^ε|² at λ = ε² for a Gaussian field, averaged over ω and the path:
/// ε²(2π)^{−d}∫R̂ g² E|λ∫₀ᵀe^{iξ·B}ds − e^{iξ·B_T} + 1|² dξ, g = 1/(λ + a), a = |ξ|²/2, T = t/λ.
inline double remainder_moment(const SpectrumModel& spec, double eps, double t) {
  if (!(eps > 0.0) || !(t > 0.0)) throw std::invalid_argument("remainder_moment: eps and t must be > 0");
  const double lambda = eps * eps, T = t / lambda;
  const double br[] = {std::sqrt(2.0 * lambda), std::sqrt(2.0 / T)};
  const double I = spec.radial_integral(
      [=](double k) {
        const double a = 0.5 * k * k, g = 1.0 / (lambda + a);
        const double aT = a * T;
        double z;
        if (aT < 1e-6) {
          z = lambda * lambda * T * T + 2.0 * aT;
        } else {
          const double m = -std::expm1(-aT);
          z = 2.0 * lambda * lambda * (T / a - m / (a * a)) + 2.0 * m;
        }
        return g * g * z;
      },
      br, 1e-10);
  return lambda * I;
}

/// Kipnis-Varadhan remainder at λ = ε² over an (ω, path) ensemble.
inline RemainderStudy remainder_scaling(const RemainderSpec& s) {
  const int d = s.field.dimension();
  if (int(s.x.size()) != d) throw std::invalid_argument("remainder_scaling: x has wrong dimension");
  if (s.eps_list.size() < 2) throw std::invalid_argument("remainder_scaling: need >= 2 eps values");
  const std::vector<double> xi(d, 0.0);
  struct Sums {
    double r2 = 0.0, absr = 0.0, absres = 0.0;
  };
  auto run = [&](double eps, std::size_t e, double dt, std::size_t n_omega, std::size_t n_paths,
                 std::vector<Sums>& out) {
    out.assign(n_omega, {});
    const double lambda = eps * eps;
    const double sl2 = sigma_lambda2(s.field.spectrum, lambda);
    parallel_for(n_omega, s.workers, [&](std::size_t w) {
      const CorrectorEvaluator ev(s.field.realize(s.master_seed, w), lambda);
      const auto seed = derive_seed(s.master_seed, StreamTag::path, {w, e, 0x4b56ULL});
      Sums acc;
      for (std::size_t p = 0; p < n_paths; ++p) {
        const auto path = simulate_brownian(s.t / lambda, dt, path_seed(seed, p), d);
        const auto pf = martingale_decomposition(ev, path, s.x, eps, xi, sl2);
        acc.r2 += pf.R * pf.R;
        acc.absr += std::abs(pf.R);
        acc.absres += std::abs(pf.residual());
      }
      acc.r2 /= double(n_paths);
      acc.absr /= double(n_paths);
      acc.absres /= double(n_paths);
      out[w] = acc;
    });
  };
  auto fraction = [](const std::vector<Sums>& v) {
    double a = 0.0, r = 0.0;
    for (const auto& x : v) {
      a += x.absres;
      r += x.absr;
    }
    return r > 0.0 ? a / r : 0.0;
  };
  RemainderStudy out;
  std::vector<double> lx, ly;
  std::vector<Sums> sums;
  for (std::size_t e = 0; e < s.eps_list.size(); ++e) {
    const double eps = s.eps_list[e];
    double dt = s.dt;
    for (int h = 0; h < s.max_halvings; ++h) {
      run(eps, e, dt, std::min(s.pilot_omega, s.n_omega), s.pilot_paths, sums);
      if (fraction(sums) <= 0.1) break;
      dt *= 0.5;
    }
    run(eps, e, dt, s.n_omega, s.n_paths, sums);
    std::vector<double> r2;
    for (const auto& x : sums) r2.push_back(x.r2);
    const auto m = stats::moments(r2);
    RemainderRow row{eps, dt, m.mean, std::sqrt(m.variance / double(r2.size())), fraction(sums)};
    out.rows.push_back(row);
    lx.push_back(std::log(eps));
    ly.push_back(std::log(row.mean_R2));
  }
  const auto fit = stats::least_squares(lx, ly);
  out.slope = fit.slope;
  out.r_squared = fit.r_squared;
  return out;
}

struct D5Row {
  double eps = 0.0;
  std::size_t n_paths = 0;
  /// corr(Im((u_ε − u_hom)/ε), u_hom·Φ(x/ε)); NaN when degenerate.
  double correlation = 0.0;
  bool degenerate = false;
  /// E|u_ε − u_hom − iεu_homΦ| / ε.
  double residual_over_eps = 0.0;
  double mean_abs_err = 0.0;
  double inner_ci = 0.0;
};

struct D5Spec {
  FieldSpec field;
  InitialCondition initial;
  double t = 1.0;
  std::vector<double> x;
  std::vector<double> eps_list;
  std::size_t n_omega = 64;
  /// Inner paths at the largest ε; scaled by (ε_max/ε)^path_exponent below it.
  std::size_t n_paths = 1000;
  double path_exponent = 3.0;
  double dt = 0.05;
  double lambda = 1e-10;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
};

inline std::vector<D5Row> d5_expansion_check(const D5Spec& s) {
  if (s.field.dimension() < 5) throw std::invalid_argument("d5_expansion_check: needs d >= 5");
  if (s.field.kind != FieldSpec::Kind::gaussian)
    throw std::invalid_argument("d5_expansion_check: the bias constant is only zero for Gaussian V");
  const HomogenizedModel model(s.field.spectrum, s.initial);
  const double u0 = u_hom(model, s.t, s.x);
  const double eps_max = *std::max_element(s.eps_list.begin(), s.eps_list.end());
  std::vector<D5Row> rows;
  for (std::size_t e = 0; e < s.eps_list.size(); ++e) {
    const double eps = s.eps_list[e];
    const auto n_paths = std::size_t(
        std::ceil(double(s.n_paths) * std::pow(eps_max / eps, s.path_exponent)));
    std::vector<double> y(s.n_omega), z(s.n_omega), res(s.n_omega), err(s.n_omega),
        ci(s.n_omega);
    parallel_for(s.n_omega, s.workers, [&](std::size_t w) {
      const auto field = std::get<GaussianFieldRealization>(s.field.realize(s.master_seed, w));
      std::vector<double> xe(s.x.size());
      for (std::size_t k = 0; k < xe.size(); ++k) xe[k] = s.x[k] / eps;
      const double phi = GaussianCorrector(field, s.lambda).value(xe);
      const auto est = u_eps_estimate(field, s.initial, s.t, s.x, eps, n_paths, s.dt,
                                      ensemble_path_seed(s.master_seed, w, e));
      const std::complex<double> diff = est.mean() - u0;
      y[w] = diff.imag() / eps;
      z[w] = u0 * phi;
      res[w] = std::abs(diff - std::complex<double>(0.0, eps * u0 * phi)) / eps;
      err[w] = std::abs(diff);
      ci[w] = est.ci();
    });
    D5Row row;
    row.eps = eps;
    row.n_paths = n_paths;
    row.correlation = stats::correlation(y, z);
    row.degenerate = std::isnan(row.correlation);
    row.residual_over_eps = stats::moments(res).mean;
    row.mean_abs_err = stats::moments(err).mean;
    double c2 = 0.0;
    for (double c : ci) c2 += c * c;
    row.inner_ci = std::sqrt(c2 / double(ci.size()));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace homfluct
