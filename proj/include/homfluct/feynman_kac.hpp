#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "corrector.hpp"
#include "field.hpp"
#include "homogenization.hpp"
#include "mc_estimate.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace homfluct {

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t p) {
  return derive_seed(seed, StreamTag::path, {p});
}

/// One Feynman-Kac sample f(x + εB_T) exp(iε∫₀^T V(x/ε + B_s) ds), T = t/ε².
///
/// The path is drawn step by step from the same stream simulate_brownian uses,
/// so it matches BrownianPath-based evaluation exactly.
template <class Field>
std::complex<double> feynman_kac_sample(const Field& V, const InitialCondition& f, double t,
                                        std::span<const double> x, double eps, double dt,
                                        std::uint64_t seed) {
  const int d = int(x.size());
  const double horizon = t / (eps * eps);
  const std::size_t n = step_count(horizon, dt);
  const double h = horizon / double(n);
  const double sd = std::sqrt(h);
  Rng rng(seed);
  std::vector<double> y(d), b(d, 0.0);
  for (int k = 0; k < d; ++k) y[k] = x[k] / eps;
  double integral = 0.5 * V(std::span<const double>(y));
  for (std::size_t i = 1; i <= n; ++i) {
    for (int k = 0; k < d; ++k) {
      const double db = sd * rng.normal();
      b[k] += db;
      y[k] += db;
    }
    const double v = V(std::span<const double>(y));
    integral += i == n ? 0.5 * v : v;
  }
  integral *= h;
  for (int k = 0; k < d; ++k) b[k] = x[k] + eps * b[k];
  const double phase = eps * integral;
  return f(b) * std::complex<double>(std::cos(phase), std::sin(phase));
}

/// Inner Monte Carlo estimate of u_ε(t, x) for one frozen realization.
template <class Field>
MCEstimate u_eps_estimate(const Field& V, const InitialCondition& f, double t,
                          std::span<const double> x, double eps, std::size_t n_paths, double dt,
                          std::uint64_t seed, std::size_t first_path = 0) {
  if (!(t > 0.0) || !(eps > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("u_eps_estimate: t, eps and dt must be > 0");
  if (n_paths == 0) throw std::invalid_argument("u_eps_estimate: need at least one path");
  MCEstimate est;
  for (std::size_t p = first_path; p < first_path + n_paths; ++p)
    est.add(feynman_kac_sample(V, f, t, x, eps, dt, path_seed(seed, p)));
  return est;
}

inline MCEstimate u_eps_estimate(const FieldRealization& field, const InitialCondition& f, double t,
                                 std::span<const double> x, double eps, std::size_t n_paths,
                                 double dt, std::uint64_t seed, std::size_t first_path = 0) {
  return std::visit(
      [&](const auto& V) { return u_eps_estimate(V, f, t, x, eps, n_paths, dt, seed, first_path); },
      field);
}

/// Per-path functionals of the Itô decomposition X = R + M.
struct PathFunctionals {
  double X = 0.0;   // ε∫V ds (trapezoid)
  double R = 0.0;   // ε∫λΦ ds − εΦ(end) + εΦ(start)
  double M = 0.0;   // ε Σ ∇Φ·ΔB (left point)
  double M_tilde = 0.0;  // εξ·B_T + M
  double QV = 0.0;       // ⟨M̃⟩_t
  /// ε²∫(|∇Φ|² − σ_λ²) ds.
  double qv_gap_gradient = 0.0;
  /// 2ε²∫ξ·∇Φ ds.
  double qv_gap_cross = 0.0;
  double residual() const { return X - R - M; }
  /// ⟨M̃⟩_t − (|ξ|² + σ_λ²)t.
  double qv_gap() const { return qv_gap_gradient + qv_gap_cross; }
};

/// Decompose the path functional for one Brownian path of horizon t/ε².
///
/// `sigma_l2` is σ_λ² for the corrector's λ, which must equal ε².
template <class Corrector>
PathFunctionals martingale_decomposition(const Corrector& ev, const BrownianPath& path,
                                         std::span<const double> x, double eps,
                                         std::span<const double> xi, double sigma_l2) {
  const double lambda = ev.lambda();
  if (std::abs(lambda - eps * eps) > 1e-12 * eps * eps)
    throw std::invalid_argument("martingale_decomposition: lambda must equal eps^2");
  const int d = path.dimension;
  if (int(x.size()) != d || int(xi.size()) != d)
    throw std::invalid_argument("martingale_decomposition: dimension mismatch");
  const double h = path.dt;
  const double t = path.horizon() * eps * eps;
  std::vector<double> y(d), grad(d), b(d, 0.0);
  for (int k = 0; k < d; ++k) y[k] = x[k] / eps;

  double int_V = 0.0, int_phi = 0.0, int_g2 = 0.0, int_xg = 0.0, ito = 0.0;
  double V = 0.0, phi = 0.0, phi0 = 0.0;
  for (std::size_t i = 0; i <= path.steps; ++i) {
    ev.eval_all(std::span<const double>(y), V, phi, std::span<double>(grad));
    const double w = (i == 0 || i == path.steps) ? 0.5 : 1.0;
    double g2 = 0.0, xg = 0.0;
    for (int k = 0; k < d; ++k) {
      g2 += grad[k] * grad[k];
      xg += xi[k] * grad[k];
    }
    int_V += w * V;
    int_phi += w * phi;
    int_g2 += w * g2;
    int_xg += w * xg;
    if (i == 0) phi0 = phi;
    if (i < path.steps) {
      const auto db = path.increment(i);
      for (int k = 0; k < d; ++k) {
        ito += grad[k] * db[k];
        y[k] += db[k];
        b[k] += db[k];
      }
    }
  }
  const double e2 = eps * eps;
  PathFunctionals out;
  out.X = eps * h * int_V;
  out.R = eps * lambda * h * int_phi - eps * phi + eps * phi0;
  out.M = eps * ito;
  double xb = 0.0, xi2 = 0.0;
  for (int k = 0; k < d; ++k) {
    xb += xi[k] * b[k];
    xi2 += xi[k] * xi[k];
  }
  out.M_tilde = eps * xb + out.M;
  out.qv_gap_gradient = e2 * h * int_g2 - sigma_l2 * t;
  out.qv_gap_cross = 2.0 * e2 * h * int_xg;
  out.QV = (xi2 + sigma_l2) * t + out.qv_gap();
  return out;
}

/// Monte Carlo of v_ε(t,x) = E_B{f(x+B_t) e^{−σ²t/2} i ε^{−3/2} ∫₀ᵗ V((x+B_s)/ε) ds}.
template <class Field>
MCEstimate v_eps_estimate(const Field& V, const InitialCondition& f, double t,
                          std::span<const double> x, double eps, double sigma2,
                          std::size_t n_paths, double dt, std::uint64_t seed) {
  const int d = int(x.size());
  if (d != 3) throw std::invalid_argument("v_eps_estimate: the eps^{-3/2} scaling needs d = 3");
  if (n_paths == 0) throw std::invalid_argument("v_eps_estimate: need at least one path");
  const std::size_t n = step_count(t, dt);
  const double h = t / double(n);
  const double sd = std::sqrt(h);
  const double pref = std::exp(-0.5 * sigma2 * t) * std::pow(eps, -1.5);
  MCEstimate est;
  std::vector<double> b(d), y(d);
  for (std::size_t p = 0; p < n_paths; ++p) {
    Rng rng(path_seed(seed, p));
    for (int k = 0; k < d; ++k) {
      b[k] = x[k];
      y[k] = b[k] / eps;
    }
    double integral = 0.5 * V(std::span<const double>(y));
    for (std::size_t i = 1; i <= n; ++i) {
      for (int k = 0; k < d; ++k) {
        b[k] += sd * rng.normal();
        y[k] = b[k] / eps;
      }
      const double v = V(std::span<const double>(y));
      integral += i == n ? 0.5 * v : v;
    }
    est.add(std::complex<double>(0.0, pref * f(b) * h * integral));
  }
  return est;
}

inline MCEstimate v_eps_estimate(const FieldRealization& field, const InitialCondition& f, double t,
                                 std::span<const double> x, double eps, double sigma2,
                                 std::size_t n_paths, double dt, std::uint64_t seed) {
  return std::visit(
      [&](const auto& V) { return v_eps_estimate(V, f, t, x, eps, sigma2, n_paths, dt, seed); },
      field);
}

/// v_ε(t,x) for a Gaussian realization with the Brownian expectation done exactly
/// mode by mode (no inner sampling error).
inline std::complex<double> v_eps_exact(const GaussianFieldRealization& field,
                                        const InitialCondition& f, double t,
                                        std::span<const double> x, double eps, double sigma2) {
  const int d = field.dimension();
  if (d != 3) throw std::invalid_argument("v_eps_exact: the eps^{-3/2} scaling needs d = 3");
  const std::size_t J = field.modes();
  const double pref = std::exp(-0.5 * sigma2 * t) * std::pow(eps, -1.5);
  double total = 0.0;
  if (f.kind == InitialCondition::Kind::constant) {
    for (std::size_t j = 0; j < J; ++j) {
      double kx = field.phase(j);
      for (int k = 0; k < d; ++k) kx += field.freq(j, k) * x[k] / eps;
      const double a = 0.5 * field.freq_norm_sq(j) / (eps * eps);
      const double time = a * t < 1e-8 ? t * (1.0 - 0.5 * a * t) : -std::expm1(-a * t) / a;
      total += field.weight(j) * std::cos(kx) * time;
    }
    return {0.0, pref * f.value * total};
  }
  // E[f(x+B_t) e^{iκ·(x+B_s)}] = (q_t⋆f)(x) exp(−|κ|²v_s/2 − iκ·z s/T) e^{iκ·x},
  // z = x − c, T = w² + t, v_s = s(T − s)/T.
  const double heat = f.heat(t, x);
  const double T = f.width * f.width + t;
  for (std::size_t j = 0; j < J; ++j) {
    double kx = field.phase(j), kz = 0.0;
    for (int k = 0; k < d; ++k) {
      const double kap = field.freq(j, k) / eps;
      const double c = k < int(f.center.size()) ? f.center[k] : 0.0;
      kx += kap * x[k];
      kz += kap * (x[k] - c);
    }
    const double k2 = field.freq_norm_sq(j) / (eps * eps);
    auto integrand = [&](double s) {
      const double vs = s * (T - s) / T;
      return std::exp(-0.5 * k2 * vs) * std::cos(kx - kz * s / T);
    };
    std::vector<double> br{0.0};
    const double s0 = k2 > 0.0 ? 2.0 / k2 : t;
    for (double s = s0; s < t; s *= 4.0) br.push_back(s);
    br.push_back(t);
    total += field.weight(j) * quad::integrate_pieces(integrand, br, 1e-9, 12);
  }
  return {0.0, pref * heat * total};
}

struct DualityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  /// 95% half-width of lhs − rhs (common random numbers).
  double ci = 0.0;
};

/// Σ_k E{f(B_t) ∫ g_k(B_s) dB^k} against Σ_k E{∂_k f(B_t) ∫ g_k(B_s) ds}.
///
/// Left-point sums make both sides agree exactly in expectation at any step.
template <class F, class GradF, class G>
DualityResult malliavin_duality_check(F&& f, GradF&& grad_f, G&& g, int d, double t,
                                      std::size_t steps, std::size_t N, std::uint64_t seed) {
  if (N < 2 || steps == 0) throw std::invalid_argument("duality: need N >= 2 and steps >= 1");
  const double h = t / double(steps);
  const double sd = std::sqrt(h);
  std::vector<double> b(d), gv(d), gi(d), db(d), grad(d);
  MCEstimate l, r, diff;
  for (std::size_t n = 0; n < N; ++n) {
    Rng rng(path_seed(seed, n));
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(gi.begin(), gi.end(), 0.0);
    double ito = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
      g(std::span<const double>(b), std::span<double>(gv));
      for (int k = 0; k < d; ++k) {
        db[k] = sd * rng.normal();
        ito += gv[k] * db[k];
        gi[k] += gv[k] * h;
        b[k] += db[k];
      }
    }
    const double fv = f(std::span<const double>(b));
    grad_f(std::span<const double>(b), std::span<double>(grad));
    double rv = 0.0;
    for (int k = 0; k < d; ++k) rv += grad[k] * gi[k];
    const double lv = fv * ito;
    l.add(lv);
    r.add(rv);
    diff.add(lv - rv);
  }
  return {l.mean().real(), r.mean().real(), diff.ci()};
}

/// A random time change s ↦ ⟨M⟩_s on a uniform grid of [0, 1].
struct QVProfile {
  std::string name;
  /// Fill values[i] = ⟨M⟩ at s = i/(values.size() − 1).
  std::function<void(Rng&, std::span<double>)> sample;
};

struct MCLTRow {
  std::string name;
  double lhs = 0.0;
  double lhs_ci = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  /// Standard error of the plain E f(W₁) estimate.
  double noise_floor = 0.0;
};

/// For M_t = W_{⟨M⟩_t}, f = e^{ix}: |E f(M₁) − f(W₁) − ½f''(M_τ)(⟨M⟩₁ − 1)| against
/// E|⟨M⟩₁ − 1|^{3/2}, with τ = sup{s : ⟨M⟩_s ≤ 1} located on the grid.
inline std::vector<MCLTRow> mclt_bound_check(const std::vector<QVProfile>& profiles,
                                             std::size_t grid, std::size_t N,
                                             std::uint64_t seed) {
  if (grid < 2 || N < 2) throw std::invalid_argument("mclt: need grid >= 2 and N >= 2");
  std::vector<MCLTRow> rows;
  std::vector<double> qv(grid + 1);
  for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
    const auto& prof = profiles[pi];
    MCEstimate z, plain;
    double rhs = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      Rng rng(derive_seed(seed, StreamTag::path, {pi, n}));
      prof.sample(rng, qv);
      if (qv[0] < 0.0) throw std::invalid_argument("mclt: profile must start at >= 0");
      for (std::size_t i = 1; i <= grid; ++i)
        if (qv[i] < qv[i - 1]) throw std::invalid_argument("mclt: profile is not monotone");
      const double q1 = qv[grid];
      // Last grid time with ⟨M⟩ ≤ 1.
      const auto it = std::upper_bound(qv.begin(), qv.end(), 1.0);
      const double q_tau = it == qv.begin() ? 0.0 : *(it - 1);
      // W at the sorted times q_tau ≤ 1 and q1, shared by M and W.
      double times[3] = {q_tau, 1.0, q1};
      double vals[3];
      int order[3] = {0, 1, 2};
      std::sort(order, order + 3, [&](int a, int b) { return times[a] < times[b]; });
      double w = 0.0, last = 0.0;
      for (int oi : order) {
        const double dtw = times[oi] - last;
        if (dtw > 0.0) w += std::sqrt(dtw) * rng.normal();
        vals[oi] = w;
        last = std::max(last, times[oi]);
      }
      const std::complex<double> fM1 = std::polar(1.0, vals[2]);
      const std::complex<double> fW1 = std::polar(1.0, vals[1]);
      const std::complex<double> fMt = std::polar(1.0, vals[0]);
      z.add(fM1 - fW1 + 0.5 * fMt * (q1 - 1.0));
      plain.add(fW1);
      rhs += std::pow(std::abs(q1 - 1.0), 1.5);
    }
    MCLTRow row;
    row.name = prof.name;
    row.lhs = std::abs(z.mean());
    row.lhs_ci = z.ci();
    row.rhs = rhs / double(N);
    row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : 0.0;
    row.noise_floor = plain.std_error();
    rows.push_back(row);
  }
  return rows;
}

/// Standard profile family: identity, deterministic (1+δ)s, and random slopes.
inline std::vector<QVProfile> default_qv_profiles() {
  std::vector<QVProfile> p;
  auto linear = [](double slope, std::span<double> v) {
    const double n = double(v.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = slope * double(i) / n;
  };
  p.push_back({"identity", [=](Rng&, std::span<double> v) { linear(1.0, v); }});
  for (double delta : {0.05, 0.1, 0.2}) {
    p.push_back({"deterministic_delta_" + std::to_string(delta).substr(0, 4),
                 [=](Rng&, std::span<double> v) { linear(1.0 + delta, v); }});
  }
  p.push_back({"uniform_slope_0.1", [=](Rng& r, std::span<double> v) {
                 linear(1.0 + 0.1 * (r.uniform() - 0.5), v);
               }});
  // Piecewise-constant random rate: a genuinely time-inhomogeneous clock.
  p.push_back({"random_rate_0.2", [](Rng& r, std::span<double> v) {
                 const std::size_t n = v.size() - 1;
                 const double rate1 = 1.0 + 0.2 * (r.uniform() - 0.5);
                 const double rate2 = 1.0 + 0.2 * (r.uniform() - 0.5);
                 v[0] = 0.0;
                 for (std::size_t i = 1; i <= n; ++i)
                   v[i] = v[i - 1] + (2 * i <= n ? rate1 : rate2) / double(n);
               }});
  return p;
}

struct ResidualLevel {
  double dt = 0.0;
  double rms_residual = 0.0;
  double mean_abs_R = 0.0;
};

struct ResidualStudy {
  std::vector<ResidualLevel> levels;
  /// Slope of log RMS residual against log dt.
  double order = 0.0;
};

/// Discrete Itô residual |X − R − M| on nested Brownian-bridge refinements of the same paths.
template <class Corrector>
ResidualStudy residual_order_study(const Corrector& ev, std::span<const double> x, double t,
                                   double eps, double dt0, int refinements, std::size_t n_paths,
                                   std::uint64_t seed, double sigma_l2) {
  const int d = int(x.size());
  std::vector<double> xi(d, 0.0);
  ResidualStudy out;
  out.levels.resize(std::size_t(refinements) + 1);
  std::vector<double> sq(out.levels.size(), 0.0), absr(out.levels.size(), 0.0);
  for (std::size_t p = 0; p < n_paths; ++p) {
    BrownianPath path = simulate_brownian(t / (eps * eps), dt0, path_seed(seed, p), d);
    for (std::size_t l = 0; l < out.levels.size(); ++l) {
      if (l > 0) path = refine(path);
      const auto pf = martingale_decomposition(ev, path, x, eps, xi, sigma_l2);
      sq[l] += pf.residual() * pf.residual();
      absr[l] += std::abs(pf.R);
      out.levels[l].dt = path.dt;
    }
  }
  std::vector<double> lx, ly;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    out.levels[l].rms_residual = std::sqrt(sq[l] / double(n_paths));
    out.levels[l].mean_abs_R = absr[l] / double(n_paths);
    lx.push_back(std::log(out.levels[l].dt));
    ly.push_back(std::log(out.levels[l].rms_residual));
  }
  if (out.levels.size() >= 2) out.order = stats::least_squares(lx, ly).slope;
  return out;
}

}  // namespace homfluct
