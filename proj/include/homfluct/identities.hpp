#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mc_estimate.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace homfluct {

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  std::vector<double> lo, hi;
  int dimension() const { return int(lo.size()); }
  double volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
    return v;
  }
};

using BoxFunction = std::function<double(std::span<const double>)>;

struct PoissonMomentResult {
  std::complex<double> closed_form;
  MCEstimate mc;
};

namespace detail {

// Calls fn(point, weight) over a tensor Gauss-Legendre grid of the box.
template <class Fn>
void tensor_quadrature(const Box& box, int panels, Fn&& fn) {
  const int d = box.dimension();
  std::vector<quad::Rule> rules;
  for (int k = 0; k < d; ++k) rules.push_back(quad::gauss_legendre(box.lo[k], box.hi[k], panels));
  const std::size_t n = rules[0].nodes.size();
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x[k] = rules[k].nodes[idx[k]];
      w *= rules[k].weights[idx[k]];
    }
    fn(std::span<const double>(x), w);
    int k = 0;
    while (k < d && ++idx[k] == n) idx[k++] = 0;
    if (k == d) break;
  }
}

// True when every h vanishes on a grid of points covering the box surface.
inline bool vanishes_on_boundary(const Box& box, const std::vector<const BoxFunction*>& hs) {
  const int d = box.dimension();
  const int m = 9;
  std::vector<double> x(d);
  std::vector<int> idx(d, 0);
  while (true) {
    bool on_face = false;
    for (int k = 0; k < d; ++k) {
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * double(idx[k]) / double(m - 1);
      on_face = on_face || idx[k] == 0 || idx[k] == m - 1;
    }
    if (on_face)
      for (const auto* h : hs)
        if (std::abs((*h)(x)) > 1e-12) return false;
    int k = 0;
    while (k < d && ++idx[k] == m) idx[k++] = 0;
    if (k == d) break;
  }
  return true;
}

}  // namespace detail

/// E{e^{i∫h₁dω} ∫h₂dω ∫h₃dω} for a unit-intensity Poisson measure ω on `box`:
/// closed form exp(∫(e^{ih₁}−1))·(∫e^{ih₁}h₂h₃ + ∫e^{ih₁}h₂·∫e^{ih₁}h₃) by tensor
/// quadrature, and a Monte Carlo estimate over N realizations of ω.
inline PoissonMomentResult poisson_moment_identity(const BoxFunction& h1, const BoxFunction& h2,
                                                   const BoxFunction& h3, const Box& box,
                                                   std::size_t N, std::uint64_t seed,
                                                   int panels = 4) {
  if (!detail::vanishes_on_boundary(box, {&h1, &h2, &h3}))
    throw std::invalid_argument("poisson moment: functions do not vanish on the box boundary");
  using C = std::complex<double>;
  C a{0.0}, b{0.0}, c2{0.0}, c3{0.0};
  detail::tensor_quadrature(box, panels, [&](std::span<const double> x, double w) {
    const double v1 = h1(x), v2 = h2(x), v3 = h3(x);
    const C e = std::polar(1.0, v1);
    a += w * (e - 1.0);
    b += w * e * v2 * v3;
    c2 += w * e * v2;
    c3 += w * e * v3;
  });
  PoissonMomentResult out;
  out.closed_form = std::exp(a) * (b + c2 * c3);

  const int d = box.dimension();
  const double vol = box.volume();
  std::vector<double> y(d);
  for (std::size_t n = 0; n < N; ++n) {
    Rng rng(derive_seed(seed, StreamTag::identity, {n}));
    const auto count = rng.poisson(vol);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::uint64_t p = 0; p < count; ++p) {
      for (int k = 0; k < d; ++k) y[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * rng.uniform();
      s1 += h1(y);
      s2 += h2(y);
      s3 += h3(y);
    }
    out.mc.add(std::polar(1.0, s1) * (s2 * s3));
  }
  return out;
}

namespace detail {
inline void check_psd(const Eigen::Matrix4d& S) {
  if (!S.isApprox(S.transpose(), 1e-12)) throw std::invalid_argument("Sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(S);
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw std::invalid_argument("Sigma is not positive semidefinite");
}
}  // namespace detail

/// E{(e^{iN₁} − c)(e^{iN₂} − c) N₃ N₄}, c = e^{−σ²t/2}, for centered Gaussian N ~ (0, Σ).
inline std::complex<double> gaussian_fourth_moment(const Eigen::Matrix4d& S, double sigma2t) {
  detail::check_psd(S);
  const double c = std::exp(-0.5 * sigma2t);
  const double e1 = std::exp(-0.5 * S(0, 0));
  const double e2 = std::exp(-0.5 * S(1, 1));
  const double e12 = std::exp(-0.5 * S(0, 0) - 0.5 * S(1, 1) - S(0, 1));
  const double v = S(2, 0) * S(3, 0) * (c * e1 - e12) + S(2, 1) * S(3, 1) * (c * e2 - e12) -
                   S(2, 1) * S(3, 0) * e12 - S(2, 0) * S(3, 1) * e12 +
                   S(2, 3) * (c * c + e12 - c * e1 - c * e2);
  return {v, 0.0};
}

/// Monte Carlo of the same expectation.
inline MCEstimate gaussian_fourth_moment_mc(const Eigen::Matrix4d& S, double sigma2t,
                                            std::size_t N, std::uint64_t seed) {
  detail::check_psd(S);
  // Symmetric square root handles singular Σ.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(S);
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix4d L = es.eigenvectors() * ev.asDiagonal();
  const double c = std::exp(-0.5 * sigma2t);
  MCEstimate est;
  Rng rng(derive_seed(seed, StreamTag::identity, {}));
  Eigen::Vector4d z;
  for (std::size_t n = 0; n < N; ++n) {
    for (int k = 0; k < 4; ++k) z[k] = rng.normal();
    const Eigen::Vector4d x = L * z;
    est.add((std::polar(1.0, x[0]) - c) * (std::polar(1.0, x[1]) - c) * (x[2] * x[3]));
  }
  return est;
}

}  // namespace homfluct
