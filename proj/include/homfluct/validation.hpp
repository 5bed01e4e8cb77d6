#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "feynman_kac.hpp"
#include "identities.hpp"
#include "rng.hpp"

namespace homfluct {

/// One exact-identity comparison: |expected − observed| ≤ 4·ci.
struct IdentityCheck {
  std::string name;
  std::complex<double> expected;
  std::complex<double> observed;
  double ci = 0.0;
  bool pass = false;
};

inline IdentityCheck make_check(std::string name, std::complex<double> expected,
                                std::complex<double> observed, double ci) {
  return {std::move(name), expected, observed, ci, std::abs(expected - observed) <= 4.0 * ci};
}

/// Random PSD 4×4 matrix with entries in [−0.3, 0.3].
inline Eigen::Matrix4d random_psd(Rng& rng) {
  Eigen::Matrix4d B;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) B(i, j) = 2.0 * rng.uniform() - 1.0;
  Eigen::Matrix4d S = B * B.transpose();
  return S * (0.3 / S.cwiseAbs().maxCoeff());
}

inline std::vector<IdentityCheck> poisson_moment_checks(std::size_t N, std::uint64_t seed) {
  std::vector<IdentityCheck> out;
  const Box unit{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  auto bump = [](double a) {
    return BoxFunction([a](std::span<const double> y) {
      double v = a;
      for (double c : y) v *= std::pow(std::sin(std::numbers::pi * c), 2);
      return v;
    });
  };
  {
    const BoxFunction zero = [](std::span<const double>) { return 0.0; };
    const Box big{{-0.5, -0.5, -0.5}, {1.5, 1.5, 1.5}};
    const BoxFunction ind = [](std::span<const double> y) {
      for (double c : y)
        if (c < 0.0 || c > 1.0) return 0.0;
      return 1.0;
    };
    const auto r = poisson_moment_identity(zero, ind, ind, big, N, derive_seed(seed, {1}));
    out.push_back(make_check("poisson_moment_count", r.closed_form, r.mc.mean(), r.mc.ci()));
  }
  {
    const auto h = bump(0.5);
    const auto r = poisson_moment_identity(h, h, h, unit, N, derive_seed(seed, {2}));
    out.push_back(make_check("poisson_moment_bump", r.closed_form, r.mc.mean(), r.mc.ci()));
  }
  {
    const auto h1 = bump(2.0);
    const BoxFunction h2 = [b = bump(1.0)](std::span<const double> y) { return b(y) * (y[0] - 0.3); };
    const BoxFunction h3 = [b = bump(1.5)](std::span<const double> y) { return b(y) * y[1]; };
    const auto r = poisson_moment_identity(h1, h2, h3, unit, N, derive_seed(seed, {3}));
    out.push_back(make_check("poisson_moment_mixed", r.closed_form, r.mc.mean(), r.mc.ci()));
  }
  return out;
}

inline std::vector<IdentityCheck> gaussian_moment_checks(std::size_t N, std::uint64_t seed,
                                                         int trials = 3) {
  std::vector<IdentityCheck> out;
  Rng rng(derive_seed(seed, StreamTag::identity, {0xfeed}));
  for (int k = 0; k < trials; ++k) {
    const Eigen::Matrix4d S = random_psd(rng);
    const auto cf = gaussian_fourth_moment(S, S(0, 0));
    const auto mc = gaussian_fourth_moment_mc(S, S(0, 0), N, derive_seed(seed, {std::uint64_t(k)}));
    out.push_back(make_check("gaussian_fourth_moment_" + std::to_string(k), cf, mc.mean(), mc.ci()));
  }
  return out;
}

inline std::vector<IdentityCheck> duality_checks(std::size_t N, std::uint64_t seed) {
  std::vector<IdentityCheck> out;
  {
    auto f = [](std::span<const double> b) { return b[0]; };
    auto gf = [](std::span<const double>, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
      g[0] = 1.0;
    };
    auto g = [](std::span<const double>, std::span<double> v) {
      std::fill(v.begin(), v.end(), 0.0);
      v[0] = 1.0;
    };
    const auto r = malliavin_duality_check(f, gf, g, 3, 1.0, 20, N, derive_seed(seed, {1}));
    out.push_back(make_check("duality_linear", r.lhs, r.rhs, r.ci));
  }
  {
    const auto bump = InitialCondition::gaussian_bump({0.2, -0.1, 0.3}, 1.0, 1.0);
    auto f = [&](std::span<const double> b) { return bump(b); };
    auto gf = [&](std::span<const double> b, std::span<double> g) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = bump.partial(b, k);
    };
    auto g = [](std::span<const double> b, std::span<double> v) {
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sin(b[k]);
    };
    const auto r = malliavin_duality_check(f, gf, g, 3, 1.0, 50, N, derive_seed(seed, {2}));
    out.push_back(make_check("duality_bump_sine", r.lhs, r.rhs, r.ci));
  }
  return out;
}

struct MCLTSummary {
  std::vector<MCLTRow> rows;
  double max_ratio = 0.0;
  /// identity profile: LHS / noise floor
  double identity_lhs_over_noise = 0.0;
  bool pass = false;
};

inline MCLTSummary mclt_summary(std::size_t N, std::uint64_t seed, std::size_t grid = 200) {
  MCLTSummary s;
  s.rows = mclt_bound_check(default_qv_profiles(), grid, N, seed);
  bool ok = true;
  for (const auto& r : s.rows) {
    if (r.name == "identity") {
      s.identity_lhs_over_noise = r.lhs / r.noise_floor;
      ok = ok && r.lhs < 3.0 * r.noise_floor;
    } else {
      s.max_ratio = std::max(s.max_ratio, r.ratio);
      ok = ok && std::isfinite(r.ratio) && r.ratio <= 2.0;
    }
  }
  s.pass = ok;
  return s;
}

}  // namespace homfluct
