#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "homfluct/feynman_kac.hpp"
#include "homfluct/parallel.hpp"

using namespace homfluct;

namespace {

const std::vector<double> origin3{0.0, 0.0, 0.0};

GaussianFieldRealization test_field(std::size_t J, std::uint64_t seed) {
  return make_gaussian_field(SpectrumModel::gaussian_bump(3, 1.0, 1.0), J, seed);
}

}  // namespace

TEST(Paths, HorizonAndStepCount) {
  const auto p = simulate_brownian(1.0, 0.3, 4, 3);
  EXPECT_EQ(p.steps, 4u);
  EXPECT_DOUBLE_EQ(p.horizon(), 1.0);
  EXPECT_LE(p.dt, 0.3);
  EXPECT_EQ(step_count(1.0, 0.25), 4u);
  EXPECT_EQ(step_count(1e-3, 0.25), 1u);
  const auto q = simulate_path(1.0, 0.1, 0.05, 4, 3);
  EXPECT_NEAR(q.horizon(), 100.0, 1e-12);
  EXPECT_EQ(q.steps, 2000u);
}

TEST(Paths, RejectsBadArguments) {
  EXPECT_THROW(simulate_brownian(0.0, 0.1, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_brownian(1.0, 0.0, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_brownian(1.0, 0.1, 1, 0), std::invalid_argument);
  EXPECT_THROW(simulate_path(1.0, 0.1, 0.5, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_path(1.0, 0.0, 0.05, 1, 3), std::invalid_argument);
}

TEST(Paths, SeedDeterminesPath) {
  const auto a = simulate_brownian(2.0, 0.01, 99, 3);
  const auto b = simulate_brownian(2.0, 0.01, 99, 3);
  const auto c = simulate_brownian(2.0, 0.01, 100, 3);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.increments, c.increments);
}

TEST(Paths, IncrementVariance) {
  const auto p = simulate_brownian(1000.0, 0.01, 5, 3);
  double s = 0.0, s2 = 0.0;
  for (double v : p.increments) {
    s += v;
    s2 += v * v;
  }
  const double n = double(p.increments.size());
  EXPECT_NEAR(s / n, 0.0, 4.0 * std::sqrt(p.dt / n));
  // Var of the sample second moment is 2dt²/n.
  EXPECT_NEAR(s2 / n, p.dt, 4.0 * p.dt * std::sqrt(2.0 / n));
}

TEST(Paths, RefinementKeepsCoarseGrid) {
  const auto p = simulate_brownian(5.0, 0.1, 6, 3);
  const auto q = refine(p);
  ASSERT_EQ(q.steps, 2 * p.steps);
  EXPECT_DOUBLE_EQ(q.dt, 0.5 * p.dt);
  for (std::size_t i = 0; i < p.steps; ++i)
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(q.increments[2 * i * 3 + k] + q.increments[(2 * i + 1) * 3 + k],
                  p.increments[i * 3 + k], 1e-14);
  const auto ep = p.endpoint(), eq = q.endpoint();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(ep[k], eq[k], 1e-12);
  EXPECT_EQ(q.positions().size(), (q.steps + 1) * 3);
}

TEST(Paths, RefinedIncrementVariance) {
  auto p = simulate_brownian(400.0, 0.04, 7, 3);
  p = refine(refine(p));
  double s2 = 0.0;
  for (double v : p.increments) s2 += v * v;
  const double n = double(p.increments.size());
  EXPECT_NEAR(s2 / n, p.dt, 4.0 * p.dt * std::sqrt(2.0 / n));
}

TEST(UEps, ZeroPotentialConstantDataIsExact) {
  const auto V = GaussianFieldRealization::zero(3);
  const auto e = u_eps_estimate(V, InitialCondition::constant(2.5), 1.0, origin3, 0.2, 50, 0.05, 1);
  EXPECT_EQ(e.mean(), std::complex<double>(2.5, 0.0));
  EXPECT_EQ(e.variance(), 0.0);
}

TEST(UEps, ZeroPotentialGivesHeatSemigroup) {
  const auto V = GaussianFieldRealization::zero(3);
  const auto f = InitialCondition::gaussian_bump({0.3, 0.0, 0.0}, 1.0, 1.0);
  const std::vector<double> x{0.1, 0.2, -0.1};
  const auto e = u_eps_estimate(V, f, 1.0, x, 0.5, 40000, 0.05, 2);
  const HomogenizedModel m(0.0, 3, f);
  EXPECT_LE(std::abs(e.mean() - std::complex<double>(u_hom(m, 1.0, x), 0.0)), 4.0 * e.ci());
}

TEST(UEps, BoundedBySupremum) {
  const auto V = test_field(64, 3);
  const auto f = InitialCondition::gaussian_bump({0, 0, 0}, 0.8, 1.7);
  for (std::size_t p = 0; p < 200; ++p) {
    const auto z = feynman_kac_sample(V, f, 1.0, origin3, 0.3, 0.05, path_seed(9, p));
    EXPECT_LE(std::abs(z), f.sup() * (1.0 + 1e-14));
  }
}

TEST(UEps, SampleMatchesExplicitPath) {
  const auto V = test_field(32, 4);
  const auto f = InitialCondition::gaussian_bump({0.2, 0, 0}, 1.0, 1.0);
  const std::vector<double> x{0.1, -0.3, 0.2};
  const double t = 1.0, eps = 0.3, dt = 0.05;
  const std::uint64_t seed = path_seed(10, 3);
  const auto path = simulate_path(t, eps, dt, seed, 3);
  const auto pos = path.positions();
  double integral = 0.0;
  std::vector<double> y(3);
  for (std::size_t i = 0; i <= path.steps; ++i) {
    for (int k = 0; k < 3; ++k) y[k] = x[k] / eps + pos[i * 3 + k];
    integral += (i == 0 || i == path.steps ? 0.5 : 1.0) * V(y);
  }
  integral *= path.dt;
  std::vector<double> end(3);
  for (int k = 0; k < 3; ++k) end[k] = x[k] + eps * pos[path.steps * 3 + k];
  const auto expected = f(end) * std::polar(1.0, eps * integral);
  const auto z = feynman_kac_sample(V, f, t, x, eps, dt, seed);
  EXPECT_NEAR(std::abs(z - expected), 0.0, 1e-12);
}

TEST(UEps, PathRangesComposeExactly) {
  const FieldRealization V = test_field(32, 5);
  const auto f = InitialCondition::constant(1.0);
  auto a = u_eps_estimate(V, f, 1.0, origin3, 0.4, 7, 0.05, 11, 0);
  const auto b = u_eps_estimate(V, f, 1.0, origin3, 0.4, 5, 0.05, 11, 7);
  const auto c = u_eps_estimate(V, f, 1.0, origin3, 0.4, 12, 0.05, 11, 0);
  a.merge(b);
  EXPECT_EQ(a.count(), c.count());
  EXPECT_NEAR(std::abs(a.mean() - c.mean()), 0.0, 1e-15);
  EXPECT_NEAR(a.variance(), c.variance(), 1e-14);
}

TEST(UEps, RejectsBadArguments) {
  const auto V = test_field(8, 6);
  const auto f = InitialCondition::constant(1.0);
  EXPECT_THROW(u_eps_estimate(V, f, 0.0, origin3, 0.3, 5, 0.05, 1), std::invalid_argument);
  EXPECT_THROW(u_eps_estimate(V, f, 1.0, origin3, 0.0, 5, 0.05, 1), std::invalid_argument);
  EXPECT_THROW(u_eps_estimate(V, f, 1.0, origin3, 0.3, 0, 0.05, 1), std::invalid_argument);
}

TEST(UEps, WorkerCountDoesNotChangeResults) {
  const FieldRealization V = test_field(32, 7);
  const auto f = InitialCondition::gaussian_bump({0, 0, 0}, 1.0, 1.0);
  auto run = [&](unsigned workers) {
    std::vector<std::complex<double>> out(6);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      out[i] = u_eps_estimate(V, f, 1.0, origin3, 0.4, 20, 0.05, derive_seed(12, {i})).mean();
    });
    return out;
  };
  EXPECT_EQ(run(1), run(3));
}

TEST(Decomposition, ZeroFieldGivesZeroFunctionals) {
  const GaussianCorrector c(GaussianFieldRealization::zero(3), 0.09);
  const auto path = simulate_path(1.0, 0.3, 0.05, 1, 3);
  const std::vector<double> xi{0.0, 0.0, 0.0};
  const auto pf = martingale_decomposition(c, path, origin3, 0.3, xi, 0.0);
  EXPECT_EQ(pf.X, 0.0);
  EXPECT_EQ(pf.R, 0.0);
  EXPECT_EQ(pf.M, 0.0);
  EXPECT_EQ(pf.QV, 0.0);
}

TEST(Decomposition, RejectsMismatchedLambda) {
  const GaussianCorrector c(test_field(16, 1), 0.1);
  const auto path = simulate_path(1.0, 0.3, 0.05, 1, 3);
  const std::vector<double> xi{0.0, 0.0, 0.0};
  EXPECT_THROW(martingale_decomposition(c, path, origin3, 0.3, xi, 0.0), std::invalid_argument);
}

TEST(Decomposition, ResidualShrinksUnderRefinement) {
  const double eps = 0.5;
  const auto spec = SpectrumModel::gaussian_bump(3, 1.0, 1.0);
  const GaussianCorrector c(test_field(64, 13), eps * eps);
  const auto s = residual_order_study(c, origin3, 1.0, eps, 0.1, 4, 40, 14,
                                      sigma_lambda2(spec, eps * eps));
  ASSERT_EQ(s.levels.size(), 5u);
  for (std::size_t l = 1; l < s.levels.size(); ++l) {
    EXPECT_LT(s.levels[l].rms_residual, s.levels[l - 1].rms_residual);
    EXPECT_DOUBLE_EQ(s.levels[l].dt, 0.5 * s.levels[l - 1].dt);
  }
  EXPECT_GT(s.order, 0.4);
}

TEST(Decomposition, ItoIsometryForModifiedMartingale) {
  // E M̃² = E⟨M̃⟩ and E M̃ = 0 over paths, for one frozen realization.
  const double eps = 0.5;
  const auto spec = SpectrumModel::gaussian_bump(3, 1.0, 1.0);
  const GaussianCorrector c(test_field(64, 15), eps * eps);
  const std::vector<double> xi{0.3, -0.2, 0.1};
  const double sl2 = sigma_lambda2(spec, eps * eps);
  MCEstimate m, sq, qv;
  for (std::size_t p = 0; p < 3000; ++p) {
    const auto path = simulate_path(1.0, eps, 0.02, path_seed(16, p), 3);
    const auto pf = martingale_decomposition(c, path, origin3, eps, xi, sl2);
    m.add(pf.M_tilde);
    sq.add(pf.M_tilde * pf.M_tilde);
    qv.add(pf.QV);
  }
  EXPECT_LE(std::abs(m.mean().real()), 4.0 * m.std_error());
  const double se = std::hypot(sq.std_error(), qv.std_error());
  EXPECT_LE(std::abs(sq.mean().real() - qv.mean().real()), 4.0 * se);
}

TEST(VEps, EstimateMatchesExactForConstantData) {
  const auto V = test_field(64, 17);
  const auto f = InitialCondition::constant(1.0);
  const double s2 = 0.25;
  const auto exact = v_eps_exact(V, f, 1.0, origin3, 0.4, s2);
  EXPECT_EQ(exact.real(), 0.0);
  const auto e = v_eps_estimate(V, f, 1.0, origin3, 0.4, s2, 4000, 1e-3, 18);
  EXPECT_LE(std::abs(e.mean() - exact), 4.0 * e.ci() + 0.01 * std::abs(exact));
}

TEST(VEps, EstimateMatchesExactForBump) {
  const auto V = test_field(64, 19);
  const auto f = InitialCondition::gaussian_bump({0.3, 0.0, 0.0}, 1.0, 1.0);
  const std::vector<double> x{0.1, 0.0, -0.2};
  const auto exact = v_eps_exact(V, f, 1.0, x, 0.4, 0.25);
  const auto e = v_eps_estimate(V, f, 1.0, x, 0.4, 0.25, 4000, 1e-3, 20);
  EXPECT_LE(std::abs(e.mean() - exact), 4.0 * e.ci() + 0.01 * std::abs(exact));
}

TEST(VEps, SingleModeClosedForm) {
  // V = cos(ξ·y): E∫₀ᵗ cos(ξ·B_s/ε) ds = (1 − e^{−at})/a, a = |ξ|²/(2ε²).
  const auto V = GaussianFieldRealization::from_modes(3, {1.0}, {{1.0, 0.0, 0.0}}, {0.0});
  const double eps = 0.5, t = 1.0, a = 0.5 / (eps * eps);
  const double expected = std::pow(eps, -1.5) * (1.0 - std::exp(-a * t)) / a;
  const auto z = v_eps_exact(V, InitialCondition::constant(1.0), t, origin3, eps, 0.0);
  EXPECT_NEAR(z.imag(), expected, 1e-13);
}

TEST(VEps, RejectsOtherDimensions) {
  const auto V = make_gaussian_field(SpectrumModel::gaussian_bump(4, 1.0, 1.0), 8, 1);
  const std::vector<double> x(4, 0.0);
  EXPECT_THROW(v_eps_exact(V, InitialCondition::constant(1.0), 1.0, x, 0.3, 0.0),
               std::invalid_argument);
  EXPECT_THROW(v_eps_estimate(V, InitialCondition::constant(1.0), 1.0, x, 0.3, 0.0, 10, 0.05, 1),
               std::invalid_argument);
}

TEST(Duality, LinearCaseHasDeterministicRightSide) {
  // f(b) = b₁, g = e₁: both sides equal t.
  auto f = [](std::span<const double> b) { return b[0]; };
  auto gf = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = 1.0;
  };
  auto g = [](std::span<const double>, std::span<double> v) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
  };
  const auto r = malliavin_duality_check(f, gf, g, 3, 1.5, 10, 20000, 21);
  EXPECT_NEAR(r.rhs, 1.5, 1e-12);
  EXPECT_LE(std::abs(r.lhs - r.rhs), 4.0 * r.ci);
}

TEST(Duality, NonlinearCase) {
  const auto bump = InitialCondition::gaussian_bump({0.2, -0.1, 0.3}, 1.0, 1.0);
  auto f = [&](std::span<const double> b) { return bump(b); };
  auto gf = [&](std::span<const double> b, std::span<double> g) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = bump.partial(b, k);
  };
  auto g = [](std::span<const double> b, std::span<double> v) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::cos(b[k]);
  };
  const auto r = malliavin_duality_check(f, gf, g, 3, 1.0, 25, 40000, 22);
  EXPECT_LE(std::abs(r.lhs - r.rhs), 4.0 * r.ci);
  EXPECT_GT(std::abs(r.rhs), 2.0 * r.ci);
}

TEST(Duality, RejectsTinySamples) {
  auto f = [](std::span<const double>) { return 0.0; };
  auto gf = [](std::span<const double>, std::span<double>) {};
  auto g = [](std::span<const double>, std::span<double>) {};
  EXPECT_THROW(malliavin_duality_check(f, gf, g, 3, 1.0, 10, 1, 1), std::invalid_argument);
}

TEST(MCLT, IdentityClockIsExact) {
  std::vector<QVProfile> p{default_qv_profiles()[0]};
  const auto rows = mclt_bound_check(p, 200, 1000, 23);
  EXPECT_EQ(rows[0].lhs, 0.0);
  EXPECT_EQ(rows[0].rhs, 0.0);
}

TEST(MCLT, DeterministicClockClosedForm) {
  // M₁ = W_{1+δ}; with f = e^{ix}, E f(W_s) = e^{−s/2}.
  const std::size_t grid = 200;
  for (double delta : {0.05, 0.2}) {
    std::vector<QVProfile> p{{"d", [=](Rng&, std::span<double> v) {
                                for (std::size_t i = 0; i < v.size(); ++i)
                                  v[i] = (1.0 + delta) * double(i) / double(v.size() - 1);
                              }}};
    const auto rows = mclt_bound_check(p, grid, 40000, 24);
    double q_tau = 0.0;
    for (std::size_t i = 0; i <= grid; ++i) {
      const double q = (1.0 + delta) * double(i) / double(grid);
      if (q <= 1.0) q_tau = q;
    }
    const double lhs = std::abs(std::exp(-0.5 * (1.0 + delta)) - std::exp(-0.5) +
                                0.5 * delta * std::exp(-0.5 * q_tau));
    EXPECT_LE(std::abs(rows[0].lhs - lhs), 4.0 * rows[0].lhs_ci) << delta;
    EXPECT_NEAR(rows[0].rhs, std::pow(delta, 1.5), 1e-12);
    EXPECT_LE(rows[0].ratio, 2.0);
  }
}

TEST(MCLT, RejectsNonMonotoneClock) {
  std::vector<QVProfile> p{{"bad", [](Rng&, std::span<double> v) {
                              for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2 ? 0.0 : 1.0;
                            }}};
  EXPECT_THROW(mclt_bound_check(p, 10, 10, 1), std::invalid_argument);
}

TEST(MCEstimateTest, MergeMatchesSinglePass) {
  Rng rng(25);
  MCEstimate all, a, b;
  for (int i = 0; i < 1000; ++i) {
    const std::complex<double> z(rng.normal(), 2.0 * rng.normal());
    all.add(z);
    (i < 400 ? a : b).add(z);
  }
  a.merge(b);
  EXPECT_EQ(a.count(), all.count());
  EXPECT_NEAR(std::abs(a.mean() - all.mean()), 0.0, 1e-14);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
  EXPECT_NEAR(all.variance(), 5.0, 4.0 * 5.0 * std::sqrt(2.0 / 1000.0));
}

TEST(MCEstimateTest, FewSamples) {
  MCEstimate e;
  EXPECT_EQ(e.mean(), std::complex<double>(0.0, 0.0));
  e.add(1.0);
  EXPECT_TRUE(std::isinf(e.ci()));
  e.add(3.0);
  EXPECT_DOUBLE_EQ(e.mean().real(), 2.0);
  EXPECT_DOUBLE_EQ(e.variance(), 2.0);
  EXPECT_NEAR(e.ci(), 1.96, 1e-15);
}
