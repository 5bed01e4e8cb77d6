#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "homfluct/homogenization.hpp"
#include "homfluct/spectrum.hpp"

using namespace homfluct;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double pi = std::numbers::pi;
const double inf = std::numeric_limits<double>::infinity();

double bump(double r) { return r >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - r * r)); }

// φ̂(k) = 4π ∫ φ(r) r² sin(kr)/(kr) dr for the unit bump in d = 3.
double bump_fourier(double k) {
  auto g = [&](double r) {
    const double s = k * r < 1e-8 ? 1.0 : std::sin(k * r) / (k * r);
    return 4.0 * pi * r * r * bump(r) * s;
  };
  return gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 12, 1e-12);
}

// G_λ(r) = ∫₀^∞ e^{−λs} q_s(r) ds, q_s the heat kernel of ½Δ.
double green_laplace_oracle(double r, double lambda, int d) {
  auto g = [&](double s) {
    if (s == 0.0) return 0.0;
    return std::exp(-lambda * s) * std::pow(2.0 * pi * s, -0.5 * d) * std::exp(-r * r / (2.0 * s));
  };
  const double split = r * r;
  return gauss_kronrod<double, 61>::integrate(g, 0.0, split, 15, 1e-12) +
         gauss_kronrod<double, 61>::integrate(g, split, inf, 15, 1e-12);
}

std::vector<double> v3(double a, double b, double c) { return {a, b, c}; }

}  // namespace

TEST(Sigma2, GaussianBumpAnalytic) {
  // 4/(2π)³ · 4π ∫₀^∞ e^{−r²/2} dr.
  auto g = [](double r) { return std::exp(-0.5 * r * r); };
  const double oracle =
      4.0 / std::pow(2.0 * pi, 3) * 4.0 * pi * gauss_kronrod<double, 61>::integrate(g, 0.0, inf, 15, 1e-14);
  const double analytic = 2.0 * std::sqrt(pi / 2.0) / (pi * pi);
  EXPECT_NEAR(oracle / analytic, 1.0, 1e-12);
  EXPECT_NEAR(analytic, 0.253975, 1e-6);
  EXPECT_NEAR(sigma2(SpectrumModel::gaussian_bump(3, 1.0, 1.0)) / analytic, 1.0, 1e-8);
}

TEST(Sigma2, ZeroAmplitude) { EXPECT_EQ(sigma2(SpectrumModel::gaussian_bump(3, 0.0, 1.0)), 0.0); }

TEST(Sigma2, PoissonInducedMatchesNestedQuadrature) {
  auto g = [](double k) {
    const double f = bump_fourier(k);
    return 4.0 * pi * f * f;  // |φ̂|²/k² · 4πk²
  };
  const double oracle =
      4.0 / std::pow(2.0 * pi, 3) * gauss_kronrod<double, 31>::integrate(g, 0.0, 80.0, 12, 1e-9);
  const auto spec = SpectrumModel::poisson_induced(ShapeFunction(3, 1.0, 1.0));
  EXPECT_NEAR(sigma2(spec) / oracle, 1.0, 1e-4);
}

TEST(Sigma2, RejectsLowDimension) {
  EXPECT_THROW(sigma2(SpectrumModel::gaussian_bump(2, 1.0, 1.0)), std::invalid_argument);
}

TEST(Sigma2, LinearInSpectrumScale) {
  for (int d : {3, 4, 5}) {
    const auto spec = SpectrumModel::gaussian_bump(d, 1.0, 1.3);
    for (double c : {0.5, 2.0, 7.0})
      EXPECT_NEAR(sigma2(spec.scaled(c)) / (c * sigma2(spec)), 1.0, 1e-10);
  }
  const auto p = SpectrumModel::poisson_induced(ShapeFunction(3, 1.0, 1.0));
  EXPECT_NEAR(sigma2(p.scaled(2.0)) / (2.0 * sigma2(p)), 1.0, 1e-10);
}

TEST(UHom, ConstantInitialData) {
  const HomogenizedModel m(0.3, 3, InitialCondition::constant(1.0));
  for (double t : {0.1, 1.0, 4.0}) EXPECT_DOUBLE_EQ(u_hom(m, t, v3(1, 2, 3)), std::exp(-0.15 * t));
}

TEST(UHom, GaussianConvolutionIdentity) {
  const HomogenizedModel m(0.0, 3, InitialCondition::gaussian_bump({0, 0, 0}, 1.0, 1.0));
  for (double t : {0.5, 1.0, 3.0}) {
    const auto x = v3(0.4, -0.2, 1.0);
    const double r2 = 0.16 + 0.04 + 1.0;
    EXPECT_NEAR(u_hom(m, t, x), std::pow(1.0 + t, -1.5) * std::exp(-r2 / (2.0 * (1.0 + t))), 1e-14);
  }
}

TEST(UHom, TimeZeroReturnsInitialData) {
  const auto f = InitialCondition::gaussian_bump({0.2, 0, 0}, 0.7, 2.0);
  const HomogenizedModel m(0.25, 3, f);
  const auto x = v3(0.3, 0.1, -0.4);
  EXPECT_EQ(u_hom(m, 0.0, x), f(x));
  EXPECT_THROW(u_hom(m, -1.0, x), std::invalid_argument);
}

TEST(UHom, SemigroupProperty) {
  const double s2 = 0.25, w = 0.8, h = 1.5, t = 0.7, s = 1.1;
  const std::vector<double> c{0.1, -0.3, 0.2};
  const HomogenizedModel m(s2, 3, InitialCondition::gaussian_bump(c, w, h));
  // The time-t profile is again a Gaussian bump.
  const double w2t = w * w + t;
  const double ht = std::exp(-0.5 * s2 * t) * h * std::pow(w * w / w2t, 1.5);
  const HomogenizedModel mt(s2, 3, InitialCondition::gaussian_bump(c, std::sqrt(w2t), ht));
  for (const auto& x : {v3(0, 0, 0), v3(1, 0.5, -0.2), v3(-2, 1, 1)})
    EXPECT_NEAR(u_hom(m, t + s, x), u_hom(mt, s, x), 1e-12);
}

TEST(UHomMC, ConstantHasZeroVariance) {
  const HomogenizedModel m(0.4, 3, InitialCondition::constant(2.0));
  const auto e = u_hom_mc_check(m, 1.0, v3(0, 0, 0), 100, 1);
  EXPECT_DOUBLE_EQ(e.mean().real(), 2.0 * std::exp(-0.2));
  EXPECT_LT(e.variance(), 1e-12);
}

TEST(UHomMC, GaussianBumpMatchesClosedForm) {
  const HomogenizedModel m(sigma2(SpectrumModel::gaussian_bump(3, 1.0, 1.0)), 3,
                           InitialCondition::gaussian_bump({0, 0, 0}, 1.0, 1.0));
  const auto x = v3(0, 0, 0);
  const auto e = u_hom_mc_check(m, 1.0, x, 100000, 5);
  EXPECT_LE(std::abs(e.mean().real() - u_hom(m, 1.0, x)), 4.0 * e.ci());
}

TEST(UHomMC, SingleSampleHasInfiniteCI) {
  const HomogenizedModel m(0.0, 3, InitialCondition::gaussian_bump({0, 0, 0}, 1.0, 1.0));
  const auto e = u_hom_mc_check(m, 1.0, v3(0, 0, 0), 1, 5);
  EXPECT_EQ(e.count(), 1u);
  EXPECT_TRUE(std::isinf(e.ci()));
  EXPECT_TRUE(std::isfinite(e.mean().real()));
}

TEST(GreenLambda, ThreeDimensionalValue) {
  const double oracle = green_laplace_oracle(1.0, 0.5, 3);
  EXPECT_NEAR(oracle, std::exp(-1.0) / (2.0 * pi), 1e-10);
  EXPECT_NEAR(green_lambda(v3(1, 0, 0), 0.5, 3), 0.058550, 1e-6);
  EXPECT_NEAR(green_lambda(v3(0.6, 0.8, 0), 0.5, 3) / oracle, 1.0, 1e-12);
}

TEST(GreenLambda, OtherDimensionsMatchLaplaceOracle) {
  for (int d : {4, 5, 6})
    for (double r : {0.3, 1.0, 2.5})
      for (double lambda : {0.01, 0.5, 3.0}) {
        std::vector<double> x(d, 0.0);
        x[0] = r;
        EXPECT_NEAR(green_lambda(x, lambda, d) / green_laplace_oracle(r, lambda, d), 1.0, 1e-6)
            << "d=" << d << " r=" << r << " lambda=" << lambda;
      }
}

TEST(GreenLambda, SmallArgumentLimit) {
  for (double r : {1e-3, 1e-5, 1e-7})
    EXPECT_NEAR(green_lambda(v3(r, 0, 0), 0.5, 3) * r, 1.0 / (2.0 * pi), 2.0 * r);
}

TEST(GreenLambda, DecaysForLargeLambda) {
  for (int d : {3, 4, 5}) {
    std::vector<double> x(d, 0.0);
    x[0] = 1.0;
    EXPECT_LT(green_lambda(x, 1e4, d), 1e-12);
  }
}

TEST(GreenLambda, RejectsOrigin) {
  EXPECT_THROW(green_lambda(v3(0, 0, 0), 0.5, 3), std::invalid_argument);
}

TEST(GreenLambda, ResolventIdentityByFourierInversion) {
  // d = 3: G(r) = (2π² r)^{−1} ∫₀^∞ k sin(kr)/(λ + k²/2) dk.
  const double lambda = 0.3;
  boost::math::quadrature::ooura_fourier_sin<double> sin_integral(1e-10);
  for (double r : {0.5, 1.0, 2.0}) {
    auto g = [&](double k) { return k / (lambda + 0.5 * k * k); };
    const double I = sin_integral.integrate(g, r).first;
    const double via_fourier = I / (2.0 * pi * pi * r);
    EXPECT_NEAR(via_fourier / green_lambda(v3(r, 0, 0), lambda, 3), 1.0, 1e-5) << "r=" << r;
  }
}
