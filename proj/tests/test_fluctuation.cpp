#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "homfluct/fluctuation.hpp"

using namespace homfluct;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double pi = std::numbers::pi;
const double inf = std::numeric_limits<double>::infinity();
const std::vector<double> origin3{0.0, 0.0, 0.0};

SpectrumModel bump3() { return SpectrumModel::gaussian_bump(3, 1.0, 1.0); }

// Fourier side, f ≡ c: e^{−σ²t}c²(2π)^{−3}∫R̂(εξ)|∫₀ᵗe^{−|ξ|²s/2}ds|²dξ.
double var_constant_fourier(double A, double rho, double c, double t, double s2, double eps) {
  auto g = [&](double k) {
    const double a = 0.5 * k * k;
    const double time = a * t < 1e-10 ? t : -std::expm1(-a * t) / a;
    return 4.0 * pi * k * k * A * std::exp(-0.5 * eps * eps * k * k / (rho * rho)) * time * time;
  };
  const double I = gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 15, 1e-12) +
                   gauss_kronrod<double, 61>::integrate(g, 1.0, inf, 15, 1e-12);
  return std::exp(-s2 * t) * c * c * I / std::pow(2.0 * pi, 3);
}

}  // namespace

TEST(FluctVariance, ConstantDataClosedForm) {
  // ∫(∫₀ᵗ q_s ds)² dz = (1/π)∫₀^∞ erfc(r/√(2t))² dr = (2 − √2)√(2t)/π^{3/2}.
  const double s2 = sigma2(bump3());
  for (double t : {0.5, 1.0, 2.0}) {
    const double closed = std::exp(-s2 * t) * (2.0 - std::sqrt(2.0)) * std::sqrt(2.0 * t) /
                          std::pow(pi, 1.5);
    const double v = var_limit(bump3(), InitialCondition::constant(1.0), t, origin3, s2);
    EXPECT_NEAR(v / closed, 1.0, 1e-5) << t;
    EXPECT_NEAR(var_constant_fourier(1.0, 1.0, 1.0, t, s2, 0.0) / closed, 1.0, 1e-8) << t;
  }
}

TEST(FluctVariance, ConstantDataWienerMonteCarlo) {
  // Same integral by sampling r ~ Exp(1) with weight e^r.
  const double s2 = sigma2(bump3());
  Rng rng(31);
  MCEstimate e;
  for (int i = 0; i < 200000; ++i) {
    const double r = -std::log(1.0 - rng.uniform());
    const double v = std::erfc(r / std::sqrt(2.0));
    e.add(std::exp(r) * v * v / pi);
  }
  const double mc = std::exp(-s2) * e.mean().real();
  const double v = var_limit(bump3(), InitialCondition::constant(1.0), 1.0, origin3, s2);
  EXPECT_LE(std::abs(v - mc), 4.0 * std::exp(-s2) * e.std_error());
  EXPECT_NEAR(v, 0.115406364, 1e-6);
}

TEST(FluctVariance, EpsDependenceMatchesFourierSide) {
  const double s2 = sigma2(bump3());
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    const double v = var_eps(bump3(), InitialCondition::constant(1.0), 1.0, origin3, s2, eps);
    EXPECT_NEAR(v / var_constant_fourier(1.0, 1.0, 1.0, 1.0, s2, eps), 1.0, 1e-5) << eps;
  }
}

TEST(FluctVariance, ReferenceValues) {
  const double s2 = sigma2(bump3());
  const auto one = InitialCondition::constant(1.0);
  const double expected[] = {0.05602, 0.08103, 0.09697, 0.10587};
  const double eps[] = {0.4, 0.2, 0.1, 0.05};
  double prev = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double v = var_eps(bump3(), one, 1.0, origin3, s2, eps[i]);
    EXPECT_NEAR(v, expected[i], 1e-5) << eps[i];
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, var_limit(bump3(), one, 1.0, origin3, s2));
  const auto bump = InitialCondition::gaussian_bump({0.3, 0.0, 0.0}, 1.0, 1.0);
  EXPECT_NEAR(var_limit(bump3(), bump, 1.0, origin3, s2), 0.018445, 2e-6);
  EXPECT_NEAR(var_eps(bump3(), bump, 1.0, origin3, s2, 0.05), 0.017249, 2e-6);
}

TEST(FluctVariance, QuadraticInInitialDataLinearInSpectrum) {
  const double s2 = 0.25;
  const auto f1 = InitialCondition::gaussian_bump({0.1, 0.2, 0.0}, 0.8, 1.0);
  const auto f2 = InitialCondition::gaussian_bump({0.1, 0.2, 0.0}, 0.8, 2.0);
  const std::vector<double> x{0.2, 0.0, -0.1};
  const double v1 = var_limit(bump3(), f1, 1.0, x, s2);
  EXPECT_NEAR(var_limit(bump3(), f2, 1.0, x, s2) / v1, 4.0, 1e-6);
  EXPECT_NEAR(var_limit(bump3().scaled(2.0), f1, 1.0, x, s2) / v1, 2.0, 1e-6);
  EXPECT_NEAR(var_eps(bump3(), InitialCondition::constant(2.0), 1.0, x, s2, 0.1) /
                  var_eps(bump3(), InitialCondition::constant(1.0), 1.0, x, s2, 0.1),
              4.0, 1e-6);
}

TEST(FluctVariance, DegenerateCases) {
  const auto zero = SpectrumModel::gaussian_bump(3, 0.0, 1.0);
  EXPECT_EQ(var_limit(zero, InitialCondition::constant(1.0), 1.0, origin3, 0.0), 0.0);
  EXPECT_EQ(var_limit(bump3(), InitialCondition::constant(0.0), 1.0, origin3, 0.25), 0.0);
  EXPECT_THROW(var_eps(bump3(), InitialCondition::constant(1.0), 1.0, origin3, 0.25, 0.0),
               std::invalid_argument);
  EXPECT_THROW(var_limit(bump3(), InitialCondition::constant(1.0), 0.0, origin3, 0.25),
               std::invalid_argument);
  const std::vector<double> x4(4, 0.0);
  EXPECT_THROW(var_limit(SpectrumModel::gaussian_bump(4, 1.0, 1.0), InitialCondition::constant(1.0),
                         1.0, x4, 0.25),
               std::invalid_argument);
}

TEST(LimitLaw, Sampling) {
  const auto a = sample_limit_v(0.3, 20000, 5);
  EXPECT_EQ(a, sample_limit_v(0.3, 20000, 5));
  std::vector<double> im;
  for (const auto& z : a) {
    EXPECT_EQ(z.real(), 0.0);
    im.push_back(z.imag());
  }
  const auto m = stats::moments(im);
  EXPECT_NEAR(m.mean, 0.0, 4.0 * std::sqrt(0.3 / 20000.0));
  EXPECT_NEAR(m.variance, 0.3, 4.0 * 0.3 * std::sqrt(2.0 / 20000.0));
  EXPECT_THROW(sample_limit_v(-1.0, 10, 1), std::invalid_argument);
}

TEST(LimitLaw, KsTestIsCalibrated) {
  const double rate = clt_false_rejection_rate(0.1, 1000, 400, 6);
  EXPECT_LE(rate, 0.025);
}

TEST(LimitLaw, KsTestHasPower) {
  const auto s = sample_limit_v(0.2, 2000, 7);
  EXPECT_LT(clt_test_d3(s, 0.1).p_value, 1e-3);
  EXPECT_GT(clt_test_d3(s, 0.2).p_value, 1e-3);
}

TEST(LimitLaw, RealPartCheck) {
  auto s = sample_limit_v(0.2, 500, 8);
  EXPECT_TRUE(clt_test_d3(s, 0.2).re_null_ok);
  Rng rng(9);
  for (auto& z : s) z += std::complex<double>(0.5 + 0.1 * rng.normal(), 0.0);
  EXPECT_FALSE(clt_test_d3(s, 0.2).re_null_ok);
  std::vector<std::complex<double>> few(50);
  EXPECT_THROW(clt_test_d3(few, 0.2), std::invalid_argument);
}

TEST(VEpsEnsemble, VarianceMatchesQuadrature) {
  const auto fs = FieldSpec::gaussian(bump3(), 64);
  const double s2 = sigma2(bump3());
  const auto one = InitialCondition::constant(1.0);
  const std::size_t N = 4000;
  const auto v = v_eps_ensemble(fs, one, 1.0, origin3, 0.2, s2, N, 10, 1);
  std::vector<double> im, sq;
  for (const auto& z : v) {
    EXPECT_EQ(z.real(), 0.0);
    im.push_back(z.imag());
    sq.push_back(z.imag() * z.imag());
  }
  const auto m = stats::moments(sq);
  EXPECT_NEAR(stats::moments(im).mean, 0.0, 4.0 * std::sqrt(m.mean / double(N)));
  EXPECT_LE(std::abs(m.mean - var_eps(bump3(), one, 1.0, origin3, s2, 0.2)),
            4.0 * std::sqrt(m.variance / double(N)));
}

TEST(VEpsEnsemble, WorkerInvariantAndGaussianOnly) {
  const auto fs = FieldSpec::gaussian(bump3(), 32);
  const auto f = InitialCondition::gaussian_bump({0.3, 0, 0}, 1.0, 1.0);
  EXPECT_EQ(v_eps_ensemble(fs, f, 1.0, origin3, 0.2, 0.25, 12, 3, 1),
            v_eps_ensemble(fs, f, 1.0, origin3, 0.2, 0.25, 12, 3, 3));
  const auto ps = FieldSpec::poisson(ShapeFunction(3, 1.0, 1.0));
  EXPECT_THROW(v_eps_ensemble(ps, f, 1.0, origin3, 0.2, 0.25, 4, 3, 1), std::invalid_argument);
}

namespace {

RateExperimentSpec small_rate_spec() {
  RateExperimentSpec s;
  s.field = FieldSpec::gaussian(bump3(), 64);
  s.initial = InitialCondition::gaussian_bump({0, 0, 0}, 1.0, 1.0);
  s.t = 0.25;
  s.x = origin3;
  s.eps_list = {0.8, 0.6, 0.4};
  s.n_omega = 8;
  s.n_paths = 32;
  s.master_seed = 4;
  return s;
}

}  // namespace

TEST(RateExperiment, RejectsBadSpecs) {
  auto s = small_rate_spec();
  s.eps_list = {0.4, 0.2};
  EXPECT_THROW(rate_experiment(s), std::invalid_argument);
  s.eps_list = {0.4, 0.2, 0.2};
  EXPECT_THROW(rate_experiment(s), std::invalid_argument);
  s = small_rate_spec();
  s.field = FieldSpec::gaussian(SpectrumModel::gaussian_bump(6, 1.0, 1.0), 8);
  s.x.assign(6, 0.0);
  EXPECT_THROW(rate_experiment(s), std::invalid_argument);
}

TEST(RateExperiment, ZeroPotentialIsFlaggedInvalid) {
  auto s = small_rate_spec();
  s.field = FieldSpec::gaussian(SpectrumModel::gaussian_bump(3, 0.0, 1.0), 16);
  s.initial = InitialCondition::constant(1.0);
  const auto r = rate_experiment(s);
  EXPECT_FALSE(r.valid);
  EXPECT_FALSE(r.message.empty());
  for (const auto& row : r.rows) EXPECT_EQ(row.mean_abs_err, 0.0);
}

TEST(RateExperiment, DeterministicAcrossWorkers) {
  auto s = small_rate_spec();
  const auto a = rate_experiment(s);
  s.workers = 3;
  const auto b = rate_experiment(s);
  ASSERT_EQ(a.rows.size(), 3u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean_abs_err, b.rows[i].mean_abs_err);
    EXPECT_EQ(a.rows[i].inner_ci, b.rows[i].inner_ci);
  }
  EXPECT_EQ(a.slope, b.slope);
  EXPECT_EQ(a.cells.size(), 24u);
  EXPECT_DOUBLE_EQ(a.nominal_slope, 0.5);
  EXPECT_FALSE(a.log_correction_applied);
}

TEST(RateExperiment, RowsAreIndependentOfListOrder) {
  // Seeds are keyed by position in the list, so a row depends only on (ε, index).
  auto s = small_rate_spec();
  const auto a = rate_experiment(s);
  s.eps_list = {0.8, 0.6, 0.4, 0.3};
  const auto b = rate_experiment(s);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.rows[i].mean_abs_err, b.rows[i].mean_abs_err);
}

TEST(RateExperiment, AdaptivePathsWithoutSignal) {
  auto s = small_rate_spec();
  s.field = FieldSpec::gaussian(SpectrumModel::gaussian_bump(3, 0.0, 1.0), 16);
  s.initial = InitialCondition::constant(1.0);
  s.max_paths = 777;
  EXPECT_EQ(adaptive_paths(s, 0, 1.0), 777u);
}

TEST(RateExperiment, NominalRates) {
  EXPECT_EQ(nominal_rate(3), 0.5);
  EXPECT_EQ(nominal_rate(4), 1.0);
  EXPECT_EQ(nominal_rate(5), 1.0);
}

TEST(D4CorrectorClt, TargetsAndGaussianVariance) {
  const auto spec = SpectrumModel::gaussian_bump(4, 1.0, 1.0);
  const auto fs = FieldSpec::gaussian(spec, 256, {ModeSampling::stratified_log});
  const std::vector<double> eps{0.3};
  const auto r = d4_corrector_clt(fs, eps, 1000, 40, 1);
  EXPECT_NEAR(r.target_variance, 4.0 / std::pow(2.0 * pi, 4), 1e-15);
  EXPECT_NEAR(r.target_variance, 0.0025665, 1e-7);
  EXPECT_NEAR(r.target_variance_sphere, 2.0 * pi * pi * r.target_variance, 1e-14);
  EXPECT_NEAR(r.lemma_limit, 0.5 * r.target_variance, 1e-15);
  ASSERT_EQ(r.rows.size(), 1u);
  const auto& row = r.rows[0];
  EXPECT_NEAR(row.variance_over_log_lambda, 0.5 * row.variance_over_log_eps, 1e-15);
  EXPECT_NEAR(row.sample_variance / row.variance_over_log_eps, 1.0, 0.15);
  EXPECT_GT(row.quadrature.p_value, 1e-3);
}

TEST(D4CorrectorClt, PoissonHybridVariance) {
  const ShapeFunction shape(4, 1.0, 1.0);
  const auto fs = FieldSpec::poisson(shape);
  const std::vector<double> eps{0.5};
  const auto r = d4_corrector_clt(fs, eps, 800, 41, 1);
  const auto& row = r.rows[0];
  EXPECT_NEAR(row.sample_variance / row.variance_over_log_eps, 1.0, 0.15);
  EXPECT_NEAR(row.stated.moments.mean, 0.0, 4.0 * std::sqrt(row.sample_variance / 800.0));
}

TEST(D4CorrectorClt, RejectsOtherDimensions) {
  const std::vector<double> eps{0.3};
  EXPECT_THROW(d4_corrector_clt(FieldSpec::gaussian(bump3(), 8), eps, 10, 1, 1),
               std::invalid_argument);
}

TEST(D5Expansion, ZeroPotentialIsDegenerate) {
  D5Spec s;
  s.field = FieldSpec::gaussian(SpectrumModel::gaussian_bump(5, 0.0, 1.0), 16);
  s.initial = InitialCondition::constant(1.0);
  s.x.assign(5, 0.0);
  s.eps_list = {0.8, 0.6};
  s.n_omega = 6;
  s.n_paths = 8;
  s.t = 0.25;
  const auto rows = d5_expansion_check(s);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.mean_abs_err, 0.0);
    EXPECT_EQ(r.residual_over_eps, 0.0);
  }
  EXPECT_EQ(rows[1].n_paths, std::size_t(std::ceil(8.0 * std::pow(0.8 / 0.6, 3.0))));
}

TEST(D5Expansion, RejectsUnsupportedFields) {
  D5Spec s;
  s.field = FieldSpec::gaussian(SpectrumModel::gaussian_bump(4, 1.0, 1.0), 8);
  s.x.assign(4, 0.0);
  s.eps_list = {0.5};
  EXPECT_THROW(d5_expansion_check(s), std::invalid_argument);
  s.field = FieldSpec::poisson(ShapeFunction(5, 1.0, 1.0));
  s.x.assign(5, 0.0);
  EXPECT_THROW(d5_expansion_check(s), std::invalid_argument);
}

TEST(Remainder, ClosedFormMoment) {
  // Independent scalar quadrature of the same Fourier expression.
  const double expected[] = {0.03898957359975319, 0.03002650335546829, 0.01868058391588697,
                             0.0022746043431756003};
  const double eps[] = {0.4, 0.2, 0.1, 0.01};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(remainder_moment(bump3(), eps[i], 1.0) / expected[i], 1.0, 1e-7);
  // √λ = ε scaling emerges only for small ε.
  const double local = std::log(remainder_moment(bump3(), 0.01, 1.0) / remainder_moment(bump3(), 0.001, 1.0)) /
                       std::log(10.0);
  EXPECT_NEAR(local, 1.0, 0.02);
  EXPECT_EQ(remainder_moment(SpectrumModel::gaussian_bump(3, 0.0, 1.0), 0.1, 1.0), 0.0);
  EXPECT_THROW(remainder_moment(bump3(), 0.0, 1.0), std::invalid_argument);
}

TEST(Remainder, EnsembleMatchesClosedForm) {
  RemainderSpec s;
  s.field = FieldSpec::gaussian(bump3(), 256);
  s.x = origin3;
  s.eps_list = {0.5, 0.4};
  s.n_omega = 150;
  s.n_paths = 4;
  s.max_halvings = 0;
  s.master_seed = 12;
  const auto r = remainder_scaling(s);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.dt, 0.05);
    EXPECT_LE(std::abs(row.mean_R2 - remainder_moment(bump3(), row.eps, 1.0)), 4.0 * row.std_err) << row.eps;
  }
  s.workers = 3;
  EXPECT_EQ(remainder_scaling(s).rows[1].mean_R2, r.rows[1].mean_R2);
  s.eps_list = {0.5};
  EXPECT_THROW(remainder_scaling(s), std::invalid_argument);
}
