#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace homfluct::stats {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
};

inline Moments moments(std::span<const double> x) {
  Moments m;
  const double n = double(x.size());
  if (x.empty()) return m;
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double c = v - m.mean;
    m2 += c * c;
    m3 += c * c * c;
  }
  if (x.size() > 1) m.variance = m2 / (n - 1.0);
  const double pop = m2 / n;
  m.skewness = pop > 0.0 ? (m3 / n) / std::pow(pop, 1.5) : 0.0;
  return m;
}

inline double normal_cdf(double x, double mean, double sd) {
  if (sd == 0.0) return x < mean ? 0.0 : 1.0;
  return boost::math::cdf(boost::math::normal(mean, sd), x);
}

/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS statistic sup|F_n − F|.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return d;
}

/// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_pvalue(double D, std::size_t n) {
  const double sn = std::sqrt(double(n));
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * D);
}

struct KsResult {
  std::size_t n = 0;
  double statistic = 0.0;
  double p_value = 0.0;
};

inline KsResult ks_test_normal(std::span<const double> x, double mean, double variance) {
  KsResult r;
  r.n = x.size();
  const double sd = std::sqrt(std::max(variance, 0.0));
  r.statistic = ks_statistic(std::vector<double>(x.begin(), x.end()),
                             [&](double v) { return normal_cdf(v, mean, sd); });
  r.p_value = ks_pvalue(r.statistic, r.n);
  return r;
}

/// Two-sample KS test.
inline KsResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = double(x.size()), m = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(double(i) / n - double(j) / m));
  }
  KsResult r;
  r.n = std::size_t(n * m / (n + m));
  r.statistic = d;
  r.p_value = ks_pvalue(d, r.n);
  return r;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ≈ intercept + slope·x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit: need >= 2 points");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit: abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

/// Pearson correlation; NaN when either sample is constant.
inline double correlation(std::span<const double> x, std::span<const double> y) {
  const auto mx = moments(x), my = moments(y);
  if (!(mx.variance > 0.0) || !(my.variance > 0.0)) return std::nan("");
  double c = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) c += (x[i] - mx.mean) * (y[i] - my.mean);
  c /= double(x.size() - 1);
  return c / std::sqrt(mx.variance * my.variance);
}

}  // namespace homfluct::stats
