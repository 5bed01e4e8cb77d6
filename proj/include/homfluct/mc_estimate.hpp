#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>

namespace homfluct {

/// Running sums for a complex Monte Carlo mean.
class MCEstimate {
 public:
  void add(std::complex<double> z) {
    ++n_;
    re_ += z.real();
    im_ += z.imag();
    re2_ += z.real() * z.real();
    im2_ += z.imag() * z.imag();
  }

  void add(double x) { add(std::complex<double>(x, 0.0)); }

  MCEstimate& merge(const MCEstimate& o) {
    n_ += o.n_;
    re_ += o.re_;
    im_ += o.im_;
    re2_ += o.re2_;
    im2_ += o.im2_;
    return *this;
  }

  std::uint64_t count() const { return n_; }

  std::complex<double> mean() const {
    if (n_ == 0) return {0.0, 0.0};
    return {re_ / double(n_), im_ / double(n_)};
  }

  /// Unbiased E|z − E z|².
  double variance() const { return variance_re() + variance_im(); }
  double variance_re() const { return component_variance(re_, re2_); }
  double variance_im() const { return component_variance(im_, im2_); }

  /// Standard error of the mean (complex modulus).
  double std_error() const {
    if (n_ < 2) return std::numeric_limits<double>::infinity();
    return std::sqrt(variance() / double(n_));
  }

  /// 95% half-width of |mean − E z|; +inf with fewer than two samples.
  double ci() const { return 1.96 * std_error(); }

 private:
  double component_variance(double s, double s2) const {
    if (n_ < 2) return std::numeric_limits<double>::infinity();
    const double n = double(n_);
    const double v = (s2 - s * s / n) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }

  std::uint64_t n_ = 0;
  double re_ = 0.0, im_ = 0.0, re2_ = 0.0, im2_ = 0.0;
};

}  // namespace homfluct
