#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace homfluct {

/// Discretized d-dimensional Brownian path on [0, steps·dt], B_0 = 0.
struct BrownianPath {
  int dimension = 3;
  double dt = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  /// steps × d increments, row-major.
  std::vector<double> increments;

  double horizon() const { return dt * double(steps); }

  std::span<const double> increment(std::size_t i) const {
    return {increments.data() + i * std::size_t(dimension), std::size_t(dimension)};
  }

  /// B at every grid point, (steps + 1) × d row-major.
  std::vector<double> positions() const {
    const std::size_t d = std::size_t(dimension);
    std::vector<double> b((steps + 1) * d, 0.0);
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t k = 0; k < d; ++k) b[(i + 1) * d + k] = b[i * d + k] + increments[i * d + k];
    return b;
  }

  std::vector<double> endpoint() const {
    std::vector<double> e(dimension, 0.0);
    for (std::size_t i = 0; i < steps; ++i)
      for (int k = 0; k < dimension; ++k) e[k] += increments[i * dimension + k];
    return e;
  }
};

/// Number of steps covering `horizon` with steps no longer than `dt`.
inline std::size_t step_count(double horizon, double dt) {
  const double n = std::ceil(horizon / dt - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

/// Path over [0, horizon]; the step is shrunk to horizon/steps so the grid ends exactly there.
inline BrownianPath simulate_brownian(double horizon, double dt, std::uint64_t seed, int d) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("path: need horizon, dt > 0");
  if (d < 1) throw std::invalid_argument("path: dimension must be positive");
  BrownianPath p;
  p.dimension = d;
  p.steps = step_count(horizon, dt);
  p.dt = horizon / double(p.steps);
  p.seed = seed;
  p.increments.resize(p.steps * std::size_t(d));
  Rng rng(seed);
  const double sd = std::sqrt(p.dt);
  for (double& v : p.increments) v = sd * rng.normal();
  return p;
}

/// Path over the rescaled horizon [0, t/ε²].
///
/// `max_dt` guards against steps too coarse for the potential's correlation
/// length (default min(1, ℓ²)/10 with ℓ = 1).
inline BrownianPath simulate_path(double t, double eps, double dt, std::uint64_t seed, int d,
                                  double max_dt = 0.1) {
  if (!(t > 0.0) || !(eps > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("simulate_path: t, eps and dt must be > 0");
  if (dt > max_dt) throw std::invalid_argument("simulate_path: dt exceeds the configured guard");
  return simulate_brownian(t / (eps * eps), dt, seed, d);
}

/// Halve the step by Brownian-bridge midpoints; the coarse grid values are kept.
inline BrownianPath refine(const BrownianPath& p) {
  BrownianPath q;
  q.dimension = p.dimension;
  q.steps = 2 * p.steps;
  q.dt = 0.5 * p.dt;
  q.seed = derive_seed(p.seed, {0xb41d9eULL, q.steps});
  q.increments.resize(q.steps * std::size_t(p.dimension));
  Rng rng(q.seed);
  const double sd = std::sqrt(0.25 * p.dt);
  const std::size_t d = std::size_t(p.dimension);
  for (std::size_t i = 0; i < p.steps; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double half = 0.5 * p.increments[i * d + k];
      const double z = sd * rng.normal();
      q.increments[(2 * i) * d + k] = half + z;
      q.increments[(2 * i + 1) * d + k] = half - z;
    }
  }
  return q;
}

}  // namespace homfluct
