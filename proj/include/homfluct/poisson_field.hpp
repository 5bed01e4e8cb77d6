#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rng.hpp"
#include "spectrum.hpp"

namespace homfluct {

/// Shot noise V(x) = Σ_p φ(x − y_p) − c_φ over a unit-intensity Poisson cloud.
///
/// Points are generated lazily per cubic cell; each cell's content is a pure
/// function of (seed, cell index), so concurrent or repeated fills agree.
class PoissonFieldRealization {
 public:
  using Cell = std::vector<std::int64_t>;

  PoissonFieldRealization(const ShapeFunction& shape, std::uint64_t seed)
      : shape_(std::make_shared<const ShapeFunction>(shape)),
        seed_(seed),
        h_(std::max(2.0 * shape.radius(), 1.0)),
        state_(std::make_shared<State>()) {
    if (shape.mass() == 0.0)
      throw std::invalid_argument("poisson field: shape has zero mass, so R̂(0) = 0");
  }

  /// A realization whose only points are `points` (each of dimension d).
  static PoissonFieldRealization from_points(const ShapeFunction& shape,
                                             const std::vector<std::vector<double>>& points) {
    PoissonFieldRealization f(shape, 0);
    f.explicit_ = true;
    const int d = shape.dimension();
    for (const auto& p : points) {
      if (p.size() != std::size_t(d)) throw std::invalid_argument("poisson field: bad point");
      Cell c(d);
      for (int k = 0; k < d; ++k) c[k] = static_cast<std::int64_t>(std::floor(p[k] / f.h_));
      auto& slot = f.state_->cells[c];
      if (!slot) slot = std::make_shared<std::vector<double>>();
      auto pts = std::const_pointer_cast<std::vector<double>>(slot);
      pts->insert(pts->end(), p.begin(), p.end());
    }
    return f;
  }

  int dimension() const { return shape_->dimension(); }
  const ShapeFunction& shape() const { return *shape_; }
  std::uint64_t seed() const { return seed_; }
  double cell_size() const { return h_; }

  /// Flat list of the points in `cell` (d coordinates per point).
  std::shared_ptr<const std::vector<double>> cell_points(const Cell& cell) const {
    {
      std::shared_lock lock(state_->mutex);
      auto it = state_->cells.find(cell);
      if (it != state_->cells.end()) return it->second;
    }
    auto pts = explicit_ ? std::make_shared<const std::vector<double>>() : generate(cell);
    std::unique_lock lock(state_->mutex);
    auto [it, inserted] = state_->cells.emplace(cell, pts);
    return it->second;
  }

  /// Call fn(point) for every point y with |x − y| < radius.
  template <class Fn>
  void for_each_point_within(std::span<const double> x, double radius, Fn&& fn) const {
    const int d = dimension();
    Cell lo(d), hi(d), c(d);
    for (int k = 0; k < d; ++k) {
      lo[k] = static_cast<std::int64_t>(std::floor((x[k] - radius) / h_));
      hi[k] = static_cast<std::int64_t>(std::floor((x[k] + radius) / h_));
    }
    c = lo;
    const double r2 = radius * radius;
    while (true) {
      const auto pts = cell_points(c);
      const std::size_t n = pts->size() / std::size_t(d);
      for (std::size_t p = 0; p < n; ++p) {
        const double* y = pts->data() + p * d;
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
        if (s < r2) fn(std::span<const double>(y, std::size_t(d)));
      }
      int k = 0;
      while (k < d && c[k] == hi[k]) {
        c[k] = lo[k];
        ++k;
      }
      if (k == d) break;
      ++c[k];
    }
  }

  double operator()(std::span<const double> x) const {
    const int d = dimension();
    double v = -shape_->mass();
    for_each_point_within(x, shape_->radius(), [&](std::span<const double> y) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
      v += shape_->profile(std::sqrt(s));
    });
    return v;
  }

 private:
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept {
      std::uint64_t h = 0x12345678ULL;
      for (auto v : c) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
      return static_cast<std::size_t>(h);
    }
  };

  struct State {
    std::shared_mutex mutex;
    std::unordered_map<Cell, std::shared_ptr<const std::vector<double>>, CellHash> cells;
  };

  std::shared_ptr<const std::vector<double>> generate(const Cell& cell) const {
    const int d = dimension();
    Rng rng(derive_seed_range(seed_, StreamTag::poisson_cell, cell));
    const auto n = rng.poisson(std::pow(h_, d));
    auto pts = std::make_shared<std::vector<double>>(n * std::size_t(d));
    for (std::size_t p = 0; p < n; ++p)
      for (int k = 0; k < d; ++k) (*pts)[p * d + k] = h_ * (double(cell[k]) + rng.uniform());
    return pts;
  }

  std::shared_ptr<const ShapeFunction> shape_;
  std::uint64_t seed_;
  double h_;
  bool explicit_ = false;
  std::shared_ptr<State> state_;
};

inline PoissonFieldRealization make_poisson_field(const ShapeFunction& shape, std::uint64_t seed) {
  return PoissonFieldRealization(shape, seed);
}

}  // namespace homfluct
