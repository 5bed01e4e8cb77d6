#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>

#include "gaussian_field.hpp"
#include "poisson_field.hpp"
#include "rng.hpp"

namespace homfluct {

using FieldRealization = std::variant<GaussianFieldRealization, PoissonFieldRealization>;

inline double eval_field(const FieldRealization& field, std::span<const double> x) {
  return std::visit([&](const auto& f) { return f(x); }, field);
}

inline int field_dimension(const FieldRealization& field) {
  return std::visit([](const auto& f) { return f.dimension(); }, field);
}

/// Recipe for the realization V(·, ω) of an ensemble member ω.
struct FieldSpec {
  enum class Kind { gaussian, poisson };
  Kind kind = Kind::gaussian;
  /// Spectrum of V; for shot noise this is the induced |φ̂|².
  SpectrumModel spectrum = SpectrumModel::gaussian_bump(3, 1.0, 1.0);
  std::optional<ShapeFunction> shape;
  std::size_t modes = 4096;
  ModeSamplingOptions sampling;

  static FieldSpec gaussian(SpectrumModel spec, std::size_t modes,
                            ModeSamplingOptions sampling = {}) {
    FieldSpec f;
    f.spectrum = std::move(spec);
    f.modes = modes;
    f.sampling = sampling;
    return f;
  }

  static FieldSpec poisson(const ShapeFunction& shape) {
    FieldSpec f;
    f.kind = Kind::poisson;
    f.shape = shape;
    f.spectrum = SpectrumModel::poisson_induced(shape);
    return f;
  }

  int dimension() const { return spectrum.dimension(); }

  static std::uint64_t omega_seed(std::uint64_t master, std::size_t omega) {
    return derive_seed(master, StreamTag::field, {omega});
  }

  FieldRealization realize(std::uint64_t master, std::size_t omega) const {
    const auto seed = omega_seed(master, omega);
    if (kind == Kind::gaussian) return make_gaussian_field(spectrum, modes, seed, sampling);
    return make_poisson_field(*shape, seed);
  }
};

}  // namespace homfluct
