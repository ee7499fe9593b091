#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "rfclt/errors.hpp"
#include "rfclt/lattice.hpp"
#include "rfclt/rng.hpp"

namespace rfclt {

enum class InnovationKind { rademacher, gaussian, uniform };

/// Law of the i.i.d. innovations; every kind is centered.
struct InnovationSpec {
  InnovationKind kind = InnovationKind::gaussian;
  double gaussian_variance = 1.0;
  double uniform_half_width = 1.0;

  static InnovationSpec rademacher() { return {InnovationKind::rademacher, 1.0, 1.0}; }
  static InnovationSpec gaussian(double variance = 1.0) {
    return {InnovationKind::gaussian, variance, 1.0};
  }
  static InnovationSpec uniform(double half_width = 1.0) {
    return {InnovationKind::uniform, 1.0, half_width};
  }

  [[nodiscard]] double variance() const {
    switch (kind) {
      case InnovationKind::rademacher:
        return 1.0;
      case InnovationKind::gaussian:
        return gaussian_variance;
      case InnovationKind::uniform:
        return uniform_half_width * uniform_half_width / 3.0;
    }
    return 0.0;
  }

  /// E|eps|^p, exact.
  [[nodiscard]] double abs_moment(double p) const {
    switch (kind) {
      case InnovationKind::rademacher:
        return 1.0;
      case InnovationKind::gaussian:
        return std::pow(gaussian_variance, p / 2.0) * std::pow(2.0, p / 2.0) *
               std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
      case InnovationKind::uniform:
        return std::pow(uniform_half_width, p) / (p + 1.0);
    }
    return 0.0;
  }

  [[nodiscard]] double draw(const RngStream& stream, std::uint64_t counter) const {
    switch (kind) {
      case InnovationKind::rademacher:
        return stream.sign(counter);
      case InnovationKind::gaussian:
        return std::sqrt(gaussian_variance) * stream.normal(counter);
      case InnovationKind::uniform:
        return uniform_half_width * (2.0 * stream.uniform(counter) - 1.0);
    }
    return 0.0;
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case InnovationKind::rademacher:
        return "rademacher";
      case InnovationKind::gaussian:
        return "gaussian";
      case InnovationKind::uniform:
        return "uniform";
    }
    return "?";
  }
};

inline void validate(const InnovationSpec& spec) {
  if (spec.kind == InnovationKind::gaussian && !(spec.gaussian_variance > 0.0)) {
    throw ParameterError("gaussian innovation variance must be positive");
  }
  if (spec.kind == InnovationKind::uniform && !(spec.uniform_half_width > 0.0)) {
    throw ParameterError("uniform innovation half-width must be positive");
  }
}

/// I.i.d. innovations on {1-margin..m1} x {1-margin..m2}. The value at a
/// lattice cell depends only on (seed, stream id, cell), so overlapping
/// windows drawn from the same stream agree cell by cell.
inline FieldArray generate_innovations(const InnovationSpec& spec, const Rect& extent, int margin,
                                       const RngStream& stream) {
  validate(extent);
  if (margin < 0) throw DimensionError("innovation margin must be nonnegative");
  FieldArray out(extent.m1 + margin, extent.m2 + margin, {1 - margin, 1 - margin});
  for (int i = out.first_row(); i <= out.last_row(); ++i) {
    for (int j = out.first_col(); j <= out.last_col(); ++j) {
      out.at(i, j) = spec.draw(stream, cell_counter(i, j));
    }
  }
  return out;
}

}  // namespace rfclt
