#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfclt/coefficients.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/innovations.hpp"
#include "rfclt/lattice.hpp"
#include "rfclt/rng.hpp"

namespace rfclt {

enum class FunctionalKind { identity, abs, square, relu, window_mean, window_ramp, custom };

/// Window functional K applied to {Z_{i,j}}_h^{k,l}, the h x h block ending
/// at (k, l) flattened in lexicographic order (row-major, oldest first). The
/// stored centering is subtracted from every evaluation.
struct FunctionalK {
  FunctionalKind kind = FunctionalKind::identity;
  int h = 1;
  std::function<double(std::span<const double>)> evaluator;
  double centering = 0.0;
  double centering_se = 0.0;  // zero when the centering is analytic
  bool analytic_centering = true;
  std::optional<double> alpha;  // Hoelder exponents, reported only
  std::optional<double> beta;

  [[nodiscard]] double operator()(std::span<const double> window) const {
    return evaluator(window) - centering;
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case FunctionalKind::identity:
        return "identity";
      case FunctionalKind::abs:
        return "abs";
      case FunctionalKind::square:
        return "square";
      case FunctionalKind::relu:
        return "relu";
      case FunctionalKind::window_mean:
        return "window-mean";
      case FunctionalKind::window_ramp:
        return "window-ramp";
      case FunctionalKind::custom:
        return "custom";
    }
    return "?";
  }
};

/// Uncentered evaluator for a named kind.
inline std::function<double(std::span<const double>)> functional_evaluator(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::identity:
      return [](std::span<const double> w) { return w.back(); };
    case FunctionalKind::abs:
      return [](std::span<const double> w) { return std::abs(w.back()); };
    case FunctionalKind::square:
      return [](std::span<const double> w) { return w.back() * w.back(); };
    case FunctionalKind::relu:
      return [](std::span<const double> w) { return std::max(w.back(), 0.0); };
    case FunctionalKind::window_mean:
      return [](std::span<const double> w) {
        double s = 0.0;
        for (double x : w) s += x;
        return s / static_cast<double>(w.size());
      };
    case FunctionalKind::window_ramp:
      // Weights 1, 2, ..., h^2 in flattening order; not permutation invariant.
      return [](std::span<const double> w) {
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) s += static_cast<double>(k + 1) * w[k];
        return s;
      };
    case FunctionalKind::custom:
      break;
  }
  throw ParameterError("no built-in evaluator for a custom functional");
}

/// Draws `draws` independent h x h windows of the truncated linear field
/// and returns the sample mean of K with its standard error.
inline std::pair<double, double> estimate_functional_mean(
    const std::function<double(std::span<const double>)>& evaluator, int h,
    const CoefficientFamily& family, int radius, const InnovationSpec& innovations,
    const RngStream& stream, long long draws) {
  if (draws < 2) throw ParameterError("centering pre-pass needs at least two draws");
  const int patch = h + radius;
  const auto kernel = kernel_table(family, radius);
  const int side = radius + 1;
  std::vector<double> eps(static_cast<std::size_t>(patch) * patch);
  std::vector<double> window(static_cast<std::size_t>(h) * h);
  double mean = 0.0;
  double m2 = 0.0;
  for (long long d = 0; d < draws; ++d) {
    const RngStream local = stream.derive("centering", static_cast<std::uint64_t>(d));
    for (int r = 0; r < patch; ++r) {
      for (int c = 0; c < patch; ++c) {
        eps[static_cast<std::size_t>(r) * patch + c] = innovations.draw(local, cell_counter(r, c));
      }
    }
    for (int wr = 0; wr < h; ++wr) {
      for (int wc = 0; wc < h; ++wc) {
        const int pr = wr + radius;
        const int pc = wc + radius;
        double z = 0.0;
        for (int dr = 0; dr < side; ++dr) {
          for (int dc = 0; dc < side; ++dc) {
            z += kernel[static_cast<std::size_t>(dr) * side + dc] *
                 eps[static_cast<std::size_t>(pr - dr) * patch + (pc - dc)];
          }
        }
        window[static_cast<std::size_t>(wr) * h + wc] = z;
      }
    }
    const double v = evaluator(window);
    const double delta = v - mean;
    mean += delta / static_cast<double>(d + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(draws - 1);
  return {mean, std::sqrt(var / static_cast<double>(draws))};
}

/// Builds a named functional for the linear field given by (family, B,
/// innovations) and fixes its centering: closed form where one exists,
/// otherwise a pre-pass of `centering_draws` i.i.d. windows.
inline FunctionalK make_functional(FunctionalKind kind, int h, const CoefficientFamily& family,
                                   int radius, const InnovationSpec& innovations,
                                   const RngStream& centering_stream,
                                   long long centering_draws = 1'000'000) {
  if (h < 1) throw ParameterError("window size h must be positive");
  FunctionalK k;
  k.kind = kind;
  k.h = h;
  k.evaluator = functional_evaluator(kind);
  const double v = innovations.variance() * box_sums(family, radius).square;
  const bool gaussian = innovations.kind == InnovationKind::gaussian;
  std::optional<double> closed;
  switch (kind) {
    case FunctionalKind::identity:
    case FunctionalKind::window_mean:
    case FunctionalKind::window_ramp:
      closed = 0.0;
      k.alpha = 1.0;
      k.beta = 1.0;
      break;
    case FunctionalKind::square:
      closed = v;
      k.alpha = 1.0;
      k.beta = 2.0;
      break;
    case FunctionalKind::abs:
      if (gaussian) closed = std::sqrt(2.0 * v / std::numbers::pi);
      k.alpha = 1.0;
      k.beta = 1.0;
      break;
    case FunctionalKind::relu:
      if (gaussian) closed = std::sqrt(v / (2.0 * std::numbers::pi));
      k.alpha = 1.0;
      k.beta = 1.0;
      break;
    case FunctionalKind::custom:
      break;
  }
  if (closed) {
    k.centering = *closed;
    k.centering_se = 0.0;
    k.analytic_centering = true;
  } else {
    auto [mean, se] = estimate_functional_mean(k.evaluator, h, family, radius, innovations,
                                               centering_stream, centering_draws);
    k.centering = mean;
    k.centering_se = se;
    k.analytic_centering = false;
  }
  return k;
}

/// Evaluates K on every h x h window of z that lies inside z. The output
/// starts at z.origin() + (h - 1, h - 1).
inline FieldArray apply_functional(const FunctionalK& k, const FieldArray& z) {
  const int h = k.h;
  if (h < 1) throw ParameterError("window size h must be positive");
  if (z.rows() < h || z.cols() < h) {
    throw PreconditionError("field margin too small for window size h = " + std::to_string(h));
  }
  FieldArray out(z.rows() - h + 1, z.cols() - h + 1, {z.first_row() + h - 1, z.first_col() + h - 1});
  std::vector<double> window(static_cast<std::size_t>(h) * h);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      for (int wr = 0; wr < h; ++wr) {
        for (int wc = 0; wc < h; ++wc) window[static_cast<std::size_t>(wr) * h + wc] = z.local(r + wr, c + wc);
      }
      out.local(r, c) = k(window);
    }
  }
  return out;
}

}  // namespace rfclt
