#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfclt/coefficients.hpp"
#include "rfclt/convolution.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/functional.hpp"
#include "rfclt/innovations.hpp"
#include "rfclt/lattice.hpp"
#include "rfclt/parallel.hpp"
#include "rfclt/rng.hpp"

namespace rfclt {

enum class ModelVariant { iid, linear_identity, linear_functional, orthomartingale, counterexample };

inline std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::iid:
      return "iid";
    case ModelVariant::linear_identity:
      return "linear-identity";
    case ModelVariant::linear_functional:
      return "linear-functional";
    case ModelVariant::orthomartingale:
      return "orthomartingale";
    case ModelVariant::counterexample:
      return "counterexample";
  }
  return "?";
}

enum class GKind { constant, lag_product, window_sum, abs_mean };

inline std::string to_string(GKind g) {
  switch (g) {
    case GKind::constant:
      return "constant";
    case GKind::lag_product:
      return "lag-product";
    case GKind::window_sum:
      return "window-sum";
    case GKind::abs_mean:
      return "abs-mean";
  }
  return "?";
}

/// Multiplier g of an orthomartingale-difference field
///   f o T_{i,j} = eps_{i,j} * g(eps_{i-a, j-b} : 1 <= a, b <= m_g).
/// The argument lists the strict-past window with a as the outer index, so
/// element 0 is eps_{i-1, j-1}.
struct OrthoMultiplier {
  GKind kind = GKind::lag_product;
  int m_g = 1;

  [[nodiscard]] double operator()(std::span<const double> past) const {
    switch (kind) {
      case GKind::constant:
        return 1.0;
      case GKind::lag_product:
        return past[0];
      case GKind::window_sum: {
        double s = 0.0;
        for (double x : past) s += x;
        return s;
      }
      case GKind::abs_mean: {
        double s = 0.0;
        for (double x : past) s += std::abs(x);
        return s / static_cast<double>(past.size());
      }
    }
    return 0.0;
  }
};

enum class CounterexampleKind { product, sum };

/// Composite description of the stationary field f o T.
struct FieldModel {
  ModelVariant variant = ModelVariant::iid;
  InnovationSpec innovations = InnovationSpec::gaussian();
  CoefficientFamily coefficients = CoefficientFamily::delta();
  int truncation_radius = 0;  // B, resolved by the factories
  std::optional<FunctionalK> functional;
  OrthoMultiplier multiplier;
  CounterexampleKind counterexample = CounterexampleKind::product;
  double sigma_y = 1.0;
  double sigma_z = 1.0;
  ConvolutionPath path = ConvolutionPath::automatic;

  static FieldModel iid(InnovationSpec innovations) {
    FieldModel m;
    m.variant = ModelVariant::iid;
    m.innovations = innovations;
    return m;
  }

  /// Z = sum a_{r,s} eps_{-r,-s} truncated to [0, B]^2; B < 0 picks the
  /// smallest radius whose omitted tail variance is below 1e-4 of the total.
  static FieldModel linear_identity(InnovationSpec innovations, CoefficientFamily family,
                                    int radius = -1) {
    validate(family);
    FieldModel m;
    m.variant = ModelVariant::linear_identity;
    m.innovations = innovations;
    m.truncation_radius = radius >= 0 ? radius : rfclt::truncation_radius(family);
    m.coefficients = std::move(family);
    return m;
  }

  static FieldModel linear_functional(InnovationSpec innovations, CoefficientFamily family,
                                      FunctionalKind kind, int h, const RngStream& centering_stream,
                                      int radius = -1, long long centering_draws = 1'000'000) {
    FieldModel m = linear_identity(innovations, std::move(family), radius);
    m.variant = ModelVariant::linear_functional;
    m.functional = make_functional(kind, h, m.coefficients, m.truncation_radius, innovations,
                                   centering_stream, centering_draws);
    return m;
  }

  static FieldModel orthomartingale(InnovationSpec innovations, GKind g, int m_g) {
    if (m_g < 1) throw ParameterError("orthomartingale window m_g must be positive");
    FieldModel m;
    m.variant = ModelVariant::orthomartingale;
    m.innovations = innovations;
    m.multiplier = {g, m_g};
    return m;
  }

  static FieldModel counterexample_model(CounterexampleKind kind, double sigma_y, double sigma_z) {
    FieldModel m;
    m.variant = ModelVariant::counterexample;
    m.counterexample = kind;
    m.sigma_y = sigma_y;
    m.sigma_z = sigma_z;
    return m;
  }

  [[nodiscard]] int window_size() const { return functional ? functional->h : 1; }

  /// Largest lag at which f o T_0 and f o T_k can share an innovation; also
  /// the generation margin below the observed window.
  [[nodiscard]] int dependence_radius() const {
    switch (variant) {
      case ModelVariant::iid:
        return 0;
      case ModelVariant::linear_identity:
        return truncation_radius;
      case ModelVariant::linear_functional:
        return truncation_radius + window_size() - 1;
      case ModelVariant::orthomartingale:
        return multiplier.m_g;
      case ModelVariant::counterexample:
        break;
    }
    throw UnsupportedModelError("the counterexample field has no finite dependence radius");
  }
};

/// Evaluates f o T at one site from the innovations in its dependency box.
/// The box is (reach + 1) x (reach + 1), row-major, with the site itself in
/// the last cell; cell (r, c) holds eps at lattice (k - reach + r, l - reach + c).
class SiteEvaluator {
 public:
  explicit SiteEvaluator(const FieldModel& model)
      : model_(&model), reach_(model.dependence_radius()) {
    if (model.variant == ModelVariant::linear_identity ||
        model.variant == ModelVariant::linear_functional) {
      kernel_ = kernel_table(model.coefficients, model.truncation_radius);
    }
    window_.resize(static_cast<std::size_t>(model.window_size()) * model.window_size());
    const int mg = model.multiplier.m_g;
    past_.resize(static_cast<std::size_t>(mg) * mg);
  }

  [[nodiscard]] int reach() const { return reach_; }
  [[nodiscard]] int side() const { return reach_ + 1; }

  /// Not reentrant: uses internal scratch buffers. One evaluator per thread.
  double operator()(std::span<const double> box) {
    const int side = reach_ + 1;
    auto at = [&](int r, int c) { return box[static_cast<std::size_t>(r) * side + c]; };
    switch (model_->variant) {
      case ModelVariant::iid:
        return at(reach_, reach_);
      case ModelVariant::linear_identity:
        return linear_at(box, reach_, reach_);
      case ModelVariant::linear_functional: {
        const int h = model_->window_size();
        const int radius = model_->truncation_radius;
        for (int wr = 0; wr < h; ++wr) {
          for (int wc = 0; wc < h; ++wc) {
            window_[static_cast<std::size_t>(wr) * h + wc] = linear_at(box, radius + wr, radius + wc);
          }
        }
        return (*model_->functional)(window_);
      }
      case ModelVariant::orthomartingale: {
        const int mg = model_->multiplier.m_g;
        for (int a = 1; a <= mg; ++a) {
          for (int b = 1; b <= mg; ++b) {
            past_[static_cast<std::size_t>(a - 1) * mg + (b - 1)] = at(reach_ - a, reach_ - b);
          }
        }
        return at(reach_, reach_) * model_->multiplier(past_);
      }
      case ModelVariant::counterexample:
        break;
    }
    throw UnsupportedModelError("no site evaluator for " + to_string(model_->variant));
  }

 private:
  double linear_at(std::span<const double> box, int r, int c) const {
    const int side = reach_ + 1;
    const int kside = model_->truncation_radius + 1;
    double z = 0.0;
    for (int dr = 0; dr < kside; ++dr) {
      for (int dc = 0; dc < kside; ++dc) {
        z += kernel_[static_cast<std::size_t>(dr) * kside + dc] *
             box[static_cast<std::size_t>(r - dr) * side + (c - dc)];
      }
    }
    return z;
  }

  const FieldModel* model_;
  int reach_;
  std::vector<double> kernel_;
  std::vector<double> window_;
  std::vector<double> past_;
};

/// Realized window V_n of the field plus generation metadata.
struct FieldSample {
  FieldArray values;  // lattice {1..m1} x {1..m2}
  int margin = 0;
  int truncation_radius = 0;
};

/// Z_{i,j} = sum_{0 <= r,s <= B} a_{r,s} eps_{i-r,j-s} on every cell with
/// full history inside `innovations`.
inline FieldArray generate_linear_field(const CoefficientFamily& family,
                                        const FieldArray& innovations, int radius,
                                        ConvolutionPath path = ConvolutionPath::automatic) {
  const auto kernel = kernel_table(family, radius);
  return convolve(innovations, kernel, radius, path);
}

inline FieldArray generate_orthomartingale_field(const OrthoMultiplier& g,
                                                 const FieldArray& innovations) {
  const int mg = g.m_g;
  if (mg < 1) throw ParameterError("orthomartingale window m_g must be positive");
  if (innovations.rows() <= mg || innovations.cols() <= mg) {
    throw PreconditionError("innovation margin too small for m_g = " + std::to_string(mg));
  }
  FieldArray out(innovations.rows() - mg, innovations.cols() - mg,
                 {innovations.first_row() + mg, innovations.first_col() + mg});
  std::vector<double> past(static_cast<std::size_t>(mg) * mg);
  for (int i = out.first_row(); i <= out.last_row(); ++i) {
    for (int j = out.first_col(); j <= out.last_col(); ++j) {
      for (int a = 1; a <= mg; ++a) {
        for (int b = 1; b <= mg; ++b) {
          past[static_cast<std::size_t>(a - 1) * mg + (b - 1)] = innovations.at(i - a, j - b);
        }
      }
      out.at(i, j) = innovations.at(i, j) * g(past);
    }
  }
  return out;
}

/// f o T_{i,j} on V_n = {1..m1} x {1..m2}; a pure function of
/// (model, grid, stream).
inline FieldSample generate_field(const FieldModel& model, const Rect& grid,
                                  const RngStream& stream) {
  validate(grid);
  validate(model.innovations);
  const int margin = model.dependence_radius();
  const FieldArray eps = generate_innovations(model.innovations, grid, margin, stream);
  FieldSample out;
  out.margin = margin;
  out.truncation_radius = model.truncation_radius;
  switch (model.variant) {
    case ModelVariant::iid:
      out.values = eps.window(grid);
      break;
    case ModelVariant::linear_identity:
      out.values = generate_linear_field(model.coefficients, eps, model.truncation_radius, model.path)
                       .window(grid);
      break;
    case ModelVariant::linear_functional: {
      const FieldArray z =
          generate_linear_field(model.coefficients, eps, model.truncation_radius, model.path);
      out.values = apply_functional(*model.functional, z).window(grid);
      break;
    }
    case ModelVariant::orthomartingale:
      out.values = generate_orthomartingale_field(model.multiplier, eps).window(grid);
      break;
    case ModelVariant::counterexample:
      throw UnsupportedModelError("the counterexample is simulated by simulate_counterexample");
  }
  return out;
}

/// Realizes f_m o T_{i,j} = E(f o T_{i,j} | eps on the (2m+1)^2 window
/// centered at (i,j)) on the same innovations as generate_field(model,
/// grid, stream), so f - f_m can be formed cell by cell.
///
/// Linear-identity: exact truncation of the kernel to [0, m]^2.
/// Linear-functional: nested Monte Carlo, averaging K over `inner`
/// resamples of the innovations outside the window.
///
/// `inner_replicate` selects an independent set of inner resamples over the
/// same realized innovations; rows are processed on up to `workers` threads.
inline FieldArray m_dependent_approx(const FieldModel& model, int m, const Rect& grid,
                                     const RngStream& stream, int inner = 64,
                                     std::uint64_t inner_replicate = 0, int workers = 1) {
  validate(grid);
  if (m < 0) throw ParameterError("approximation order m must be nonnegative");
  switch (model.variant) {
    case ModelVariant::iid:
      return generate_field(model, grid, stream).values;
    case ModelVariant::linear_identity: {
      const int radius = std::min(m, model.truncation_radius);
      const FieldArray eps = generate_innovations(model.innovations, grid, radius, stream);
      return generate_linear_field(model.coefficients, eps, radius, model.path).window(grid);
    }
    case ModelVariant::linear_functional:
      break;
    case ModelVariant::orthomartingale:
    case ModelVariant::counterexample:
      throw UnsupportedModelError("m-dependent approximation is defined for iid and linear models, not " +
                                  to_string(model.variant));
  }

  const int reach = model.dependence_radius();
  if (m >= reach) return generate_field(model, grid, stream).values;
  if (inner < 1) throw ParameterError("inner replicate count must be positive");

  const int patch = reach + 1;
  const FieldArray eps = generate_innovations(model.innovations, grid, reach, stream);

  FieldArray out(grid.m1, grid.m2);
  const auto rows = parallel_map(static_cast<std::size_t>(grid.m1), workers, [&](std::size_t row) {
    const int i = static_cast<int>(row) + 1;
    SiteEvaluator site_value(model);
    std::vector<double> local(static_cast<std::size_t>(patch) * patch);
    std::vector<double> values(static_cast<std::size_t>(grid.m2));
    for (int j = 1; j <= grid.m2; ++j) {
      const RngStream site = stream.derive("m-dependent-inner", cell_counter(i, j));
      double acc = 0.0;
      for (int t = 0; t < inner; ++t) {
        const RngStream draw = site.derive("draw", inner_replicate * static_cast<std::uint64_t>(inner) +
                                                       static_cast<std::uint64_t>(t));
        for (int pr = 0; pr < patch; ++pr) {
          for (int pc = 0; pc < patch; ++pc) {
            const int li = i - reach + pr;
            const int lj = j - reach + pc;
            const bool kept = (i - li) <= m && (j - lj) <= m;
            local[static_cast<std::size_t>(pr) * patch + pc] =
                kept ? eps.at(li, lj) : model.innovations.draw(draw, cell_counter(li, lj));
          }
        }
        acc += site_value(local);
      }
      values[static_cast<std::size_t>(j - 1)] = acc / inner;
    }
    return values;
  });
  for (int i = 1; i <= grid.m1; ++i) {
    for (int j = 1; j <= grid.m2; ++j) out.at(i, j) = rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
  }
  return out;
}

/// Draws from the product-of-random-walks orthomartingale with Gaussian
/// increments D_i ~ N(0, sigma_y^2), E_j ~ N(0, sigma_z^2):
///   product: M_{n,n}/n = (Y_n / sqrt n)(Z_n / sqrt n)
///   sum:     (Y_n + Z_n) / sqrt n
inline std::vector<double> simulate_counterexample(CounterexampleKind kind, int n, int reps,
                                                   const RngStream& stream, double sigma_y = 1.0,
                                                   double sigma_z = 1.0) {
  if (n < 1) throw ParameterError("counterexample size n must be at least 1");
  if (reps < 1) throw ParameterError("counterexample replicate count must be at least 1");
  if (!(sigma_y > 0.0) || !(sigma_z > 0.0)) throw ParameterError("increment scales must be positive");
  std::vector<double> out(static_cast<std::size_t>(reps));
  const double root_n = std::sqrt(static_cast<double>(n));
  for (int r = 0; r < reps; ++r) {
    const RngStream rep = stream.derive("counterexample", static_cast<std::uint64_t>(r));
    const RngStream d = rep.derive("D");
    const RngStream e = rep.derive("E");
    double y = 0.0;
    double z = 0.0;
    for (int i = 1; i <= n; ++i) {
      y += sigma_y * d.normal(static_cast<std::uint64_t>(i));
      z += sigma_z * e.normal(static_cast<std::uint64_t>(i));
    }
    out[static_cast<std::size_t>(r)] =
        kind == CounterexampleKind::product ? (y / root_n) * (z / root_n) : (y + z) / root_n;
  }
  return out;
}

}  // namespace rfclt
