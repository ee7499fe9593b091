#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rfclt/coefficients.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/models.hpp"
#include "rfclt/parallel.hpp"
#include "rfclt/rng.hpp"

namespace rfclt {

/// A_{k,l} for 1 <= k <= K, 1 <= l <= L.
struct TailSumTable {
  CoefficientFamily family;
  int max_k = 0;
  int max_l = 0;
  double rel_tol = 1e-10;
  std::vector<double> entries;  // row-major, (k-1) * L + (l-1)

  [[nodiscard]] double operator()(int k, int l) const {
    return entries[static_cast<std::size_t>(k - 1) * max_l + (l - 1)];
  }
};

inline TailSumTable build_tail_sum_table(const CoefficientFamily& family, int max_k, int max_l,
                                         double rel_tol = 1e-10) {
  if (max_k < 1 || max_l < 1) throw ParameterError("tail-sum table needs K, L >= 1");
  TailSumTable t{family, max_k, max_l, rel_tol, {}};
  t.entries.resize(static_cast<std::size_t>(max_k) * max_l);
  for (int k = 1; k <= max_k; ++k) {
    for (int l = 1; l <= max_l; ++l) {
      t.entries[static_cast<std::size_t>(k - 1) * max_l + (l - 1)] = tail_sum_A(family, k, l, rel_tol);
    }
  }
  return t;
}

/// Least-squares slope of log y against log x.
inline double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("slope fit needs >= 2 points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

enum class TailDirection { diagonal, axis };

/// Fitted decay exponent of A(k, k) (diagonal) or A(k, 1) (axis) over
/// integer k in [k_min, k_max].
inline double tail_sum_exponent(const CoefficientFamily& family, TailDirection direction, int k_min,
                                int k_max) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (int k = k_min; k <= k_max; ++k) {
    xs.push_back(k);
    ys.push_back(direction == TailDirection::diagonal ? tail_sum_A(family, k, k)
                                                      : tail_sum_A(family, k, 1));
  }
  return fit_log_slope(xs, ys);
}

/// Partial sums P(K) = sum_{k,l <= K} A_{k+1-h, l+1-h}^{alpha/2} / sqrt(k l)
/// for K = 1..K_max (element K-1).
inline std::vector<double> condition_series_partial(const CoefficientFamily& family, double alpha,
                                                    int h, int k_max) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (h < 1) throw ParameterError("window size h must be positive");
  if (k_max < 1) throw ParameterError("K_max must be positive");
  validate(family);
  const int shift = 1 - h;
  std::vector<double> term(static_cast<std::size_t>(k_max) * k_max);
  auto put = [&](int k, int l, double a) {
    term[static_cast<std::size_t>(k - 1) * k_max + (l - 1)] =
        std::pow(a, alpha / 2.0) / std::sqrt(static_cast<double>(k) * l);
  };
  if (family.kind == CoefficientKind::product_decay) {
    // A_{k,l} = A_{k,0} A_{0,l} / A_{0,0}.
    std::vector<double> axis(static_cast<std::size_t>(k_max));
    for (int k = 1; k <= k_max; ++k) axis[k - 1] = tail_sum_A(family, k + shift, 0);
    const double norm = tail_sum_A(family, 0, 0);
    for (int k = 1; k <= k_max; ++k) {
      for (int l = 1; l <= k_max; ++l) put(k, l, axis[k - 1] * axis[l - 1] / norm);
    }
  } else if (family.kind == CoefficientKind::additive_decay) {
    // A_{k,l} depends on k + l only (for nonnegative indices).
    std::vector<double> diag(static_cast<std::size_t>(2 * k_max + 1), -1.0);
    for (int k = 1; k <= k_max; ++k) {
      for (int l = 1; l <= k_max; ++l) {
        const int kk = std::max(k + shift, 0);
        const int ll = std::max(l + shift, 0);
        double& slot = diag[static_cast<std::size_t>(kk + ll)];
        if (slot < 0.0) slot = tail_sum_A(family, kk, ll);
        put(k, l, slot);
      }
    }
  } else {
    for (int k = 1; k <= k_max; ++k) {
      for (int l = 1; l <= k_max; ++l) put(k, l, tail_sum_A(family, k + shift, l + shift));
    }
  }
  std::vector<double> partial(static_cast<std::size_t>(k_max));
  double acc = 0.0;
  for (int n = 1; n <= k_max; ++n) {
    // New border of the n x n square.
    for (int l = 1; l <= n; ++l) acc += term[static_cast<std::size_t>(n - 1) * k_max + (l - 1)];
    for (int k = 1; k < n; ++k) acc += term[static_cast<std::size_t>(k - 1) * k_max + (n - 1)];
    partial[n - 1] = acc;
  }
  return partial;
}

/// Cauchy gap P(2K) - P(K) from a partial-sum sequence (element K-1 = P(K)).
inline double cauchy_gap(const std::vector<double>& partial, int k) {
  if (k < 1 || 2 * k > static_cast<int>(partial.size())) throw BoundsError("Cauchy gap index out of range");
  return partial[2 * k - 1] - partial[k - 1];
}

/// Analytic summability thresholds for the parametric families. Numerics
/// alone never classify a series as divergent.
struct FamilyClassification {
  bool parametric = false;
  double projective_threshold = 0.0;  // condition series converges for q above
  double root_summable_threshold = 0.0;  // sum |a|^{1/2} < inf for q above
  bool projective_condition = false;
  bool root_summable = false;
};

inline FamilyClassification classify_family(const CoefficientFamily& family) {
  FamilyClassification c;
  if (family.kind == CoefficientKind::additive_decay) {
    c = {true, 2.0, 4.0, family.q > 2.0, family.q > 4.0};
  } else if (family.kind == CoefficientKind::product_decay) {
    c = {true, 1.5, 2.0, family.q > 1.5, family.q > 2.0};
  }
  return c;
}

enum class ConditionalNormMethod { automatic, monte_carlo };

/// Estimate of ||E(f o T_{k,l} | F_{1,1})||_p.
///
/// For p = 2 the Monte Carlo path estimates the squared norm without inner
/// bias (product of two independent inner averages) and `estimate` is the
/// signed square root of that unbiased value, so noise around a zero norm
/// averages out instead of accumulating.
struct NormEstimate {
  int k = 1;
  int l = 1;
  double p = 2.0;
  double estimate = 0.0;
  double se = 0.0;
  double power_estimate = 0.0;  // E|.|^p scale (squared norm for p = 2)
  double power_se = 0.0;
  bool exact = false;
  long long outer = 0;
  long long inner = 0;
  std::string caveat;
};

struct MonteCarloParams {
  int outer = 4096;
  int inner = 64;
  int workers = 1;
};

namespace detail {

inline double root_se(double power, double power_se, double p) {
  // Delta method away from zero, floored at the scale of the noise itself.
  const double scale = std::max(std::abs(power), power_se / std::pow(2.0, p));
  if (scale <= 0.0) return 0.0;
  return power_se / (p * std::pow(scale, (p - 1.0) / p));
}

}  // namespace detail

inline NormEstimate estimate_conditional_norm(const FieldModel& model, int k, int l, double p,
                                              const MonteCarloParams& mc, const RngStream& stream,
                                              ConditionalNormMethod method = ConditionalNormMethod::automatic) {
  if (k < 1 || l < 1) throw ParameterError("conditional norm needs k, l >= 1");
  if (!(p >= 2.0)) throw ParameterError("conditional norm needs p >= 2");
  if (model.variant == ModelVariant::counterexample) {
    throw UnsupportedModelError("the counterexample has no product-space filtration of this form");
  }
  NormEstimate out;
  out.k = k;
  out.l = l;
  out.p = p;

  const bool automatic = method == ConditionalNormMethod::automatic;
  if (automatic && model.variant == ModelVariant::iid) {
    out.exact = true;
    out.estimate = (k == 1 && l == 1) ? std::pow(model.innovations.abs_moment(p), 1.0 / p) : 0.0;
    out.power_estimate = std::pow(out.estimate, p);
    return out;
  }
  const bool gaussian = model.innovations.kind == InnovationKind::gaussian;
  if (automatic && model.variant == ModelVariant::linear_identity && (p == 2.0 || gaussian)) {
    // E(Z_{k,l} | F_{1,1}) = sum over (r,s) <= (1,1) of a_{k-r,l-s} eps_{r,s},
    // i.e. the coefficients with indices >= (k-1, l-1) inside the box.
    const int radius = model.truncation_radius;
    double a2 = 0.0;
    for (int i = std::max(k - 1, 0); i <= radius; ++i) {
      for (int j = std::max(l - 1, 0); j <= radius; ++j) {
        const double a = coefficient(model.coefficients, i, j);
        a2 += a * a;
      }
    }
    const double sd = std::sqrt(model.innovations.variance() * a2);
    out.exact = true;
    out.estimate = p == 2.0 ? sd : sd * std::pow(InnovationSpec::gaussian(1.0).abs_moment(p), 1.0 / p);
    out.power_estimate = std::pow(out.estimate, p);
    return out;
  }

  SiteEvaluator probe(model);
  const int reach = probe.reach();
  const int side = probe.side();
  const int row0 = k - reach;
  const int col0 = l - reach;
  bool any_fixed = false;
  bool any_free = false;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const bool fixed = row0 + r <= 1 && col0 + c <= 1;
      any_fixed = any_fixed || fixed;
      any_free = any_free || !fixed;
    }
  }
  if (!any_fixed) {
    // No innovation of the site is in F_{1,1}: the conditional expectation
    // is E f = 0 for the truncated model.
    out.exact = true;
    out.caveat = "dependency box disjoint from F_{1,1}";
    return out;
  }
  if (mc.outer < 2 || mc.inner < 1) throw ParameterError("need outer >= 2 and inner >= 1");
  const int inner = any_free ? mc.inner : 1;
  const bool two_replicate = p == 2.0;

  constexpr int kChunk = 64;
  const int chunks = (mc.outer + kChunk - 1) / kChunk;
  struct ChunkSums {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const auto partial = parallel_map(static_cast<std::size_t>(chunks), mc.workers, [&](std::size_t chunk) {
    SiteEvaluator eval(model);
    std::vector<double> box(static_cast<std::size_t>(side) * side);
    ChunkSums s;
    const int first = static_cast<int>(chunk) * kChunk;
    const int last = std::min(mc.outer, first + kChunk);
    for (int o = first; o < last; ++o) {
      const RngStream outer_stream = stream.derive("outer", static_cast<std::uint64_t>(o));
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          if (row0 + r <= 1 && col0 + c <= 1) {
            box[static_cast<std::size_t>(r) * side + c] =
                model.innovations.draw(outer_stream, cell_counter(row0 + r, col0 + c));
          }
        }
      }
      double averages[2] = {0.0, 0.0};
      const int replicates = two_replicate ? 2 : 1;
      for (int rep = 0; rep < replicates; ++rep) {
        double acc = 0.0;
        for (int t = 0; t < inner; ++t) {
          const RngStream draw =
              outer_stream.derive("inner", static_cast<std::uint64_t>(rep) * inner + t);
          for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
              if (!(row0 + r <= 1 && col0 + c <= 1)) {
                box[static_cast<std::size_t>(r) * side + c] =
                    model.innovations.draw(draw, cell_counter(row0 + r, col0 + c));
              }
            }
          }
          acc += eval(box);
        }
        averages[rep] = acc / inner;
      }
      const double v = two_replicate ? averages[0] * averages[1] : std::pow(std::abs(averages[0]), p);
      s.sum += v;
      s.sum_sq += v * v;
    }
    return s;
  });
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& c : partial) {
    sum += c.sum;
    sum_sq += c.sum_sq;
  }
  const double n = mc.outer;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  out.outer = mc.outer;
  out.inner = inner;
  out.power_estimate = mean;
  out.power_se = std::sqrt(var / n);
  if (two_replicate) {
    out.estimate = std::copysign(std::sqrt(std::abs(mean)), mean);
  } else {
    out.estimate = std::pow(std::max(mean, 0.0), 1.0 / p);
    out.caveat = "inner-average bias not removed for p > 2";
  }
  out.se = detail::root_se(mean, out.power_se, p);
  return out;
}

/// Partial sums of the projective series over k <= K_max, l <= L_max.
struct ProjectiveReport {
  int max_k = 0;
  int max_l = 0;
  double p = 2.0;
  std::vector<NormEstimate> terms;     // row-major (k-1) * L + (l-1)
  std::vector<double> partial;         // P(K, L) row-major
  std::vector<double> partial_se;
  FamilyClassification classification;

  [[nodiscard]] const NormEstimate& term(int k, int l) const {
    return terms[static_cast<std::size_t>(k - 1) * max_l + (l - 1)];
  }
  [[nodiscard]] double partial_sum(int k, int l) const {
    return partial[static_cast<std::size_t>(k - 1) * max_l + (l - 1)];
  }
  [[nodiscard]] double partial_sum_se(int k, int l) const {
    return partial_se[static_cast<std::size_t>(k - 1) * max_l + (l - 1)];
  }
  [[nodiscard]] double total() const { return partial.back(); }
  [[nodiscard]] double total_se() const { return partial_se.back(); }
};

inline ProjectiveReport delta_tilde_partial(const FieldModel& model, int max_k, int max_l, double p,
                                            const MonteCarloParams& mc, const RngStream& stream,
                                            ConditionalNormMethod method = ConditionalNormMethod::automatic) {
  if (max_k < 1 || max_l < 1) throw ParameterError("K_max and L_max must be positive");
  ProjectiveReport rep;
  rep.max_k = max_k;
  rep.max_l = max_l;
  rep.p = p;
  if (model.variant == ModelVariant::linear_identity || model.variant == ModelVariant::linear_functional) {
    rep.classification = classify_family(model.coefficients);
  }
  for (int k = 1; k <= max_k; ++k) {
    for (int l = 1; l <= max_l; ++l) {
      rep.terms.push_back(estimate_conditional_norm(model, k, l, p, mc,
                                                    stream.derive("term", cell_counter(k, l)), method));
    }
  }
  // Inclusion-exclusion over the term grid; variances add because terms use
  // independent streams.
  rep.partial.assign(rep.terms.size(), 0.0);
  rep.partial_se.assign(rep.terms.size(), 0.0);
  std::vector<double> var(rep.terms.size(), 0.0);
  auto idx = [max_l](int k, int l) { return static_cast<std::size_t>(k - 1) * max_l + (l - 1); };
  for (int k = 1; k <= max_k; ++k) {
    for (int l = 1; l <= max_l; ++l) {
      const auto& t = rep.terms[idx(k, l)];
      const double w = 1.0 / std::sqrt(static_cast<double>(k) * l);
      double s = t.estimate * w;
      double v = t.se * t.se * w * w;
      if (k > 1) {
        s += rep.partial[idx(k - 1, l)];
        v += var[idx(k - 1, l)];
      }
      if (l > 1) {
        s += rep.partial[idx(k, l - 1)];
        v += var[idx(k, l - 1)];
      }
      if (k > 1 && l > 1) {
        s -= rep.partial[idx(k - 1, l - 1)];
        v -= var[idx(k - 1, l - 1)];
      }
      rep.partial[idx(k, l)] = s;
      var[idx(k, l)] = std::max(v, 0.0);
      rep.partial_se[idx(k, l)] = std::sqrt(var[idx(k, l)]);
    }
  }
  return rep;
}

}  // namespace rfclt
