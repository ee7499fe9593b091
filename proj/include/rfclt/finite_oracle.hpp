#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfclt/errors.hpp"
#include "rfclt/lattice.hpp"

namespace rfclt {

/// All 2^cells Rademacher sign assignments on a lattice rectangle, each with
/// probability 2^-cells. Cell (i, j) is bit (i - origin.i) * cols + (j - origin.j);
/// a set bit means +1.
class FiniteSpace {
 public:
  static constexpr int max_cells = 20;

  FiniteSpace(int rows, int cols, LatticePoint origin = {1, 1}) : rows_(rows), cols_(cols), origin_(origin) {
    if (rows < 1 || cols < 1) throw DimensionError("finite space must have at least one cell");
    if (rows * cols > max_cells) {
      throw CapacityError("finite space limited to " + std::to_string(max_cells) + " cells, got " +
                          std::to_string(rows * cols));
    }
  }

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] LatticePoint origin() const { return origin_; }
  [[nodiscard]] int cells() const { return rows_ * cols_; }
  [[nodiscard]] std::size_t outcomes() const { return std::size_t{1} << cells(); }
  [[nodiscard]] int first_row() const { return origin_.i; }
  [[nodiscard]] int first_col() const { return origin_.j; }
  [[nodiscard]] int last_row() const { return origin_.i + rows_ - 1; }
  [[nodiscard]] int last_col() const { return origin_.j + cols_ - 1; }

  [[nodiscard]] bool contains(int i, int j) const {
    return i >= first_row() && i <= last_row() && j >= first_col() && j <= last_col();
  }

  [[nodiscard]] int bit(int i, int j) const {
    if (!contains(i, j)) {
      throw BoundsError("cell (" + std::to_string(i) + ", " + std::to_string(j) + ") outside finite space");
    }
    return (i - origin_.i) * cols_ + (j - origin_.j);
  }

  [[nodiscard]] double sign(std::size_t outcome, int i, int j) const {
    return ((outcome >> bit(i, j)) & 1u) != 0u ? 1.0 : -1.0;
  }

  /// Mask of cells (a, b) with a <= i and b <= j.
  [[nodiscard]] std::uint32_t quadrant(long long i, long long j) const {
    std::uint32_t mask = 0;
    for (int a = first_row(); a <= last_row(); ++a) {
      for (int b = first_col(); b <= last_col(); ++b) {
        if (a <= i && b <= j) mask |= std::uint32_t{1} << bit(a, b);
      }
    }
    return mask;
  }
  /// F_{i,j}, F_{i,inf}, F_{inf,j} clipped to the space.
  [[nodiscard]] std::uint32_t past(int i, int j) const { return quadrant(i, j); }
  [[nodiscard]] std::uint32_t rows_up_to(int i) const { return quadrant(i, last_col()); }
  [[nodiscard]] std::uint32_t cols_up_to(int j) const { return quadrant(last_row(), j); }
  [[nodiscard]] std::uint32_t all() const {
    return (std::uint32_t{1} << cells()) - 1u;
  }

 private:
  int rows_;
  int cols_;
  LatticePoint origin_;
};

/// One value per outcome of a FiniteSpace.
struct ExactRandomVariable {
  std::vector<double> values;

  [[nodiscard]] double expectation() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }

  /// (E|X|^p)^{1/p}
  [[nodiscard]] double norm(double p) const {
    double s = 0.0;
    for (double v : values) s += std::pow(std::abs(v), p);
    return std::pow(s / static_cast<double>(values.size()), 1.0 / p);
  }

  ExactRandomVariable& operator+=(const ExactRandomVariable& o) {
    for (std::size_t w = 0; w < values.size(); ++w) values[w] += o.values[w];
    return *this;
  }
  ExactRandomVariable& operator-=(const ExactRandomVariable& o) {
    for (std::size_t w = 0; w < values.size(); ++w) values[w] -= o.values[w];
    return *this;
  }
  friend ExactRandomVariable operator+(ExactRandomVariable a, const ExactRandomVariable& b) { return a += b; }
  friend ExactRandomVariable operator-(ExactRandomVariable a, const ExactRandomVariable& b) { return a -= b; }
};

inline double max_abs_difference(const ExactRandomVariable& a, const ExactRandomVariable& b) {
  if (a.values.size() != b.values.size()) throw DimensionError("random variables on different spaces");
  double d = 0.0;
  for (std::size_t w = 0; w < a.values.size(); ++w) d = std::max(d, std::abs(a.values[w] - b.values[w]));
  return d;
}

/// f o T_{0,0} as a function of eps at the given offsets (all components <= 0
/// for a causal f). The evaluator sees the signs in offset order.
struct WindowFunction {
  std::vector<LatticePoint> offsets;
  std::function<double(std::span<const double>)> evaluator;

  /// eps_{0,0}
  static WindowFunction single() {
    return {{{0, 0}}, [](std::span<const double> e) { return e[0]; }};
  }

  /// Product of eps over the offsets.
  static WindowFunction product(std::vector<LatticePoint> offsets) {
    return {std::move(offsets), [](std::span<const double> e) {
              double p = 1.0;
              for (double v : e) p *= v;
              return p;
            }};
  }

  /// Lookup table indexed by the sign pattern: bit k set iff the k-th offset is +1.
  static WindowFunction from_table(std::vector<LatticePoint> offsets, std::vector<double> table) {
    if (table.size() != (std::size_t{1} << offsets.size())) {
      throw ParameterError("lookup table must have 2^offsets entries");
    }
    return {std::move(offsets), [t = std::move(table)](std::span<const double> e) {
              std::size_t idx = 0;
              for (std::size_t k = 0; k < e.size(); ++k) {
                if (e[k] > 0.0) idx |= std::size_t{1} << k;
              }
              return t[idx];
            }};
  }
};

/// f o T_{i,j} on every outcome.
inline ExactRandomVariable shifted_value(const WindowFunction& f, int i, int j, const FiniteSpace& space) {
  for (const auto& o : f.offsets) {
    if (!space.contains(i + o.i, j + o.j)) {
      throw PreconditionError("window of f at (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") leaves the finite space");
    }
  }
  std::vector<int> bits;
  bits.reserve(f.offsets.size());
  for (const auto& o : f.offsets) bits.push_back(space.bit(i + o.i, j + o.j));
  ExactRandomVariable x;
  x.values.resize(space.outcomes());
  std::vector<double> e(bits.size());
  for (std::size_t w = 0; w < x.values.size(); ++w) {
    for (std::size_t k = 0; k < bits.size(); ++k) e[k] = ((w >> bits[k]) & 1u) != 0u ? 1.0 : -1.0;
    x.values[w] = f.evaluator(e);
  }
  return x;
}

/// S_{m,n}(f) = sum_{1 <= i <= m, 1 <= j <= n} f o T_{i,j}.
inline ExactRandomVariable partial_sum(const WindowFunction& f, int m, int n, const FiniteSpace& space) {
  if (m < 1 || n < 1) throw ParameterError("partial-sum rectangle must be nonempty");
  ExactRandomVariable s;
  s.values.assign(space.outcomes(), 0.0);
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= n; ++j) s += shifted_value(f, i, j, space);
  }
  return s;
}

/// E(X | sigma(eps on `cells`)): each free cell is integrated out by
/// averaging the two outcomes that differ only in that bit.
inline ExactRandomVariable exact_conditional_expectation(const ExactRandomVariable& x,
                                                         std::uint32_t cells, const FiniteSpace& space) {
  if (x.values.size() != space.outcomes()) throw DimensionError("random variable does not match the space");
  if ((cells & ~space.all()) != 0u) throw PreconditionError("conditioning cells outside the space");
  ExactRandomVariable out = x;
  for (int b = 0; b < space.cells(); ++b) {
    if (((cells >> b) & 1u) != 0u) continue;
    const std::size_t step = std::size_t{1} << b;
    for (std::size_t w = 0; w < out.values.size(); ++w) {
      if ((w & step) != 0u) continue;
      const double avg = 0.5 * (out.values[w] + out.values[w | step]);
      out.values[w] = avg;
      out.values[w | step] = avg;
    }
  }
  return out;
}

/// Max over outcomes of |E[E(X | F v G) | G v H] - E(X | G)|.
inline double verify_commuting(const ExactRandomVariable& x, std::uint32_t f_cells, std::uint32_t g_cells,
                               std::uint32_t h_cells, const FiniteSpace& space) {
  if ((f_cells & g_cells) != 0u || (f_cells & h_cells) != 0u || (g_cells & h_cells) != 0u) {
    throw PreconditionError("commuting identity needs pairwise disjoint cell sets");
  }
  const auto inner = exact_conditional_expectation(x, f_cells | g_cells, space);
  const auto lhs = exact_conditional_expectation(inner, g_cells | h_cells, space);
  const auto rhs = exact_conditional_expectation(x, g_cells, space);
  return max_abs_difference(lhs, rhs);
}

/// Max over outcomes of |E[E(X | F_{i,inf}) | F_{inf,j}] - E(X | F_{i,j})|.
inline double verify_marginal_commuting(const ExactRandomVariable& x, int i, int j, const FiniteSpace& space) {
  const auto inner = exact_conditional_expectation(x, space.rows_up_to(i), space);
  const auto lhs = exact_conditional_expectation(inner, space.cols_up_to(j), space);
  const auto rhs = exact_conditional_expectation(x, space.past(i, j), space);
  return max_abs_difference(lhs, rhs);
}

/// Exact law of S(V, f) over V = {1..m1} x {1..m2}: (value, probability)
/// pairs sorted by value. Values within 1e-12 are merged.
inline std::vector<std::pair<double, double>> exact_distribution_S(const WindowFunction& f, const Rect& rect,
                                                                   const FiniteSpace& space) {
  validate(rect);
  const auto s = partial_sum(f, rect.m1, rect.m2, space);
  std::map<double, double> law;
  const double weight = 1.0 / static_cast<double>(space.outcomes());
  for (double v : s.values) law[v] += weight;
  std::vector<std::pair<double, double>> out;
  for (const auto& [v, p] : law) {
    if (!out.empty() && std::abs(v - out.back().first) <= 1e-12) {
      out.back().second += p;
    } else {
      out.emplace_back(v, p);
    }
  }
  return out;
}

struct MomentInequalityReport {
  int m = 0;
  int n = 0;
  double p = 2.0;
  double lhs = 0.0;   // ||S_{m,n}||_p
  double rhs0 = 0.0;  // sqrt(mn) sum d_{k,l} / (k l)^{3/2}
  double ratio = 0.0;
  double adapted_rhs0 = 0.0;  // same with d_{k,l} replaced by ||E(S_{k,l} | F_{1,1})||_p
  double adapted_ratio = 0.0;
  std::vector<double> d;  // d_{k,l}, row-major m x n
  std::string hypothesis_note;
  std::string warning;
};

/// Both sides of the moment inequality, evaluated exactly. The infinite
/// past is replaced by the space boundary, so F_{-inf,inf} and F_{inf,-inf}
/// are trivial here and their hypothesis reduces to E f = 0.
inline MomentInequalityReport moment_inequality_ratio(const WindowFunction& f, int m, int n, double p,
                                                      const FiniteSpace& space) {
  if (m < 1 || n < 1 || m > 4 || n > 4) throw PreconditionError("moment inequality check needs 1 <= m, n <= 4");
  if (p < 2.0) throw ParameterError("moment inequality needs p >= 2");
  MomentInequalityReport r;
  r.m = m;
  r.n = n;
  r.p = p;
  r.hypothesis_note =
      "E(f | F_{-inf,inf}) = E(f | F_{inf,-inf}) = 0 is checked as E f = 0 on the finite space; "
      "this is the clipped analogue, not the infinite-lattice condition";
  const double mean = shifted_value(f, 1, 1, space).expectation();
  if (std::abs(mean) > 1e-12) r.warning = "f is not mean-zero; the inequality's hypothesis fails";

  r.d.assign(static_cast<std::size_t>(m) * n, 0.0);
  double sum = 0.0;
  double adapted = 0.0;
  for (int k = 1; k <= m; ++k) {
    for (int l = 1; l <= n; ++l) {
      const auto s = partial_sum(f, k, l, space);
      const auto e11 = exact_conditional_expectation(s, space.past(1, 1), space);
      const auto e1inf = exact_conditional_expectation(s, space.rows_up_to(1), space);
      const auto e1l = exact_conditional_expectation(s, space.past(1, l), space);
      const auto einf1 = exact_conditional_expectation(s, space.cols_up_to(1), space);
      const auto ek1 = exact_conditional_expectation(s, space.past(k, 1), space);
      const auto ekinf = exact_conditional_expectation(s, space.rows_up_to(k), space);
      const auto einfl = exact_conditional_expectation(s, space.cols_up_to(l), space);
      const auto ekl = exact_conditional_expectation(s, space.past(k, l), space);
      const double first = e11.norm(p);
      const double dkl = first + (e1inf - e1l).norm(p) + (einf1 - ek1).norm(p) +
                         (s - ekinf - einfl + ekl).norm(p);
      r.d[static_cast<std::size_t>(k - 1) * n + (l - 1)] = dkl;
      const double w = std::pow(static_cast<double>(k) * l, 1.5);
      sum += dkl / w;
      adapted += first / w;
    }
  }
  const double root = std::sqrt(static_cast<double>(m) * n);
  r.lhs = partial_sum(f, m, n, space).norm(p);
  r.rhs0 = root * sum;
  r.adapted_rhs0 = root * adapted;
  r.ratio = r.rhs0 > 0.0 ? r.lhs / r.rhs0 : (r.lhs > 0.0 ? HUGE_VAL : 0.0);
  r.adapted_ratio = r.adapted_rhs0 > 0.0 ? r.lhs / r.adapted_rhs0 : (r.lhs > 0.0 ? HUGE_VAL : 0.0);
  return r;
}

}  // namespace rfclt
