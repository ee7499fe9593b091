#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rfclt/errors.hpp"

namespace rfclt {

enum class CoefficientKind { delta, additive_decay, product_decay, explicit_table };

/// Causal coefficient array a_{i,j}, supported on i >= 0, j >= 0.
///
///   delta            a_{0,0} = 1, all others 0
///   additive_decay   a_{i,j} = (i + j + 1)^{-q}
///   product_decay    a_{i,j} = (i + 1)^{-q} (j + 1)^{-q}
///   explicit_table   a_{i,j} = table[i][j] inside the table, 0 outside
struct CoefficientFamily {
  CoefficientKind kind = CoefficientKind::delta;
  double q = 2.0;
  std::vector<std::vector<double>> table;

  static CoefficientFamily delta() { return {CoefficientKind::delta, 0.0, {}}; }
  static CoefficientFamily additive_decay(double q) { return {CoefficientKind::additive_decay, q, {}}; }
  static CoefficientFamily product_decay(double q) { return {CoefficientKind::product_decay, q, {}}; }
  static CoefficientFamily explicit_table(std::vector<std::vector<double>> t) {
    return {CoefficientKind::explicit_table, 0.0, std::move(t)};
  }

  [[nodiscard]] bool parametric() const {
    return kind == CoefficientKind::additive_decay || kind == CoefficientKind::product_decay;
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case CoefficientKind::delta:
        return "delta";
      case CoefficientKind::additive_decay:
        return "additive-decay";
      case CoefficientKind::product_decay:
        return "product-decay";
      case CoefficientKind::explicit_table:
        return "explicit";
    }
    return "?";
  }
};

inline void validate(const CoefficientFamily& family) {
  if (family.parametric() && !(family.q > 1.0)) {
    throw DivergenceError(family.name() + " coefficients are not square-summable for q = " +
                          std::to_string(family.q) + " (need q > 1)");
  }
  if (family.kind == CoefficientKind::explicit_table) {
    if (family.table.empty() || family.table.front().empty()) {
      throw ParameterError("explicit coefficient table is empty");
    }
    for (const auto& row : family.table) {
      if (row.size() != family.table.front().size()) {
        throw ParameterError("explicit coefficient table is ragged");
      }
      for (double v : row) {
        if (!std::isfinite(v)) throw ParameterError("explicit coefficient table has non-finite entry");
      }
    }
  }
}

inline double coefficient(const CoefficientFamily& family, int i, int j) {
  if (i < 0 || j < 0) return 0.0;
  switch (family.kind) {
    case CoefficientKind::delta:
      return (i == 0 && j == 0) ? 1.0 : 0.0;
    case CoefficientKind::additive_decay:
      return std::pow(static_cast<double>(i) + j + 1.0, -family.q);
    case CoefficientKind::product_decay:
      return std::pow(i + 1.0, -family.q) * std::pow(j + 1.0, -family.q);
    case CoefficientKind::explicit_table:
      if (i < static_cast<int>(family.table.size()) &&
          j < static_cast<int>(family.table.front().size())) {
        return family.table[i][j];
      }
      return 0.0;
  }
  return 0.0;
}

/// Hurwitz zeta sum_{n >= 0} (n + a)^{-s} for s > 1, a >= 1: a direct head
/// followed by an Euler-Maclaurin remainder with three Bernoulli terms. The
/// head grows until the first omitted correction is below rel_tol.
inline double hurwitz_zeta(double s, double a, double rel_tol = 1e-12) {
  if (!(s > 1.0)) throw DivergenceError("hurwitz zeta requires s > 1");
  if (!(a >= 1.0)) throw DomainError("hurwitz zeta requires a >= 1");
  double start = std::max(a, 16.0);
  for (;;) {
    double head = 0.0;
    for (double x = a; x < start; x += 1.0) head += std::pow(x, -s);
    const double m = start;
    const double pm = std::pow(m, -s);
    double tail = m * pm / (s - 1.0) + 0.5 * pm;
    // B2/2!, B4/4!, B6/6! times rising factorials of s.
    double rising = s;
    double power = pm / m;
    tail += rising * power / 12.0;
    rising *= (s + 1.0) * (s + 2.0);
    power /= m * m;
    tail -= rising * power / 720.0;
    rising *= (s + 3.0) * (s + 4.0);
    power /= m * m;
    tail += rising * power / 30240.0;
    rising *= (s + 5.0) * (s + 6.0);
    power /= m * m;
    const double next = rising * power / 1209600.0;
    const double total = head + tail;
    if (next <= rel_tol * total || start > 1e7) return total;
    start *= 2.0;
  }
}

/// A_{k,l} = sum_{i >= k, j >= l} a_{i,j}^2 with negative indices clamped
/// to 0. Product-decay factorizes into two 1-D Hurwitz tails; additive-decay
/// regroups along anti-diagonals, sum_{j >= 1} j (k + l + j)^{-2q}.
inline double tail_sum_A(const CoefficientFamily& family, int k, int l, double rel_tol = 1e-10) {
  validate(family);
  k = std::max(k, 0);
  l = std::max(l, 0);
  switch (family.kind) {
    case CoefficientKind::delta:
      return (k == 0 && l == 0) ? 1.0 : 0.0;
    case CoefficientKind::product_decay: {
      const double s = 2.0 * family.q;
      const double tol = rel_tol / 4.0;
      return hurwitz_zeta(s, k + 1.0, tol) * hurwitz_zeta(s, l + 1.0, tol);
    }
    case CoefficientKind::additive_decay: {
      const double c = static_cast<double>(k) + l;
      const double s = 2.0 * family.q;
      // sum_{n > c} (n - c) n^{-s}; the subtraction loses at most a factor
      // s - 1 of relative accuracy.
      const double tol = rel_tol / (4.0 * s);
      return hurwitz_zeta(s - 1.0, c + 1.0, tol) - c * hurwitz_zeta(s, c + 1.0, tol);
    }
    case CoefficientKind::explicit_table: {
      double acc = 0.0;
      for (std::size_t i = static_cast<std::size_t>(k); i < family.table.size(); ++i) {
        for (std::size_t j = static_cast<std::size_t>(l); j < family.table[i].size(); ++j) {
          acc += family.table[i][j] * family.table[i][j];
        }
      }
      return acc;
    }
  }
  return 0.0;
}

/// Sum of a^2 outside the box [0, B]^2.
inline double outside_box_square_sum(const CoefficientFamily& family, int radius) {
  return tail_sum_A(family, radius + 1, 0) + tail_sum_A(family, 0, radius + 1) -
         tail_sum_A(family, radius + 1, radius + 1);
}

/// Coefficients on [0, B]^2, row-major (B + 1) x (B + 1).
inline std::vector<double> kernel_table(const CoefficientFamily& family, int radius) {
  if (radius < 0) throw ParameterError("truncation radius must be nonnegative");
  const int side = radius + 1;
  std::vector<double> k(static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r) {
    for (int s = 0; s < side; ++s) k[static_cast<std::size_t>(r) * side + s] = coefficient(family, r, s);
  }
  return k;
}

/// Sum of a_{r,s} and of a_{r,s}^2 over [0, B]^2.
struct BoxSums {
  double linear = 0.0;
  double square = 0.0;
};

inline BoxSums box_sums(const CoefficientFamily& family, int radius) {
  BoxSums out;
  for (double a : kernel_table(family, radius)) {
    out.linear += a;
    out.square += a * a;
  }
  return out;
}

/// Smallest radius B whose omitted tail variance outside [0, B]^2 is below
/// `budget` times the total. Finite supports return their exact extent.
inline int truncation_radius(const CoefficientFamily& family, double budget = 1e-4,
                             int max_radius = 4096) {
  validate(family);
  switch (family.kind) {
    case CoefficientKind::delta:
      return 0;
    case CoefficientKind::explicit_table: {
      // Trailing all-zero rows/columns do not extend the support.
      int radius = 0;
      for (std::size_t i = 0; i < family.table.size(); ++i) {
        for (std::size_t j = 0; j < family.table[i].size(); ++j) {
          if (family.table[i][j] != 0.0) radius = std::max({radius, static_cast<int>(i), static_cast<int>(j)});
        }
      }
      return radius;
    }
    default:
      break;
  }
  const double total = tail_sum_A(family, 0, 0);
  auto ok = [&](int b) { return outside_box_square_sum(family, b) < budget * total; };
  if (!ok(max_radius)) {
    throw CapacityError("truncation radius for " + family.name() + " q=" + std::to_string(family.q) +
                        " exceeds " + std::to_string(max_radius));
  }
  int lo = -1;  // invariant: !ok(lo) or lo == -1; ok(hi)
  int hi = max_radius;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (mid >= 0 && ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace rfclt
