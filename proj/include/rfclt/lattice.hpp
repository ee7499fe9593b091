#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rfclt/errors.hpp"

namespace rfclt {

/// Lattice point (i, j) in Z^2; i is the row coordinate, j the column.
struct LatticePoint {
  int i = 0;
  int j = 0;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

/// The rectangle V = {1..m1} x {1..m2}.
struct Rect {
  int m1 = 1;
  int m2 = 1;

  [[nodiscard]] long long cells() const { return static_cast<long long>(m1) * m2; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

inline void validate(const Rect& r) {
  if (r.m1 < 1 || r.m2 < 1) {
    throw DimensionError("rectangle dimensions must be positive, got " + std::to_string(r.m1) +
                         "x" + std::to_string(r.m2));
  }
}

/// Point of the unit square [0,1]^2 at which the sheet process is evaluated.
struct SheetPoint {
  double t1 = 0.0;
  double t2 = 0.0;
};

/// Dense row-major array of field values indexed by lattice coordinates.
///
/// Element (0, 0) of the storage sits at lattice point `origin()`; shifting the
/// field by T_{k,l} is index translation on this array.
class FieldArray {
 public:
  FieldArray() = default;

  FieldArray(int rows, int cols, LatticePoint origin = {1, 1}, double fill = 0.0)
      : origin_(origin), rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
      throw DimensionError("field array must be nonempty, got " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    values_.assign(static_cast<std::size_t>(rows) * cols, fill);
  }

  /// Builds a 1-based array (origin (1,1)) from nested rows.
  static FieldArray from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw DimensionError("field array must be nonempty");
    FieldArray out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < out.rows(); ++r) {
      if (static_cast<int>(rows[r].size()) != out.cols()) {
        throw DimensionError("ragged rows in field array");
      }
      for (int c = 0; c < out.cols(); ++c) out.local(r, c) = rows[r][c];
    }
    return out;
  }

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] bool empty() const { return values_.empty(); }
  [[nodiscard]] LatticePoint origin() const { return origin_; }
  [[nodiscard]] int first_row() const { return origin_.i; }
  [[nodiscard]] int first_col() const { return origin_.j; }
  [[nodiscard]] int last_row() const { return origin_.i + rows_ - 1; }
  [[nodiscard]] int last_col() const { return origin_.j + cols_ - 1; }

  [[nodiscard]] bool contains(int i, int j) const {
    return i >= first_row() && i <= last_row() && j >= first_col() && j <= last_col();
  }

  /// Access by zero-based storage index.
  double& local(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  [[nodiscard]] double local(int r, int c) const {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }

  /// Access by lattice coordinates.
  double& at(int i, int j) { return local(i - origin_.i, j - origin_.j); }
  [[nodiscard]] double at(int i, int j) const { return local(i - origin_.i, j - origin_.j); }

  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Copies the lattice sub-rectangle [lo, hi] (inclusive) into a new array
  /// that keeps lattice coordinates.
  [[nodiscard]] FieldArray crop(LatticePoint lo, LatticePoint hi) const {
    if (!contains(lo.i, lo.j) || !contains(hi.i, hi.j) || lo.i > hi.i || lo.j > hi.j) {
      throw BoundsError("crop window outside field array");
    }
    FieldArray out(hi.i - lo.i + 1, hi.j - lo.j + 1, lo);
    for (int i = lo.i; i <= hi.i; ++i) {
      for (int j = lo.j; j <= hi.j; ++j) out.at(i, j) = at(i, j);
    }
    return out;
  }

  /// Crops to V_n = {1..m1} x {1..m2}.
  [[nodiscard]] FieldArray window(const Rect& rect) const {
    return crop({1, 1}, {rect.m1, rect.m2});
  }

 private:
  LatticePoint origin_{1, 1};
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

/// Double prefix sums with an implicit zero border: cum(i, j) is the sum of
/// the first i rows and j columns of the source array (1-based, local).
class SummedAreaTable {
 public:
  SummedAreaTable() = default;

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] Rect dims() const { return {rows_, cols_}; }

  [[nodiscard]] double cum(int i, int j) const {
    return cum_[static_cast<std::size_t>(i) * (cols_ + 1) + j];
  }

 private:
  friend SummedAreaTable build_summed_area(const FieldArray& field);

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> cum_;
};

inline SummedAreaTable build_summed_area(const FieldArray& field) {
  if (field.empty()) throw DimensionError("cannot build a summed-area table of an empty field");
  SummedAreaTable t;
  t.rows_ = field.rows();
  t.cols_ = field.cols();
  const std::size_t stride = static_cast<std::size_t>(t.cols_) + 1;
  t.cum_.assign((static_cast<std::size_t>(t.rows_) + 1) * stride, 0.0);
  for (int i = 1; i <= t.rows_; ++i) {
    double row_sum = 0.0;
    for (int j = 1; j <= t.cols_; ++j) {
      const double v = field.local(i - 1, j - 1);
      if (!std::isfinite(v)) throw DomainError("field contains a non-finite value");
      row_sum += v;
      t.cum_[i * stride + j] = t.cum_[(i - 1) * stride + j] + row_sum;
    }
  }
  return t;
}

/// Sum over the closed local index rectangle [lo, hi] (1-based).
inline double rect_sum(const SummedAreaTable& table, LatticePoint lo, LatticePoint hi) {
  if (lo.i < 1 || lo.j < 1 || hi.i > table.rows() || hi.j > table.cols() || lo.i > hi.i ||
      lo.j > hi.j) {
    throw BoundsError("rectangle [" + std::to_string(lo.i) + "," + std::to_string(lo.j) + "]..[" +
                      std::to_string(hi.i) + "," + std::to_string(hi.j) +
                      "] outside summed-area table of size " + std::to_string(table.rows()) + "x" +
                      std::to_string(table.cols()));
  }
  return table.cum(hi.i, hi.j) - table.cum(lo.i - 1, hi.j) - table.cum(hi.i, lo.j - 1) +
         table.cum(lo.i - 1, lo.j - 1);
}

/// Sum over the square of half-width `radius` around `center`, clipped to
/// the table. Used by the lag-window variance estimators.
inline double clipped_box_sum(const SummedAreaTable& table, LatticePoint center, int radius) {
  const int r0 = std::max(1, center.i - radius);
  const int r1 = std::min(table.rows(), center.i + radius);
  const int c0 = std::max(1, center.j - radius);
  const int c1 = std::min(table.cols(), center.j + radius);
  if (r0 > r1 || c0 > c1) return 0.0;
  return table.cum(r1, c1) - table.cum(r0 - 1, c1) - table.cum(r1, c0 - 1) +
         table.cum(r0 - 1, c0 - 1);
}

/// Interpolated partial sum B_{n,t}: the sum of cell values weighted by the
/// area of their overlap with [0, m1 t1] x [0, m2 t2]. Cell weights are
/// products of per-axis overlaps, so this is the bilinear interpolation of
/// the prefix-sum surface at (m1 t1, m2 t2).
inline double sheet_value(const SummedAreaTable& table, SheetPoint t) {
  if (!(t.t1 >= 0.0 && t.t1 <= 1.0 && t.t2 >= 0.0 && t.t2 <= 1.0)) {
    throw DomainError("sheet parameter must lie in the unit square");
  }
  const double x = table.rows() * t.t1;
  const double y = table.cols() * t.t2;
  const int a = std::min(static_cast<int>(std::floor(x)), table.rows() - 1);
  const int b = std::min(static_cast<int>(std::floor(y)), table.cols() - 1);
  const double u = x - a;
  const double w = y - b;
  return (1.0 - u) * (1.0 - w) * table.cum(a, b) + u * (1.0 - w) * table.cum(a + 1, b) +
         (1.0 - u) * w * table.cum(a, b + 1) + u * w * table.cum(a + 1, b + 1);
}

/// S(V_n, f): the sum of the whole table.
inline double total_sum(const SummedAreaTable& table) {
  return table.cum(table.rows(), table.cols());
}

}  // namespace rfclt
