#include <catch_amalgamated.hpp>

#include <cmath>

#include "rfclt/coefficients.hpp"

using namespace rfclt;
using Catch::Approx;

namespace {

// Direct double sum over a large box plus an integral tail bound check.
double brute_tail(const CoefficientFamily& f, int k, int l, int extent) {
  double s = 0.0;
  for (int i = extent - 1; i >= k; --i) {
    for (int j = extent - 1; j >= l; --j) {
      const double a = coefficient(f, i, j);
      s += a * a;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("coefficient families") {
  CHECK(coefficient(CoefficientFamily::delta(), 0, 0) == 1.0);
  CHECK(coefficient(CoefficientFamily::delta(), 0, 1) == 0.0);
  CHECK(coefficient(CoefficientFamily::additive_decay(2.0), 1, 2) == Approx(1.0 / 16.0));
  CHECK(coefficient(CoefficientFamily::product_decay(2.0), 1, 2) == Approx(1.0 / 36.0));
  CHECK(coefficient(CoefficientFamily::product_decay(2.0), -1, 0) == 0.0);
  const auto t = CoefficientFamily::explicit_table({{1.0, 0.5}, {0.25, 0.0}});
  CHECK(coefficient(t, 0, 1) == 0.5);
  CHECK(coefficient(t, 2, 0) == 0.0);
}

TEST_CASE("hurwitz zeta against closed forms and direct sums") {
  const double pi = 3.14159265358979323846;
  CHECK(hurwitz_zeta(2.0, 1.0) == Approx(pi * pi / 6.0).epsilon(1e-12));
  CHECK(hurwitz_zeta(4.0, 1.0) == Approx(std::pow(pi, 4) / 90.0).epsilon(1e-12));
  CHECK(hurwitz_zeta(6.0, 1.0) == Approx(std::pow(pi, 6) / 945.0).epsilon(1e-12));
  // zeta(2, 3) = zeta(2) - 1 - 1/4.
  CHECK(hurwitz_zeta(2.0, 3.0) == Approx(pi * pi / 6.0 - 1.25).epsilon(1e-12));
  for (double s : {2.4, 3.0, 5.0}) {
    double direct = 0.0;
    for (int n = 2000000; n >= 0; --n) direct += std::pow(n + 7.0, -s);
    // Remaining tail below 1e-10 for these s.
    CHECK(hurwitz_zeta(s, 7.0) == Approx(direct).epsilon(1e-7));
  }
  CHECK_THROWS_AS(hurwitz_zeta(1.0, 1.0), DivergenceError);
  CHECK_THROWS_AS(hurwitz_zeta(2.0, 0.5), DomainError);
}

TEST_CASE("tail sums match direct summation") {
  for (const auto& fam : {CoefficientFamily::product_decay(3.0), CoefficientFamily::additive_decay(3.0),
                          CoefficientFamily::product_decay(2.0), CoefficientFamily::additive_decay(2.5)}) {
    INFO(fam.name() << " q=" << fam.q);
    for (auto [k, l] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 3}, std::pair{2, 5}, std::pair{6, 6}}) {
      const double brute = brute_tail(fam, k, l, 3000);
      CHECK(tail_sum_A(fam, k, l) == Approx(brute).epsilon(2e-4));
    }
  }
  CHECK(tail_sum_A(CoefficientFamily::delta(), 0, 0) == 1.0);
  CHECK(tail_sum_A(CoefficientFamily::delta(), 1, 0) == 0.0);
  const auto t = CoefficientFamily::explicit_table({{1.0, 0.5}, {0.25, 0.0}});
  CHECK(tail_sum_A(t, 0, 0) == Approx(1.3125));
  CHECK(tail_sum_A(t, 1, 0) == Approx(0.0625));
  // Negative indices clamp to 0.
  CHECK(tail_sum_A(CoefficientFamily::product_decay(3.0), -4, -1) ==
        tail_sum_A(CoefficientFamily::product_decay(3.0), 0, 0));
}

TEST_CASE("tail sums are monotone") {
  const auto fam = CoefficientFamily::additive_decay(2.5);
  for (int k = 0; k < 30; ++k) {
    for (int l = 0; l < 30; ++l) {
      CHECK(tail_sum_A(fam, k + 1, l) <= tail_sum_A(fam, k, l));
      CHECK(tail_sum_A(fam, k, l + 1) <= tail_sum_A(fam, k, l));
    }
  }
}

TEST_CASE("square-summability requires q > 1") {
  CHECK_THROWS_AS(validate(CoefficientFamily::additive_decay(1.0)), DivergenceError);
  CHECK_THROWS_AS(validate(CoefficientFamily::product_decay(0.5)), DivergenceError);
  CHECK_THROWS_AS(tail_sum_A(CoefficientFamily::additive_decay(0.9), 0, 0), DivergenceError);
  CHECK_THROWS_AS(validate(CoefficientFamily::explicit_table({{1.0, 2.0}, {3.0}})), ParameterError);
  CHECK_NOTHROW(validate(CoefficientFamily::additive_decay(1.01)));
}

TEST_CASE("truncation radius meets the tail-variance budget minimally") {
  for (const auto& fam : {CoefficientFamily::product_decay(3.0), CoefficientFamily::additive_decay(3.0),
                          CoefficientFamily::product_decay(2.0), CoefficientFamily::product_decay(1.2)}) {
    INFO(fam.name() << " q=" << fam.q);
    const int b = truncation_radius(fam);
    const double total = tail_sum_A(fam, 0, 0);
    CHECK(outside_box_square_sum(fam, b) < 1e-4 * total);
    if (b > 0) CHECK(outside_box_square_sum(fam, b - 1) >= 1e-4 * total);
  }
  CHECK(truncation_radius(CoefficientFamily::product_decay(3.0)) < 10);
  CHECK(truncation_radius(CoefficientFamily::product_decay(1.2)) > 100);
  CHECK(truncation_radius(CoefficientFamily::delta()) == 0);
  CHECK(truncation_radius(CoefficientFamily::explicit_table({{1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}})) == 1);
  CHECK_THROWS_AS(truncation_radius(CoefficientFamily::product_decay(1.01), 1e-4, 64), CapacityError);
}

TEST_CASE("box sums and kernel tables") {
  const auto fam = CoefficientFamily::product_decay(2.0);
  const auto k = kernel_table(fam, 3);
  REQUIRE(k.size() == 16);
  CHECK(k[0] == 1.0);
  CHECK(k[1 * 4 + 2] == Approx(coefficient(fam, 1, 2)));
  const auto s = box_sums(fam, 3);
  double lin = 0.0;
  for (int i = 1; i <= 4; ++i) lin += 1.0 / (i * i);
  CHECK(s.linear == Approx(lin * lin));
  CHECK(s.square + outside_box_square_sum(fam, 3) == Approx(tail_sum_A(fam, 0, 0)).epsilon(1e-10));
}
