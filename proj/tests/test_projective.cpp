#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rfclt/coefficients.hpp"
#include "rfclt/models.hpp"
#include "rfclt/projective.hpp"

using namespace rfclt;
using Catch::Approx;

namespace {

// ||E(Z_{k,l} | F_{1,1})||_2 for a truncated linear field with unit innovations.
double linear_conditional_norm(const CoefficientFamily& fam, int radius, int k, int l) {
  double s = 0.0;
  for (int r = 0; r <= radius; ++r) {
    for (int c = 0; c <= radius; ++c) {
      // eps_{k-r, l-c} is F_{1,1}-measurable iff k - r <= 1 and l - c <= 1.
      if (k - r <= 1 && l - c <= 1) s += std::pow(coefficient(fam, r, c), 2);
    }
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("tail-sum exponents approach their asymptotic rates") {
  for (double q : {1.5, 2.0, 3.0}) {
    INFO("q = " << q);
    const auto prod = CoefficientFamily::product_decay(q);
    const auto add = CoefficientFamily::additive_decay(q);
    CHECK(tail_sum_exponent(prod, TailDirection::diagonal, 64, 256) == Approx(2.0 - 4.0 * q).margin(0.1));
    CHECK(tail_sum_exponent(prod, TailDirection::axis, 64, 256) == Approx(1.0 - 2.0 * q).margin(0.1));
    CHECK(tail_sum_exponent(add, TailDirection::diagonal, 64, 256) == Approx(2.0 - 2.0 * q).margin(0.1));
    CHECK(tail_sum_exponent(add, TailDirection::axis, 64, 256) == Approx(2.0 - 2.0 * q).margin(0.1));
  }
}

TEST_CASE("log-slope fit recovers exact power laws") {
  std::vector<double> x;
  std::vector<double> y;
  for (int k = 1; k <= 10; ++k) {
    x.push_back(k);
    y.push_back(3.0 * std::pow(k, -1.7));
  }
  CHECK(fit_log_slope(x, y) == Approx(-1.7));
  CHECK_THROWS_AS(fit_log_slope({1.0}, {1.0}), ParameterError);
}

TEST_CASE("tail-sum table indexes A_{k,l}") {
  const auto fam = CoefficientFamily::additive_decay(2.5);
  const auto t = build_tail_sum_table(fam, 4, 3);
  CHECK(t.entries.size() == 12);
  CHECK(t(3, 2) == Approx(tail_sum_A(fam, 3, 2)));
  CHECK(t(4, 3) == Approx(tail_sum_A(fam, 4, 3)));
  CHECK_THROWS_AS(build_tail_sum_table(fam, 0, 3), ParameterError);
}

TEST_CASE("condition series partial sums match a direct double sum") {
  for (const auto& fam : {CoefficientFamily::product_decay(2.0), CoefficientFamily::additive_decay(2.5),
                          CoefficientFamily::explicit_table({{1.0, 0.3}, {0.2, 0.1}})}) {
    for (int h : {1, 2}) {
      for (double alpha : {1.0, 0.5}) {
        INFO(fam.name() << " h=" << h << " alpha=" << alpha);
        const auto p = condition_series_partial(fam, alpha, h, 12);
        for (int kk : {1, 5, 12}) {
          double direct = 0.0;
          for (int k = 1; k <= kk; ++k) {
            for (int l = 1; l <= kk; ++l) {
              direct += std::pow(tail_sum_A(fam, k + 1 - h, l + 1 - h), alpha / 2.0) / std::sqrt(double(k) * l);
            }
          }
          CHECK(p[kk - 1] == Approx(direct).epsilon(1e-9));
        }
      }
    }
  }
  CHECK_THROWS_AS(condition_series_partial(CoefficientFamily::product_decay(2.0), 1.5, 1, 4), ParameterError);
  CHECK_THROWS_AS(condition_series_partial(CoefficientFamily::product_decay(2.0), 1.0, 0, 4), ParameterError);
}

TEST_CASE("cauchy gaps separate fast and slow decay") {
  const auto fast = condition_series_partial(CoefficientFamily::product_decay(3.0), 1.0, 1, 128);
  const auto slow = condition_series_partial(CoefficientFamily::product_decay(1.2), 1.0, 1, 128);
  CHECK(cauchy_gap(fast, 64) < 1e-3);
  CHECK(cauchy_gap(slow, 64) > 10.0 * cauchy_gap(fast, 64));
  // Increments of a convergent series shrink as K doubles.
  CHECK(cauchy_gap(fast, 64) < cauchy_gap(fast, 16));
  CHECK_THROWS_AS(cauchy_gap(fast, 65), BoundsError);
}

TEST_CASE("family classification") {
  const auto a3 = classify_family(CoefficientFamily::additive_decay(3.0));
  CHECK(a3.parametric);
  CHECK(a3.projective_condition);
  CHECK_FALSE(a3.root_summable);
  const auto p12 = classify_family(CoefficientFamily::product_decay(1.2));
  CHECK_FALSE(p12.projective_condition);
  CHECK_FALSE(p12.root_summable);
  const auto p25 = classify_family(CoefficientFamily::product_decay(2.5));
  CHECK(p25.projective_condition);
  CHECK(p25.root_summable);
  CHECK_FALSE(classify_family(CoefficientFamily::delta()).parametric);
}

TEST_CASE("iid conditional norms are exact") {
  const auto model = FieldModel::iid(InnovationSpec::uniform(1.0));
  const RngStream s{3, 0};
  const auto t11 = estimate_conditional_norm(model, 1, 1, 4.0, {}, s);
  CHECK(t11.exact);
  CHECK(t11.estimate == Approx(std::pow(1.0 / 5.0, 0.25)));
  CHECK(estimate_conditional_norm(model, 2, 1, 2.0, {}, s).estimate == 0.0);
}

TEST_CASE("linear conditional norms: closed form against Monte Carlo") {
  const auto fam = CoefficientFamily::product_decay(2.0);
  const auto model = FieldModel::linear_identity(InnovationSpec::gaussian(), fam, 3);
  const RngStream s{4, 0};
  const MonteCarloParams mc{2048, 32, 1};
  for (auto [k, l] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 3}, std::pair{4, 4}, std::pair{5, 1}}) {
    INFO("k=" << k << " l=" << l);
    const double truth = linear_conditional_norm(fam, 3, k, l);
    const auto exact = estimate_conditional_norm(model, k, l, 2.0, mc, s);
    CHECK(exact.exact);
    CHECK(exact.estimate == Approx(truth).margin(1e-12));
    const auto sim = estimate_conditional_norm(model, k, l, 2.0, mc, s, ConditionalNormMethod::monte_carlo);
    if (truth == 0.0) {
      CHECK(sim.exact);
      CHECK(sim.estimate == 0.0);
    } else {
      CHECK_FALSE(sim.exact);
      CHECK(std::abs(sim.power_estimate - truth * truth) <= 4.0 * sim.power_se);
    }
  }
  // Gaussian scaling for p != 2.
  const auto p4 = estimate_conditional_norm(model, 2, 2, 4.0, mc, s);
  CHECK(p4.estimate == Approx(linear_conditional_norm(fam, 3, 2, 2) * std::pow(3.0, 0.25)));
}

TEST_CASE("identity functional reproduces the linear norms through Monte Carlo") {
  const auto fam = CoefficientFamily::additive_decay(2.0);
  const auto model = FieldModel::linear_functional(InnovationSpec::rademacher(), fam, FunctionalKind::identity, 1,
                                                   RngStream{5, 0}, 2);
  const MonteCarloParams mc{4096, 16, 1};
  const auto est = estimate_conditional_norm(model, 2, 2, 2.0, mc, RngStream{5, 1});
  const double truth = linear_conditional_norm(fam, 2, 2, 2);
  CHECK(std::abs(est.power_estimate - truth * truth) <= 4.0 * est.power_se);
}

TEST_CASE("orthomartingale projections vanish off the origin") {
  const auto model = FieldModel::orthomartingale(InnovationSpec::gaussian(), GKind::lag_product, 1);
  const MonteCarloParams mc{2048, 16, 1};
  for (auto [k, l] : {std::pair{2, 1}, std::pair{1, 2}, std::pair{2, 2}}) {
    INFO("k=" << k << " l=" << l);
    const auto t = estimate_conditional_norm(model, k, l, 2.0, mc, RngStream{6, 0});
    CHECK(std::abs(t.power_estimate) <= 4.0 * t.power_se);
  }
  // The site itself: E(eps_{1,1} eps_{0,0} | F_{1,1}) is the product, with norm 1.
  const auto t11 = estimate_conditional_norm(model, 1, 1, 2.0, mc, RngStream{6, 1});
  CHECK(t11.power_estimate == Approx(1.0).margin(4.0 * t11.power_se));
  CHECK(estimate_conditional_norm(model, 3, 3, 2.0, mc, RngStream{6, 2}).estimate == 0.0);
}

TEST_CASE("projective partial sums accumulate the weighted terms") {
  const auto fam = CoefficientFamily::product_decay(2.0);
  const auto model = FieldModel::linear_identity(InnovationSpec::gaussian(), fam, 4);
  const auto rep = delta_tilde_partial(model, 5, 4, 2.0, {}, RngStream{7, 0});
  CHECK(rep.classification.parametric);
  for (int kk = 1; kk <= 5; ++kk) {
    for (int ll = 1; ll <= 4; ++ll) {
      double direct = 0.0;
      for (int k = 1; k <= kk; ++k) {
        for (int l = 1; l <= ll; ++l) direct += linear_conditional_norm(fam, 4, k, l) / std::sqrt(double(k) * l);
      }
      CHECK(rep.partial_sum(kk, ll) == Approx(direct).epsilon(1e-12));
      CHECK(rep.partial_sum_se(kk, ll) == 0.0);
    }
  }
  CHECK(rep.total() == rep.partial_sum(5, 4));
}

TEST_CASE("projective preconditions") {
  const auto model = FieldModel::iid(InnovationSpec::gaussian());
  CHECK_THROWS_AS(estimate_conditional_norm(model, 0, 1, 2.0, {}, RngStream{}), ParameterError);
  CHECK_THROWS_AS(estimate_conditional_norm(model, 1, 1, 1.5, {}, RngStream{}), ParameterError);
  CHECK_THROWS_AS(delta_tilde_partial(model, 0, 1, 2.0, {}, RngStream{}), ParameterError);
  const auto ce = FieldModel::counterexample_model(CounterexampleKind::product, 1.0, 1.0);
  CHECK_THROWS_AS(estimate_conditional_norm(ce, 1, 1, 2.0, {}, RngStream{}), UnsupportedModelError);
}

TEST_CASE("delta coefficients give a vanishing condition series") {
  // Delta field is iid: every tail sum beyond the origin is zero.
  const auto p = condition_series_partial(CoefficientFamily::delta(), 1.0, 1, 16);
  for (double v : p) CHECK(v == 0.0);
}
