#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfclt/coefficients.hpp"
#include "rfclt/config.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/finite_oracle.hpp"
#include "rfclt/functional.hpp"
#include "rfclt/innovations.hpp"
#include "rfclt/lattice.hpp"
#include "rfclt/limit_tests.hpp"
#include "rfclt/models.hpp"
#include "rfclt/projective.hpp"
#include "rfclt/rng.hpp"
#include "rfclt/statistics.hpp"

namespace rfclt {

inline constexpr const char* report_schema = "rfclt.run/1";

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

/// Minimal CSV writer; cells are numbers or plain tokens without commas.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_line(header); }

  template <typename... Cells>
  void row(const Cells&... cells) {
    static_assert(sizeof...(Cells) > 0);
    std::vector<std::string> line;
    (line.push_back(cell(cells)), ...);
    if (line.size() != columns_) throw DimensionError("csv row width does not match header");
    add_line(line);
  }

  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  void add_line(const std::vector<std::string>& line) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (k > 0) text_ += ',';
      text_ += line[k];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

struct RunReport {
  nlohmann::ordered_json summary;
  std::string series_csv;
  std::optional<std::string> raw_csv;
};

inline std::string rect_label(const Rect& r) { return std::to_string(r.m1) + "x" + std::to_string(r.m2); }

inline InnovationSpec innovation_from_config(const ExperimentConfig& c) {
  if (c.innovation == "rademacher") return InnovationSpec::rademacher();
  if (c.innovation == "uniform") return InnovationSpec::uniform();
  return InnovationSpec::gaussian();
}

inline CoefficientFamily coefficients_from_config(const ExperimentConfig& c) {
  if (c.coefficients == "additive-decay") return CoefficientFamily::additive_decay(c.q);
  if (c.coefficients == "product-decay") return CoefficientFamily::product_decay(c.q);
  return CoefficientFamily::delta();
}

inline FunctionalKind functional_from_config(const ExperimentConfig& c) {
  if (c.functional == "abs") return FunctionalKind::abs;
  if (c.functional == "square") return FunctionalKind::square;
  if (c.functional == "relu") return FunctionalKind::relu;
  if (c.functional == "window-mean") return FunctionalKind::window_mean;
  if (c.functional == "window-ramp") return FunctionalKind::window_ramp;
  return FunctionalKind::identity;
}

inline GKind g_from_config(const ExperimentConfig& c) {
  if (c.g == "constant") return GKind::constant;
  if (c.g == "window-sum") return GKind::window_sum;
  if (c.g == "abs-mean") return GKind::abs_mean;
  return GKind::lag_product;
}

inline FieldModel model_from_config(const ExperimentConfig& c, const RngStream& root) {
  const InnovationSpec innov = innovation_from_config(c);
  if (c.variant == "linear-identity") return FieldModel::linear_identity(innov, coefficients_from_config(c), c.radius);
  if (c.variant == "linear-functional") {
    return FieldModel::linear_functional(innov, coefficients_from_config(c), functional_from_config(c), c.h,
                                         root.derive("centering"), c.radius, c.centering_draws);
  }
  if (c.variant == "orthomartingale") return FieldModel::orthomartingale(innov, g_from_config(c), c.m_g);
  return FieldModel::iid(innov);
}

inline nlohmann::ordered_json model_summary(const FieldModel& model) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(model.variant);
  j["innovation"] = model.innovations.name();
  if (model.variant == ModelVariant::linear_identity || model.variant == ModelVariant::linear_functional) {
    j["coefficients"] = model.coefficients.name();
    j["q"] = model.coefficients.q;
    j["truncation_radius"] = model.truncation_radius;
    const BoxSums sums = box_sums(model.coefficients, model.truncation_radius);
    j["box_linear_sum"] = sums.linear;
    j["box_square_sum"] = sums.square;
  }
  if (model.functional) {
    j["functional"] = model.functional->name();
    j["h"] = model.functional->h;
    j["centering"] = model.functional->centering;
    j["centering_se"] = model.functional->centering_se;
    j["analytic_centering"] = model.functional->analytic_centering;
  }
  if (model.variant == ModelVariant::orthomartingale) {
    j["g"] = to_string(model.multiplier.kind);
    j["m_g"] = model.multiplier.m_g;
  }
  return j;
}

inline nlohmann::ordered_json test_json(const TestResult& t) {
  return {{"tag", t.tag},       {"statistic", t.statistic}, {"p_value", t.p_value},
          {"sample_size", t.sample_size}, {"alpha", t.alpha},   {"rejected", t.rejected}};
}

inline nlohmann::ordered_json moments_json(const Moments& m) {
  return {{"n", m.n},
          {"mean", m.mean},
          {"mean_se", m.mean_se},
          {"variance", m.variance},
          {"variance_se", m.variance_se},
          {"skewness", m.skewness},
          {"skewness_se", m.skewness_se},
          {"excess_kurtosis", m.excess_kurtosis()},
          {"kurtosis", m.kurtosis},
          {"kurtosis_se", m.kurtosis_se}};
}

namespace detail {

inline std::vector<Rect> schedule_of(const ExperimentConfig& c) {
  return c.schedule.empty() ? std::vector<Rect>{c.rect} : c.schedule;
}

/// sigma^2 of the limit when it has a closed form.
inline std::optional<double> closed_form_sigma2(const FieldModel& model) {
  switch (model.variant) {
    case ModelVariant::iid:
      return model.innovations.variance();
    case ModelVariant::linear_functional:
      if (model.functional->kind != FunctionalKind::identity) return std::nullopt;
      [[fallthrough]];
    case ModelVariant::linear_identity: {
      const double s = box_sums(model.coefficients, model.truncation_radius).linear;
      return model.innovations.variance() * s * s;
    }
    default:
      return std::nullopt;
  }
}

inline void run_simulate(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const FieldModel model = model_from_config(c, root);
  const FieldSample sample = generate_field(model, c.rect, root.derive("simulate"));
  const SummedAreaTable table = build_summed_area(sample.values);
  CsvTable csv({"i", "j", "value"});
  for (int i = 1; i <= c.rect.m1; ++i) {
    for (int j = 1; j <= c.rect.m2; ++j) csv.row(i, j, sample.values.at(i, j));
  }
  out.summary["model"] = model_summary(model);
  out.summary["results"] = {{"rect", rect_label(c.rect)},
                            {"margin", sample.margin},
                            {"partial_sum", total_sum(table)},
                            {"normalized_sum", total_sum(table) / std::sqrt(static_cast<double>(c.rect.cells()))}};
  out.summary["streams"] = {"simulate"};
  out.series_csv = csv.text();
}

inline void run_sigma2(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const FieldModel model = model_from_config(c, root);
  const auto report = estimate_sigma2_scaling(model, schedule_of(c), c.reps, root.derive("sigma2"), c.workers);
  CsvTable csv({"scale", "rep_count", "sigma2_hat", "se", "replicate_variance", "replicate_variance_se"});
  for (const auto& p : report.sequence) {
    csv.row(rect_label(p.rect), p.reps, p.estimate, p.se, p.replicate_variance, p.replicate_variance_se);
  }
  nlohmann::ordered_json res;
  res["method"] = report.method;
  res["estimate"] = report.estimate;
  res["se"] = report.se;
  if (auto closed = closed_form_sigma2(model)) res["closed_form"] = *closed;
  nlohmann::ordered_json streams = {"sigma2"};
  if (c.series) {
    SeriesParams params;
    params.grid_side = c.grid_side;
    params.blocks = c.blocks;
    params.inner = c.inner;
    params.workers = c.workers;
    const auto series = estimate_sigma2_series(model, c.m, c.lag_cutoff, params, root.derive("series"));
    res["series"] = {{"m", c.m},
                     {"lag_cutoff", c.lag_cutoff},
                     {"grid_side", series.sequence.front().rect.m1},
                     {"estimate", series.estimate},
                     {"se", series.se},
                     {"warning", series.warning}};
    const double z = std::abs(series.estimate - report.estimate) /
                     std::sqrt(series.se * series.se + report.se * report.se);
    res["series"]["scaling_z"] = z;
    streams.push_back("series");
  }
  out.summary["model"] = model_summary(model);
  out.summary["results"] = res;
  out.summary["streams"] = streams;
  out.series_csv = csv.text();
}

inline void run_clt(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const FieldModel model = model_from_config(c, root);
  const auto schedule = schedule_of(c);
  // Normalization comes from independent replicates at the largest scale.
  const auto sigma = estimate_sigma2_scaling(model, {schedule.back()}, c.reps, root.derive("sigma2"), c.workers);
  CsvTable csv({"scale", "rep_count", "sigma2_hat", "ks_stat", "ks_p"});
  out.summary["model"] = model_summary(model);
  out.summary["streams"] = {"sigma2", "clt"};
  if (!(sigma.estimate > 3.0 * sigma.se)) {
    // Near-degenerate limit: flagged, not tested.
    out.summary["results"] = {{"sigma2_hat", sigma.estimate}, {"sigma2_se", sigma.se}, {"degenerate", true}};
    out.series_csv = csv.text();
    return;
  }
  CsvTable raw({"scale", "rep", "value"});
  nlohmann::ordered_json scales = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const auto sums = normalized_sums(model, schedule[s], c.reps, root.derive("clt", s), c.workers);
    const auto test = ks_normality_test(sums, c.alpha, sigma.estimate);
    csv.row(rect_label(schedule[s]), c.reps, sigma.estimate, test.ks.statistic, test.ks.p_value);
    scales.push_back({{"scale", rect_label(schedule[s])}, {"ks", test_json(test.ks)}, {"moments", moments_json(test.moments)}});
    for (std::size_t r = 0; r < sums.size(); ++r) raw.row(rect_label(schedule[s]), r, sums[r]);
  }
  nlohmann::ordered_json res;
  res["sigma2_hat"] = sigma.estimate;
  res["sigma2_se"] = sigma.se;
  if (auto closed = closed_form_sigma2(model)) res["closed_form"] = *closed;
  res["degenerate"] = false;
  res["scales"] = scales;
  out.summary["results"] = res;
  out.series_csv = csv.text();
  if (c.raw) out.raw_csv = raw.text();
}

inline void run_fdd(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const FieldModel model = model_from_config(c, root);
  const auto sigma = estimate_sigma2_scaling(model, {c.rect}, c.reps, root.derive("sigma2"), c.workers);
  std::vector<SheetPoint> grid;
  for (double a : c.fdd_axis) {
    for (double b : c.fdd_axis) grid.push_back({a, b});
  }
  const auto report = fdd_covariance_check(model, grid, c.rect, c.reps, sigma.estimate, root.derive("fdd"),
                                           c.workers, c.alpha);
  CsvTable csv({"s1", "s2", "t1", "t2", "empirical", "se", "target"});
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = 0; b < grid.size(); ++b) {
      const auto idx = a * grid.size() + b;
      csv.row(grid[a].t1, grid[a].t2, grid[b].t1, grid[b].t2, report.empirical[idx], report.se[idx],
              report.target[idx]);
    }
  }
  out.summary["model"] = model_summary(model);
  out.summary["results"] = {{"sigma2_hat", sigma.estimate},
                            {"sigma2_se", sigma.se},
                            {"rect", rect_label(c.rect)},
                            {"covariance", test_json(report.result)}};
  out.summary["streams"] = {"sigma2", "fdd"};
  out.series_csv = csv.text();
}

inline void run_projective(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const FieldModel model = model_from_config(c, root);
  MonteCarloParams mc;
  mc.outer = c.outer;
  mc.inner = c.inner;
  mc.workers = c.workers;
  const auto report = delta_tilde_partial(model, c.max_k, c.max_l, c.p, mc, root.derive("projective"));
  CsvTable csv({"k", "l", "estimate", "se", "exact", "partial", "partial_se"});
  for (int k = 1; k <= c.max_k; ++k) {
    for (int l = 1; l <= c.max_l; ++l) {
      const auto& t = report.term(k, l);
      csv.row(k, l, t.estimate, t.se, t.exact ? "true" : "false", report.partial_sum(k, l),
              report.partial_sum_se(k, l));
    }
  }
  nlohmann::ordered_json res;
  res["p"] = c.p;
  res["total"] = report.total();
  res["total_se"] = report.total_se();
  if (report.classification.parametric) {
    res["classification"] = {{"projective_threshold", report.classification.projective_threshold},
                             {"projective_condition", report.classification.projective_condition},
                             {"root_summable_threshold", report.classification.root_summable_threshold},
                             {"root_summable", report.classification.root_summable}};
    const auto dir = model.coefficients.kind == CoefficientKind::additive_decay ? TailDirection::diagonal
                                                                                : TailDirection::axis;
    res["tail_exponent"] = tail_sum_exponent(model.coefficients, dir, 8, 128);
  }
  std::string caveat;
  for (const auto& t : report.terms) {
    if (!t.caveat.empty()) caveat = t.caveat;
  }
  if (!caveat.empty()) res["caveat"] = caveat;
  out.summary["model"] = model_summary(model);
  out.summary["results"] = res;
  out.summary["streams"] = {"projective"};
  out.series_csv = csv.text();
}

inline void run_counterexample(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const auto kind = c.counterexample_kind == "sum" ? CounterexampleKind::sum : CounterexampleKind::product;
  const auto sample =
      simulate_counterexample(kind, c.counterexample_n, c.reps, root.derive("counterexample"), c.sigma_y, c.sigma_z);
  const auto normality = ks_normality_test(sample, c.alpha);
  nlohmann::ordered_json res;
  res["kind"] = c.counterexample_kind;
  res["n"] = c.counterexample_n;
  res["normality"] = test_json(normality.ks);
  res["moments"] = moments_json(normality.moments);
  double ks2_stat = 0.0;
  double ks2_p = 1.0;
  nlohmann::ordered_json streams = {"counterexample"};
  if (kind == CounterexampleKind::product) {
    const auto reference = product_normal_reference(c.reps, root.derive("reference"), c.sigma_y, c.sigma_z);
    const auto ks2 = ks_two_sample_test(sample, reference, c.alpha);
    res["versus_product_normal"] = test_json(ks2);
    ks2_stat = ks2.statistic;
    ks2_p = ks2.p_value;
    streams.push_back("reference");
  }
  CsvTable csv({"kind", "n", "rep_count", "ks_stat", "ks_p", "ks2_stat", "ks2_p", "excess_kurtosis",
                "excess_kurtosis_se"});
  csv.row(c.counterexample_kind, c.counterexample_n, c.reps, normality.ks.statistic, normality.ks.p_value, ks2_stat,
          ks2_p, normality.moments.excess_kurtosis(), normality.moments.kurtosis_se);
  CsvTable raw({"rep", "value"});
  for (std::size_t r = 0; r < sample.size(); ++r) raw.row(r, sample[r]);
  out.summary["results"] = res;
  out.summary["streams"] = streams;
  out.series_csv = csv.text();
  if (c.raw) out.raw_csv = raw.text();
}

inline WindowFunction oracle_function(const ExperimentConfig& c) {
  return c.oracle_function == "lag-product" ? WindowFunction::product({{0, 0}, {-1, -1}}) : WindowFunction::single();
}

inline void run_oracle(const ExperimentConfig& c, const RngStream& root, RunReport& out) {
  const WindowFunction f = oracle_function(c);
  const int lag = c.oracle_function == "lag-product" ? 1 : 0;
  const FiniteSpace space(c.oracle_rows, c.oracle_cols, {1 - lag, 1 - lag});
  nlohmann::ordered_json res;
  res["check"] = c.oracle_check;
  res["space"] = rect_label({c.oracle_rows, c.oracle_cols});
  const RngStream stream = root.derive("oracle");
  if (c.oracle_check == "commuting" || c.oracle_check == "marginal") {
    CsvTable csv({"instance", "deviation"});
    double worst = 0.0;
    for (int t = 0; t < c.oracle_instances; ++t) {
      const RngStream inst = stream.derive("instance", static_cast<std::uint64_t>(t));
      ExactRandomVariable x;
      x.values.resize(space.outcomes());
      for (std::size_t w = 0; w < x.values.size(); ++w) x.values[w] = 2.0 * inst.uniform(w) - 1.0;
      double dev = 0.0;
      if (c.oracle_check == "commuting") {
        // Each cell joins F, G, H or none with equal probability.
        std::array<std::uint32_t, 4> sets{};
        const RngStream assign = inst.derive("assign");
        for (int b = 0; b < space.cells(); ++b) {
          sets[assign.block(static_cast<std::uint64_t>(b))[0] % 4u] |= std::uint32_t{1} << b;
        }
        dev = verify_commuting(x, sets[0], sets[1], sets[2], space);
      } else {
        const auto pick = inst.derive("corner").block(0);
        const int i = space.first_row() + static_cast<int>(pick[0] % static_cast<std::uint32_t>(space.rows()));
        const int j = space.first_col() + static_cast<int>(pick[1] % static_cast<std::uint32_t>(space.cols()));
        dev = verify_marginal_commuting(x, i, j, space);
      }
      worst = std::max(worst, dev);
      csv.row(t, dev);
    }
    res["instances"] = c.oracle_instances;
    res["max_deviation"] = worst;
    out.summary["streams"] = {"oracle"};
    out.series_csv = csv.text();
  } else if (c.oracle_check == "distribution") {
    const auto law = exact_distribution_S(f, c.rect, space);
    CsvTable csv({"value", "probability"});
    double mean = 0.0;
    double second = 0.0;
    for (const auto& [v, p] : law) {
      csv.row(v, p);
      mean += v * p;
      second += v * v * p;
    }
    res["rect"] = rect_label(c.rect);
    res["atoms"] = law.size();
    res["mean"] = mean;
    res["variance"] = second - mean * mean;
    out.series_csv = csv.text();
  } else {
    const auto r = moment_inequality_ratio(f, c.rect.m1, c.rect.m2, c.oracle_p, space);
    CsvTable csv({"k", "l", "d"});
    for (int k = 1; k <= r.m; ++k) {
      for (int l = 1; l <= r.n; ++l) csv.row(k, l, r.d[static_cast<std::size_t>(k - 1) * r.n + (l - 1)]);
    }
    res["m"] = r.m;
    res["n"] = r.n;
    res["p"] = r.p;
    res["lhs"] = r.lhs;
    res["rhs0"] = r.rhs0;
    res["ratio"] = r.ratio;
    res["adapted_rhs0"] = r.adapted_rhs0;
    res["adapted_ratio"] = r.adapted_ratio;
    res["hypothesis_note"] = r.hypothesis_note;
    if (!r.warning.empty()) res["warning"] = r.warning;
    out.series_csv = csv.text();
  }
  out.summary["results"] = res;
}

}  // namespace detail

/// Runs one experiment. Every number in the report is a function of the
/// config alone; only `wall_clock_seconds` varies between runs.
inline RunReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const RngStream root{config.seed, 0};
  RunReport out;
  out.summary["schema"] = report_schema;
  out.summary["kind"] = to_string(config.kind);
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.echo) echo[k] = v;
  out.summary["config"] = echo;
  out.summary["rng"] = {{"generator", "philox4x32-10"}, {"seed", config.seed}, {"root_stream", 0}};
  switch (config.kind) {
    case ExperimentKind::simulate:
      detail::run_simulate(config, root, out);
      break;
    case ExperimentKind::sigma2:
      detail::run_sigma2(config, root, out);
      break;
    case ExperimentKind::clt:
      detail::run_clt(config, root, out);
      break;
    case ExperimentKind::fdd:
      detail::run_fdd(config, root, out);
      break;
    case ExperimentKind::projective:
      detail::run_projective(config, root, out);
      break;
    case ExperimentKind::counterexample:
      detail::run_counterexample(config, root, out);
      break;
    case ExperimentKind::oracle:
      detail::run_oracle(config, root, out);
      break;
  }
  if (out.summary.contains("streams")) {
    out.summary["rng"]["streams"] = out.summary["streams"];
    out.summary.erase("streams");
  }
  out.summary["reps"] = config.reps;
  out.summary["workers"] = config.workers;
  out.summary["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Writes summary.json, series.csv and, when present, raw.csv into `dir`.
inline void write_report(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    f << text;
  };
  put("summary.json", report.summary.dump(2) + "\n");
  put("series.csv", report.series_csv);
  if (report.raw_csv) put("raw.csv", *report.raw_csv);
}

}  // namespace rfclt
