#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "rfclt/errors.hpp"
#include "rfclt/lattice.hpp"

namespace rfclt {

enum class ExperimentKind { simulate, sigma2, clt, fdd, projective, counterexample, oracle };

inline constexpr ExperimentKind all_experiment_kinds[] = {
    ExperimentKind::simulate,   ExperimentKind::sigma2,         ExperimentKind::clt,   ExperimentKind::fdd,
    ExperimentKind::projective, ExperimentKind::counterexample, ExperimentKind::oracle};

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate:
      return "simulate";
    case ExperimentKind::sigma2:
      return "sigma2";
    case ExperimentKind::clt:
      return "clt";
    case ExperimentKind::fdd:
      return "fdd";
    case ExperimentKind::projective:
      return "projective";
    case ExperimentKind::counterexample:
      return "counterexample";
    case ExperimentKind::oracle:
      return "oracle";
  }
  return "?";
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  std::uint64_t seed = 1;
  int workers = 1;

  std::string variant = "iid";  // iid | linear-identity | linear-functional | orthomartingale
  std::string innovation = "gaussian";  // gaussian | rademacher | uniform
  std::string coefficients = "delta";   // delta | additive-decay | product-decay
  double q = 3.0;
  int radius = -1;  // -1 selects the tail-variance rule
  std::string functional = "identity";
  int h = 1;
  std::string g = "lag-product";
  int m_g = 1;
  long long centering_draws = 1'000'000;

  Rect rect{8, 8};
  std::vector<Rect> schedule;  // empty means {rect}

  int reps = 100;
  int outer = 4096;
  int inner = 64;
  int m = 0;
  int lag_cutoff = 0;
  bool series = false;  // also run the series estimator in sigma2
  int grid_side = 0;
  int blocks = 8;

  double alpha = 0.05;

  std::vector<double> fdd_axis{0.25, 0.5, 0.75, 1.0};

  int max_k = 4;
  int max_l = 4;
  double p = 2.0;

  std::string counterexample_kind = "product";
  int counterexample_n = 64;
  double sigma_y = 1.0;
  double sigma_z = 1.0;

  std::string oracle_check = "commuting";  // commuting | marginal | distribution | moment
  int oracle_rows = 3;
  int oracle_cols = 3;
  std::string oracle_function = "single";  // single | lag-product
  int oracle_instances = 100;
  double oracle_p = 2.0;

  std::string output_dir = "out";
  bool raw = false;

  /// Accepted keys and values in file order.
  std::vector<std::pair<std::string, std::string>> echo;
};

/// Outcome of parsing: a config when `violations` is empty.
struct ConfigParse {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> violations;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::optional<T> parse_number(const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::optional<Rect> parse_rect(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) return std::nullopt;
  const auto a = parse_number<int>(trim(s.substr(0, x)));
  const auto b = parse_number<int>(trim(s.substr(x + 1)));
  if (!a || !b) return std::nullopt;
  return Rect{*a, *b};
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

using Setter = std::function<std::optional<std::string>(const std::string&, ExperimentConfig&)>;

template <typename T>
Setter integer(T ExperimentConfig::*field, long long lo, long long hi) {
  return [=](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
    const auto n = parse_number<long long>(v);
    if (!n) return "expected an integer, got '" + v + "'";
    if (*n < lo || *n > hi) {
      return "value " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
    }
    c.*field = static_cast<T>(*n);
    return std::nullopt;
  };
}

inline Setter real(double ExperimentConfig::*field, double lo, double hi, bool open_lo = false) {
  return [=](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
    const auto x = parse_number<double>(v);
    if (!x) return "expected a number, got '" + v + "'";
    if ((open_lo ? *x <= lo : *x < lo) || *x > hi) {
      return "value " + v + " outside " + (open_lo ? "(" : "[") + std::to_string(lo) + ", " +
             std::to_string(hi) + "]";
    }
    c.*field = *x;
    return std::nullopt;
  };
}

inline Setter choice(std::string ExperimentConfig::*field, std::vector<std::string> allowed) {
  return [=](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
    for (const auto& a : allowed) {
      if (a == v) {
        c.*field = v;
        return std::nullopt;
      }
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
    return "expected one of " + list + ", got '" + v + "'";
  };
}

inline Setter boolean(bool ExperimentConfig::*field) {
  return [=](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
    if (v == "true") {
      c.*field = true;
    } else if (v == "false") {
      c.*field = false;
    } else {
      return "expected true or false, got '" + v + "'";
    }
    return std::nullopt;
  };
}

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = [] {
    std::map<std::string, Setter> s;
    s["experiment.kind"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      for (auto k : all_experiment_kinds) {
        if (to_string(k) == v) {
          c.kind = k;
          return std::nullopt;
        }
      }
      return "unknown experiment kind '" + v + "'";
    };
    s["experiment.seed"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      const auto n = parse_number<std::uint64_t>(v);
      if (!n) return "expected an unsigned 64-bit integer, got '" + v + "'";
      c.seed = *n;
      return std::nullopt;
    };
    s["experiment.workers"] = integer(&ExperimentConfig::workers, 1, 1024);

    s["model.variant"] = choice(&ExperimentConfig::variant,
                                {"iid", "linear-identity", "linear-functional", "orthomartingale"});
    s["model.innovation"] = choice(&ExperimentConfig::innovation, {"gaussian", "rademacher", "uniform"});
    s["model.coefficients"] = choice(&ExperimentConfig::coefficients, {"delta", "additive-decay", "product-decay"});
    s["model.q"] = real(&ExperimentConfig::q, 0.0, 1e6);
    s["model.radius"] = integer(&ExperimentConfig::radius, -1, 4096);
    s["model.functional"] = choice(&ExperimentConfig::functional,
                                   {"identity", "abs", "square", "relu", "window-mean", "window-ramp"});
    s["model.h"] = integer(&ExperimentConfig::h, 1, 64);
    s["model.g"] = choice(&ExperimentConfig::g, {"constant", "lag-product", "window-sum", "abs-mean"});
    s["model.m_g"] = integer(&ExperimentConfig::m_g, 1, 64);
    s["model.centering_draws"] = integer(&ExperimentConfig::centering_draws, 2, 1'000'000'000);

    s["grid.rect"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      const auto r = parse_rect(v);
      if (!r || r->m1 < 1 || r->m2 < 1) return "expected a rectangle like 64x64, got '" + v + "'";
      c.rect = *r;
      return std::nullopt;
    };
    s["grid.schedule"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      std::vector<Rect> out;
      for (const auto& item : split_list(v)) {
        const auto r = parse_rect(item);
        if (!r || r->m1 < 1 || r->m2 < 1) return "expected a list of rectangles, got '" + item + "'";
        if (!out.empty() && (r->m1 <= out.back().m1 || r->m2 <= out.back().m2)) {
          return "schedule must be strictly increasing in both dimensions";
        }
        out.push_back(*r);
      }
      if (out.empty()) return "schedule is empty";
      c.schedule = std::move(out);
      return std::nullopt;
    };

    s["mc.reps"] = integer(&ExperimentConfig::reps, 1, 100'000'000);
    s["mc.outer"] = integer(&ExperimentConfig::outer, 2, 100'000'000);
    s["mc.inner"] = integer(&ExperimentConfig::inner, 1, 1'000'000);
    s["mc.m"] = integer(&ExperimentConfig::m, 0, 4096);
    s["mc.lag_cutoff"] = integer(&ExperimentConfig::lag_cutoff, 0, 4096);
    s["mc.series"] = boolean(&ExperimentConfig::series);
    s["mc.grid_side"] = integer(&ExperimentConfig::grid_side, 0, 100'000);
    s["mc.blocks"] = integer(&ExperimentConfig::blocks, 2, 1024);

    s["test.alpha"] = real(&ExperimentConfig::alpha, 0.0, 1.0, true);

    s["fdd.axis"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      std::vector<double> out;
      for (const auto& item : split_list(v)) {
        const auto x = parse_number<double>(item);
        if (!x || *x < 0.0 || *x > 1.0) return "expected values in [0, 1], got '" + item + "'";
        out.push_back(*x);
      }
      if (out.empty()) return "fdd axis is empty";
      c.fdd_axis = std::move(out);
      return std::nullopt;
    };

    s["projective.max_k"] = integer(&ExperimentConfig::max_k, 1, 4096);
    s["projective.max_l"] = integer(&ExperimentConfig::max_l, 1, 4096);
    s["projective.p"] = real(&ExperimentConfig::p, 2.0, 64.0);

    s["counterexample.kind"] = choice(&ExperimentConfig::counterexample_kind, {"product", "sum"});
    s["counterexample.n"] = integer(&ExperimentConfig::counterexample_n, 1, 100'000'000);
    s["counterexample.sigma_y"] = real(&ExperimentConfig::sigma_y, 0.0, 1e6, true);
    s["counterexample.sigma_z"] = real(&ExperimentConfig::sigma_z, 0.0, 1e6, true);

    s["oracle.check"] = choice(&ExperimentConfig::oracle_check, {"commuting", "marginal", "distribution", "moment"});
    s["oracle.rows"] = integer(&ExperimentConfig::oracle_rows, 1, 64);
    s["oracle.cols"] = integer(&ExperimentConfig::oracle_cols, 1, 64);
    s["oracle.function"] = choice(&ExperimentConfig::oracle_function, {"single", "lag-product"});
    s["oracle.instances"] = integer(&ExperimentConfig::oracle_instances, 1, 100'000);
    s["oracle.p"] = real(&ExperimentConfig::oracle_p, 2.0, 64.0);

    s["output.dir"] = [](const std::string& v, ExperimentConfig& c) -> std::optional<std::string> {
      if (v.empty()) return "output directory is empty";
      c.output_dir = v;
      return std::nullopt;
    };
    s["output.raw"] = boolean(&ExperimentConfig::raw);
    return s;
  }();
  return setters;
}

}  // namespace detail

/// Parses `section.key = value` lines; `#` starts a comment. Every violation
/// is collected, each prefixed by its line number. `kind` is the experiment
/// kind used when the text does not set experiment.kind.
inline ConfigParse parse_config_checked(std::string_view text,
                                        ExperimentKind kind = ExperimentKind::simulate) {
  ConfigParse out;
  ExperimentConfig cfg;
  cfg.kind = kind;
  std::map<std::string, int> seen;
  const auto& setters = detail::config_setters();
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) {
      out.violations.push_back(where + "expected 'section.key = value'");
      continue;
    }
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (const auto it = seen.find(key); it != seen.end()) {
      out.violations.push_back(where + "duplicate key '" + key + "' (first set on line " +
                               std::to_string(it->second) + ")");
      continue;
    }
    seen[key] = number;
    const auto setter = setters.find(key);
    if (setter == setters.end()) {
      out.violations.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (auto err = setter->second(value, cfg)) {
      out.violations.push_back(where + key + ": " + *err);
      continue;
    }
    cfg.echo.emplace_back(key, value);
  }

  auto at = [&](const std::string& key) {
    const auto it = seen.find(key);
    return it == seen.end() ? std::string("config: ") : "line " + std::to_string(it->second) + ": ";
  };
  const bool linear = cfg.variant == "linear-identity" || cfg.variant == "linear-functional";
  if (linear && cfg.coefficients != "delta" && !(cfg.q > 1.0)) {
    out.violations.push_back(at("model.q") + "model.q must exceed 1 for square-summable " + cfg.coefficients +
                             " coefficients");
  }
  if (cfg.variant == "linear-functional" && cfg.functional == "identity" && cfg.h != 1) {
    out.violations.push_back(at("model.h") + "the identity functional uses h = 1");
  }
  if (!cfg.schedule.empty() && seen.count("grid.rect") != 0) {
    out.violations.push_back(at("grid.schedule") + "grid.schedule and grid.rect are mutually exclusive");
  }
  if (cfg.kind == ExperimentKind::projective && cfg.variant == "iid" && seen.count("model.variant") == 0) {
    out.violations.push_back(at("experiment.kind") + "projective experiments need model.variant");
  }
  if (cfg.kind == ExperimentKind::clt && cfg.reps < 20) {
    out.violations.push_back(at("mc.reps") + "clt experiments need mc.reps >= 20");
  }
  if ((cfg.kind == ExperimentKind::sigma2 || cfg.kind == ExperimentKind::fdd) && cfg.reps < 2) {
    out.violations.push_back(at("mc.reps") + "variance estimates need mc.reps >= 2");
  }
  if (out.violations.empty()) out.config = std::move(cfg);
  return out;
}

/// Strict parse; throws ValidationError listing every violation.
inline ExperimentConfig parse_config(std::string_view text, ExperimentKind kind = ExperimentKind::simulate) {
  auto parsed = parse_config_checked(text, kind);
  if (!parsed.config) {
    std::string msg = "invalid config:";
    for (const auto& v : parsed.violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  return std::move(*parsed.config);
}

}  // namespace rfclt
