// rfclt: batch runner for random-field limit-theorem experiments.
//
//   rfclt <kind> [--config FILE] [--seed N] [--out DIR] [--workers N] [--raw]
//
// Exit status: 0 success, 1 invalid config or arguments, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rfclt/config.hpp"
#include "rfclt/errors.hpp"
#include "rfclt/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rfclt::ValidationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of limit theorems for stationary random fields"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  bool raw = false;

  for (auto k : rfclt::all_experiment_kinds) {
    const std::string kind = rfclt::to_string(k);
    auto* sub = app.add_subcommand(kind, "run a " + kind + " experiment");
    sub->add_option("--config", config_path, "config file (section.key = value lines)");
    sub->add_option("--seed", seed, "seed, overrides experiment.seed");
    sub->add_option("--out", out_dir, "output directory, overrides output.dir");
    sub->add_option("--workers", workers, "worker threads, overrides experiment.workers")->check(CLI::PositiveNumber);
    sub->add_flag("--raw", raw, "also write per-replicate raw.csv");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  rfclt::ExperimentKind kind = rfclt::ExperimentKind::simulate;
  for (auto k : rfclt::all_experiment_kinds) {
    if (rfclt::to_string(k) == name) kind = k;
  }
  try {
    const std::string text = config_path.empty() ? std::string() : read_file(config_path);
    auto parsed = rfclt::parse_config_checked(text, kind);
    if (!parsed.config) {
      std::cerr << "invalid config:\n";
      for (const auto& v : parsed.violations) std::cerr << "  " << v << '\n';
      return 1;
    }
    rfclt::ExperimentConfig cfg = std::move(*parsed.config);
    if (cfg.kind != kind) {
      std::cerr << "config sets experiment.kind = " << rfclt::to_string(cfg.kind) << " but the subcommand is "
                << name << '\n';
      return 1;
    }
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    if (workers) cfg.workers = *workers;
    if (raw) cfg.raw = true;

    const auto report = rfclt::run_experiment(cfg);
    rfclt::write_report(report, cfg.output_dir);
    std::cout << report.summary["results"].dump(2) << '\n';
    return 0;
  } catch (const rfclt::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
