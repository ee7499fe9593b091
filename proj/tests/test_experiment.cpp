#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rfclt/config.hpp"
#include "rfclt/experiment.hpp"

using namespace rfclt;
using Catch::Approx;

namespace {

bool any_contains(const std::vector<std::string>& lines, const std::string& needle) {
  for (const auto& l : lines) {
    if (l.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rfclt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(RFCLT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("shortest round-trip number formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-17) == "-2.5e-17");
  for (double x : {1.0 / 3.0, 6.02214076e23, 5e-324}) CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  CsvTable t({"a", "b"});
  t.row(1, 0.5);
  CHECK(t.text() == "a,b\n1,0.5\n");
  CHECK_THROWS_AS(t.row(1), DimensionError);
}

TEST_CASE("minimal config parses with defaults") {
  const auto c = parse_config("experiment.kind = sigma2\n# comment\n\ngrid.schedule = 8x8, 16x16\n");
  CHECK(c.kind == ExperimentKind::sigma2);
  CHECK(c.seed == 1);
  CHECK(c.schedule.size() == 2);
  CHECK(c.schedule[1].m1 == 16);
  CHECK(c.echo.size() == 2);
  const auto empty = parse_config("", ExperimentKind::oracle);
  CHECK(empty.kind == ExperimentKind::oracle);
}

TEST_CASE("non-square-summable coefficients are rejected with the line number") {
  const auto p = parse_config_checked(
      "model.variant = linear-identity\nmodel.coefficients = product-decay\nmodel.q = 0.5\n");
  CHECK_FALSE(p.config);
  REQUIRE(p.violations.size() == 1);
  CHECK(p.violations[0].rfind("line 3:", 0) == 0);
  CHECK(p.violations[0].find("model.q") != std::string::npos);
}

TEST_CASE("duplicate and unknown keys") {
  const auto p = parse_config_checked("mc.reps = 10\nmc.reps = 20\nmc.rep = 5\n");
  CHECK(any_contains(p.violations, "line 2: duplicate key 'mc.reps' (first set on line 1)"));
  CHECK(any_contains(p.violations, "line 3: unknown key 'mc.rep'"));
}

TEST_CASE("every violation is reported") {
  const auto p = parse_config_checked(
      "experiment.kind = clt\n"
      "mc.reps = 5\n"
      "model.innovation = cauchy\n"
      "grid.rect = 0x4\n"
      "test.alpha = 1.5\n"
      "not a pair\n"
      "grid.schedule = 16x16, 8x8\n");
  CHECK(p.violations.size() == 6);
  CHECK(any_contains(p.violations, "line 2: clt experiments need mc.reps >= 20"));
  CHECK(any_contains(p.violations, "line 3:"));
  CHECK(any_contains(p.violations, "line 4:"));
  CHECK(any_contains(p.violations, "line 5:"));
  CHECK(any_contains(p.violations, "line 6: expected 'section.key = value'"));
  CHECK(any_contains(p.violations, "line 7:"));
  CHECK_THROWS_AS(parse_config("mc.reps = x"), ValidationError);
}

TEST_CASE("cross-field checks") {
  CHECK(any_contains(parse_config_checked("model.variant = linear-functional\nmodel.coefficients = additive-decay\n"
                                          "model.h = 2\n")
                         .violations,
                     "identity functional"));
  CHECK(any_contains(parse_config_checked("grid.rect = 4x4\ngrid.schedule = 8x8\n").violations, "mutually exclusive"));
  CHECK(any_contains(parse_config_checked("", ExperimentKind::projective).violations, "need model.variant"));
  CHECK(any_contains(parse_config_checked("mc.reps = 1\n", ExperimentKind::fdd).violations, "mc.reps >= 2"));
}

TEST_CASE("simulate report") {
  auto c = parse_config("model.variant = linear-identity\nmodel.coefficients = product-decay\nmodel.q = 2\n"
                        "model.radius = 3\ngrid.rect = 5x4\n");
  const auto r = run_experiment(c);
  CHECK(r.summary["schema"] == "rfclt.run/1");
  CHECK(r.summary["kind"] == "simulate");
  CHECK(r.summary["rng"]["generator"] == "philox4x32-10");
  CHECK(r.summary["config"]["model.q"] == "2");
  CHECK(r.summary["results"]["margin"] == 3);
  std::istringstream csv(r.series_csv);
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 21);
  CHECK(r.series_csv.rfind("i,j,value\n1,1,", 0) == 0);
}

TEST_CASE("sigma2 report carries closed form and series cross-check") {
  auto c = parse_config("model.variant = linear-identity\nmodel.coefficients = additive-decay\nmodel.q = 2.5\n"
                        "model.radius = 2\ngrid.schedule = 8x8, 32x32\nmc.reps = 50\nmc.series = true\n"
                        "mc.m = 2\nmc.lag_cutoff = 2\n",
                        ExperimentKind::sigma2);
  const auto r = run_experiment(c);
  const auto& res = r.summary["results"];
  CHECK(res["method"] == "scaling");
  CHECK(res.contains("closed_form"));
  CHECK(res["series"]["warning"] == "");
  CHECK(res["series"]["scaling_z"].get<double>() < 6.0);
  CHECK(r.series_csv.rfind("scale,rep_count,sigma2_hat,se,replicate_variance,replicate_variance_se\n8x8,50,", 0) == 0);
  CHECK(r.summary["rng"]["streams"] == nlohmann::ordered_json({"sigma2", "series"}));
}

TEST_CASE("clt, fdd and counterexample reports") {
  auto clt = parse_config("grid.schedule = 4x4, 8x8\nmc.reps = 200\noutput.raw = true\n", ExperimentKind::clt);
  const auto rc = run_experiment(clt);
  CHECK(rc.summary["results"]["degenerate"] == false);
  CHECK(rc.summary["results"]["scales"].size() == 2);
  REQUIRE(rc.raw_csv);
  CHECK(rc.raw_csv->rfind("scale,rep,value\n4x4,0,", 0) == 0);

  auto fdd = parse_config("grid.rect = 8x8\nmc.reps = 200\nfdd.axis = 0.5, 1\n", ExperimentKind::fdd);
  const auto rf = run_experiment(fdd);
  CHECK(rf.summary["results"]["covariance"]["tag"] == "covariance");
  CHECK(rf.series_csv.rfind("s1,s2,t1,t2,empirical,se,target\n", 0) == 0);

  auto ce = parse_config("mc.reps = 500\ncounterexample.n = 16\n", ExperimentKind::counterexample);
  const auto rce = run_experiment(ce);
  CHECK(rce.summary["results"].contains("versus_product_normal"));
  CHECK(rce.series_csv.rfind("kind,n,rep_count,ks_stat,ks_p,ks2_stat,ks2_p,excess_kurtosis,excess_kurtosis_se\n"
                             "product,16,500,",
                             0) == 0);
}

TEST_CASE("orthomartingale clt normalizes by a unit variance") {
  auto c = parse_config("model.variant = orthomartingale\nmodel.innovation = rademacher\ngrid.rect = 6x6\n"
                        "mc.reps = 40\n",
                        ExperimentKind::clt);
  const auto r = run_experiment(c);
  CHECK(r.summary["results"]["degenerate"] == false);
  CHECK(r.summary["results"]["sigma2_hat"].get<double>() == Approx(1.0).margin(0.25));
}

TEST_CASE("projective and oracle reports") {
  auto p = parse_config("model.variant = linear-identity\nmodel.coefficients = product-decay\nmodel.q = 2\n"
                        "model.radius = 4\nprojective.max_k = 3\nprojective.max_l = 2\n",
                        ExperimentKind::projective);
  const auto rp = run_experiment(p);
  CHECK(rp.summary["results"]["classification"]["projective_condition"] == true);
  CHECK(rp.summary["results"]["tail_exponent"].get<double>() == Approx(-3.0).margin(0.2));
  CHECK(rp.series_csv.rfind("k,l,estimate,se,exact,partial,partial_se\n1,1,", 0) == 0);

  auto oc = parse_config("oracle.check = commuting\noracle.instances = 10\n", ExperimentKind::oracle);
  const auto ro = run_experiment(oc);
  CHECK(ro.summary["results"]["max_deviation"].get<double>() < 1e-12);

  auto od = parse_config("oracle.check = distribution\noracle.function = lag-product\ngrid.rect = 2x2\n",
                         ExperimentKind::oracle);
  const auto rd = run_experiment(od);
  CHECK(rd.summary["results"]["variance"].get<double>() == Approx(4.0));

  auto om = parse_config("oracle.check = moment\noracle.rows = 4\noracle.cols = 4\ngrid.rect = 3x3\n",
                         ExperimentKind::oracle);
  const auto rm = run_experiment(om);
  CHECK(rm.summary["results"]["ratio"].get<double>() <= 1.0);
  CHECK(rm.series_csv.rfind("k,l,d\n", 0) == 0);
}

TEST_CASE("outputs do not depend on the worker count") {
  const std::string base =
      "model.variant = linear-functional\nmodel.coefficients = product-decay\nmodel.q = 2\nmodel.radius = 3\n"
      "model.functional = abs\nmodel.innovation = gaussian\ngrid.schedule = 8x8, 12x12\nmc.reps = 24\n"
      "output.raw = true\n";
  for (auto kind : {ExperimentKind::sigma2, ExperimentKind::clt}) {
    auto one = parse_config(base + "experiment.workers = 1\n", kind);
    auto many = parse_config(base + "experiment.workers = 3\n", kind);
    const auto a = run_experiment(one);
    const auto b = run_experiment(many);
    CHECK(a.series_csv == b.series_csv);
    CHECK(a.raw_csv == b.raw_csv);
    CHECK(a.summary["results"] == b.summary["results"]);
  }
  auto proj = parse_config("model.variant = orthomartingale\nmc.outer = 300\nmc.inner = 4\n", ExperimentKind::projective);
  auto proj3 = proj;
  proj3.workers = 3;
  CHECK(run_experiment(proj).series_csv == run_experiment(proj3).series_csv);
}

TEST_CASE("report files") {
  auto c = parse_config("grid.rect = 3x3\n");
  const auto dir = scratch("files");
  write_report(run_experiment(c), dir);
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(slurp(dir / "series.csv").rfind("i,j,value\n", 0) == 0);
  CHECK_FALSE(std::filesystem::exists(dir / "raw.csv"));
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["schema"] == "rfclt.run/1");
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  const auto log = dir / "log.txt";
  {
    std::ofstream(dir / "ok.cfg") << "grid.rect = 4x4\n";
    CHECK(run_cli("simulate --config " + (dir / "ok.cfg").string() + " --out " + (dir / "ok").string(), log) == 0);
    CHECK(std::filesystem::exists(dir / "ok" / "summary.json"));
  }
  {
    std::ofstream(dir / "bad.cfg") << "model.variant = linear-identity\nmodel.coefficients = additive-decay\n"
                                      "model.q = 0.5\n";
    CHECK(run_cli("simulate --config " + (dir / "bad.cfg").string() + " --out " + (dir / "bad").string(), log) == 1);
    CHECK(slurp(log).find("line 3:") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir / "bad"));
  }
  {
    std::ofstream(dir / "kind.cfg") << "experiment.kind = fdd\n";
    CHECK(run_cli("simulate --config " + (dir / "kind.cfg").string(), log) == 1);
  }
  CHECK(run_cli("simulate --no-such-flag", log) == 1);
  CHECK(run_cli("simulate --workers 0", log) == 1);
  CHECK(run_cli("simulate --config " + (dir / "missing.cfg").string(), log) == 1);
  {
    std::ofstream(dir / "big.cfg") << "oracle.rows = 5\noracle.cols = 5\n";
    CHECK(run_cli("oracle --config " + (dir / "big.cfg").string() + " --out " + (dir / "big").string(), log) == 2);
    CHECK(slurp(log).find("20 cells") != std::string::npos);
  }
  {
    std::ofstream(dir / "seed.cfg") << "grid.rect = 4x4\n";
    const auto cfg = (dir / "seed.cfg").string();
    REQUIRE(run_cli("simulate --config " + cfg + " --seed 9 --out " + (dir / "s1").string(), log) == 0);
    REQUIRE(run_cli("simulate --config " + cfg + " --seed 9 --workers 2 --out " + (dir / "s2").string(), log) == 0);
    CHECK(slurp(dir / "s1" / "series.csv") == slurp(dir / "s2" / "series.csv"));
    CHECK(nlohmann::json::parse(slurp(dir / "s1" / "summary.json"))["rng"]["seed"] == 9);
  }
}
