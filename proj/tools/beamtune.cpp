// beamtune: trial generation, benchmark runs, simplex tuning and reports.
//
// Exit codes: 0 success, 1 runtime failure (partial outputs kept),
// 2 usage or configuration error.

#include "beamtune/benchmark.hpp"
#include "beamtune/errors.hpp"
#include "beamtune/lattice_file.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace beamtune;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BEAMTUNE_OUTPUT_DIR"); env && *env) return env;
  return "beamtune-out";
}

optics::Lattice lattice_from(const std::string& path) {
  return optics::load_lattice_file(path.empty() ? optics::default_lattice_path() : fs::path(path));
}

// ---- gen-trials --------------------------------------------------------------

struct GenArgs {
  int n = 300;
  std::uint64_t seed = 0;
  std::string out = "trials.json";
  std::string ranges;
  bool json_out = false;
};

int cmd_gen_trials(const GenArgs& a) {
  if (a.n < 1) throw ConfigError("--n must be at least 1");
  env::TrialSet set;
  set.seed = a.seed;
  if (!a.ranges.empty()) {
    std::ifstream in(a.ranges);
    if (!in) throw ConfigError("cannot open ranges file " + a.ranges);
    try {
      set.ranges = env::ranges_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError("ranges file is not valid JSON: " + std::string(e.what()));
    }
  }
  set.trials = env::generate_trials(a.n, a.seed, set.ranges);
  env::save_trial_set(set, a.out);
  if (a.json_out) {
    std::cout << json{{"out", a.out}, {"count", a.n}, {"seed", a.seed},
                      {"ranges", env::ranges_to_json(set.ranges)}}.dump()
              << '\n';
  } else {
    std::cout << "wrote " << a.n << " trials (seed " << a.seed << ") to " << a.out << '\n'
              << "ranges: " << env::ranges_to_json(set.ranges).dump() << '\n';
  }
  return 0;
}

// ---- run -----------------------------------------------------------------------

struct RunArgs {
  std::string optimizers = "bo,simplex,random";
  std::string scenario = "sim-infinite";
  std::string trials;
  std::string lattice;
  int budget = 150;
  std::string policy_weights;
  std::string simplex;
  int jobs = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool dry_run = false;
  bool json_out = false;
  int max_trials = 0;
  int grid_mu = 3;
  int grid_sigma = 3;
  int grid_trial = 0;
};

std::vector<bench::OptimizerSpec> build_specs(const RunArgs& a) {
  std::vector<bench::OptimizerSpec> specs;
  for (const std::string& id : split_list(a.optimizers)) {
    bench::OptimizerSpec s;
    s.id = id;
    if (id == "policy") {
      if (a.policy_weights.empty() || a.policy_weights == "none") {
        throw ConfigError("optimizer 'policy' needs a trained weights file: pass --policy-weights PATH");
      }
      s.policy = policy::load_policy(a.policy_weights);
    }
    if (id == "simplex" && !a.simplex.empty()) s.simplex = baselines::load_simplex_config(a.simplex);
    specs.push_back(std::move(s));
  }
  if (specs.empty()) throw ConfigError("--optimizers is empty");
  return specs;
}

int cmd_run(const RunArgs& a) {
  const auto specs = build_specs(a);
  if (a.trials.empty()) throw ConfigError("--trials is required");
  if (a.budget < 1) throw ConfigError("--budget must be positive");
  if (a.jobs < 1) throw ConfigError("--jobs must be positive");
  for (const auto& s : specs) s.validate();
  std::set<std::string> unique;
  for (const auto& s : specs) {
    if (!unique.insert(s.id).second) throw ConfigError("optimizer '" + s.id + "' listed twice");
  }
  const optics::Lattice lattice = lattice_from(a.lattice);
  env::TrialSet set = env::load_trial_set(a.trials);
  if (a.max_trials > 0 && static_cast<std::size_t>(a.max_trials) < set.trials.size()) {
    set.trials.resize(static_cast<std::size_t>(a.max_trials));
  }
  if (set.trials.empty()) throw ConfigError("trial file has no trials");

  std::vector<std::string> scenarios;
  if (a.scenario == "table1") {
    scenarios = bench::table1_scenarios();
  } else if (a.scenario == "table2") {
    for (const auto& c : bench::study_columns()) scenarios.push_back(c.scenario);
  } else if (a.scenario == "grid-scan") {
    if (specs.size() != 1) throw ConfigError("grid-scan takes exactly one optimizer");
    if (a.grid_trial < 0 || static_cast<std::size_t>(a.grid_trial) >= set.trials.size()) {
      throw ConfigError("--grid-trial out of range");
    }
    scenarios = {"sim-infinite"};
  } else {
    env::ScenarioConfig::named(a.scenario).validate();
    scenarios = {a.scenario};
  }
  for (const auto& s : scenarios) env::ScenarioConfig::named(s).validate();
  const fs::path out = output_dir(a.out);

  if (a.dry_run) {
    json plan = {{"optimizers", split_list(a.optimizers)},
                 {"scenario", a.scenario},
                 {"scenarios", scenarios},
                 {"trials", set.trials.size()},
                 {"budget", a.scenario == "table2" ? bench::kStudyBudget : a.budget},
                 {"jobs", a.jobs},
                 {"seed", a.seed},
                 {"out", out.string()}};
    if (a.json_out) {
      std::cout << plan.dump() << '\n';
    } else {
      std::cout << "plan: " << plan.dump(2) << '\n';
    }
    return 0;
  }

  bench::SuiteOptions opt;
  opt.budget = a.budget;
  opt.jobs = a.jobs;
  opt.seed = a.seed;
  bench::Report report;
  report.seed = a.seed;
  if (a.scenario == "table1") {
    report.suites = bench::run_table1(specs, set.trials, lattice, opt);
  } else if (a.scenario == "table2") {
    report.suites = bench::run_scenario_studies(specs, set.trials, lattice, opt);
  } else if (a.scenario == "grid-scan") {
    const auto grid = bench::GridSpec::regular(a.grid_mu, 2e-3, a.grid_sigma, 1e-4, 2e-3);
    report.grids.push_back(bench::target_grid_scan(specs.front(),
                                                   set.trials[static_cast<std::size_t>(a.grid_trial)],
                                                   grid, env::ScenarioConfig::named("sim-infinite"),
                                                   lattice, opt));
  } else {
    report.suites.push_back(
        bench::run_suite(specs, env::ScenarioConfig::named(a.scenario), set.trials, lattice, opt));
  }
  bench::write_report(report, out);

  if (a.json_out) {
    std::cout << json{{"out", out.string()}, {"failures", report.has_failures()}}.dump() << '\n';
  } else {
    std::cout << bench::format_summary_md(report) << "\nreport written to " << out.string() << '\n';
  }
  if (report.has_failures()) {
    std::cerr << "some runs failed; see report.json\n";
    return kExitRuntime;
  }
  return 0;
}

// ---- tune-simplex ------------------------------------------------------------------

struct TuneArgs {
  std::string trials;
  std::string lattice;
  std::string scenario = "sim-infinite";
  int candidates = 405;
  int budget = 150;
  int max_trials = 0;
  std::uint64_t seed = 0;
  std::string out = "simplex.json";
  bool json_out = false;
};

int cmd_tune_simplex(const TuneArgs& a) {
  if (a.trials.empty()) throw ConfigError("--trials is required");
  if (a.candidates < 1) throw ConfigError("--candidates must be positive");
  const optics::Lattice lattice = lattice_from(a.lattice);
  env::TrialSet set = env::load_trial_set(a.trials);
  if (a.max_trials > 0 && static_cast<std::size_t>(a.max_trials) < set.trials.size()) {
    set.trials.resize(static_cast<std::size_t>(a.max_trials));
  }
  const auto scenario = env::ScenarioConfig::named(a.scenario);
  baselines::SimplexConfig base;
  base.budget = a.budget;
  const auto result = baselines::tune_initial_simplex(
      [&] { return env::Environment(lattice); }, a.candidates, set.trials, scenario, a.seed, base);
  baselines::save_simplex_config(result.best, a.out);
  const double mean = result.candidate_mean_mae_um[result.best_index];
  if (a.json_out) {
    std::cout << json{{"out", a.out}, {"best_index", result.best_index}, {"mean_mae_um", mean}}.dump()
              << '\n';
  } else {
    std::cout << "best simplex: candidate " << result.best_index << ", mean final MAE " << mean
              << " um; written to " << a.out << '\n';
  }
  return 0;
}

// ---- report ---------------------------------------------------------------------------

int cmd_report(const std::string& report_path, const std::string& out_flag, bool json_out) {
  if (!fs::exists(report_path)) throw ConfigError("report file not found: " + report_path);
  const bench::Report report = bench::load_report(report_path);
  const fs::path out = out_flag.empty() ? fs::path(report_path).parent_path() : fs::path(out_flag);
  bench::write_report(report, out);
  if (json_out) {
    std::cout << json{{"out", out.string()}, {"suites", report.suites.size()}}.dump() << '\n';
  } else {
    std::cout << bench::format_summary_md(report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam-tuning benchmark: simulator, optimizers and reports"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-trials", "Generate a seeded trial file");
  g->add_option("--n", gen.n, "Number of trials")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output trial file")->capture_default_str();
  g->add_option("--ranges", gen.ranges, "JSON file overriding sampling ranges");
  g->add_flag("--json", gen.json_out, "Machine-readable stdout");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run optimizers over a trial set");
  r->set_config("--config", "", "INI/TOML file with option values");
  r->add_option("--optimizers", run.optimizers, "Comma list of bo, simplex, random, policy")
      ->capture_default_str();
  r->add_option("--scenario", run.scenario,
                "Scenario name, or table1 / table2 / grid-scan")
      ->capture_default_str();
  r->add_option("--trials", run.trials, "Trial file from gen-trials");
  r->add_option("--lattice", run.lattice, "Lattice file (default: shipped ARES EA section)");
  r->add_option("--budget", run.budget, "Steps per episode")->capture_default_str();
  r->add_option("--policy-weights", run.policy_weights, "Policy weights JSON");
  r->add_option("--simplex", run.simplex, "Tuned simplex JSON from tune-simplex");
  r->add_option("--jobs", run.jobs, "Parallel trial workers")->capture_default_str();
  r->add_option("--seed", run.seed, "Suite seed")->capture_default_str();
  r->add_option("--out", run.out, "Output directory (default: $BEAMTUNE_OUTPUT_DIR or beamtune-out)");
  r->add_option("--max-trials", run.max_trials, "Use only the first N trials");
  r->add_option("--grid-mu", run.grid_mu, "Grid points per mu axis")->capture_default_str();
  r->add_option("--grid-sigma", run.grid_sigma, "Grid points per sigma axis")->capture_default_str();
  r->add_option("--grid-trial", run.grid_trial, "Trial index held fixed by grid-scan")
      ->capture_default_str();
  r->add_flag("--dry-run", run.dry_run, "Validate and print the plan only");
  r->add_flag("--json", run.json_out, "Machine-readable stdout");

  TuneArgs tune;
  auto* t = app.add_subcommand("tune-simplex", "Random search over initial simplices");
  t->add_option("--trials", tune.trials, "Trial file");
  t->add_option("--lattice", tune.lattice, "Lattice file");
  t->add_option("--scenario", tune.scenario, "Scenario")->capture_default_str();
  t->add_option("--candidates", tune.candidates, "Candidate simplices")->capture_default_str();
  t->add_option("--budget", tune.budget, "Steps per episode")->capture_default_str();
  t->add_option("--max-trials", tune.max_trials, "Use only the first N trials");
  t->add_option("--seed", tune.seed, "Search seed")->capture_default_str();
  t->add_option("--out", tune.out, "Output simplex JSON")->capture_default_str();
  t->add_flag("--json", tune.json_out, "Machine-readable stdout");

  std::string report_path;
  std::string report_out;
  bool report_json = false;
  auto* rep = app.add_subcommand("report", "Regenerate tables and charts from a report.json");
  rep->add_option("--report", report_path, "Path to report.json")->required();
  rep->add_option("--out", report_out, "Output directory (default: next to report.json)");
  rep->add_flag("--json", report_json, "Machine-readable stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_gen_trials(gen);
    if (*r) return cmd_run(run);
    if (*t) return cmd_tune_simplex(tune);
    if (*rep) return cmd_report(report_path, report_out, report_json);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
