#pragma once

// Optimizer x scenario x trial sweeps and their reports.

#include "beamtune/baselines.hpp"
#include "beamtune/bo.hpp"
#include "beamtune/environment.hpp"
#include "beamtune/metrics.hpp"
#include "beamtune/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace beamtune::bench {

struct OptimizerSpec {
  std::string id;  // bo, simplex, random or policy
  bo::BOConfig bo = bo::BOConfig::simulation();
  baselines::SimplexConfig simplex;
  baselines::RandomSearchConfig random;
  std::optional<policy::PolicyWeights> policy;

  void validate() const;
};

std::vector<std::string> optimizer_ids();

/// Per-trial RNG seed for one optimizer.
std::uint64_t trial_seed(std::uint64_t suite_seed, int trial_id, const std::string& optimizer);

/// Runs one episode with `budget` steps (plus return-to-best where the
/// optimizer has one).
RunRecord run_optimizer(const OptimizerSpec& spec, const env::Trial& trial,
                        const env::ScenarioConfig& scenario, const optics::Lattice& lattice,
                        int budget, std::uint64_t suite_seed);

struct SuiteOptions {
  int budget = 150;
  int jobs = 1;
  std::uint64_t seed = 0;
};

struct TrialFailure {
  int trial_id = 0;
  std::string optimizer;
  std::string message;
};

struct WinRate {
  std::string a;
  std::string b;
  double rate = 0.0;  // fraction of trials where a ends strictly below b
};

struct SuiteResult {
  std::string label;  // unique within a report
  std::string table;  // table1, table2 or suite
  std::string scenario;
  int budget = 0;
  std::vector<std::string> optimizers;
  std::vector<RunRecord> records;  // optimizer order, then trial id
  std::vector<TrialFailure> failures;
  std::vector<metrics::MetricsRow> rows;
  std::vector<WinRate> win_rates;

  std::vector<RunRecord> records_for(const std::string& optimizer) const;
  const metrics::MetricsRow* row(const std::string& optimizer) const;
  /// Recomputes rows and win rates from `records`.
  void recompute();
};

SuiteResult run_suite(const std::vector<OptimizerSpec>& optimizers,
                      const env::ScenarioConfig& scenario, const std::vector<env::Trial>& trials,
                      const optics::Lattice& lattice, const SuiteOptions& options);

/// Column name and scenario name of the feedback / failure study.
struct StudyColumn {
  std::string column;
  std::string scenario;
};
std::vector<StudyColumn> study_columns();

inline constexpr int kStudyBudget = 80;

/// Five suites labelled table2-<column>, each with 80-step budgets.
std::vector<SuiteResult> run_scenario_studies(const std::vector<OptimizerSpec>& optimizers,
                                              const std::vector<env::Trial>& trials,
                                              const optics::Lattice& lattice,
                                              SuiteOptions options);

/// Three suites labelled table1-<scenario> over the simulation blocks.
std::vector<std::string> table1_scenarios();
std::vector<SuiteResult> run_table1(const std::vector<OptimizerSpec>& optimizers,
                                    const std::vector<env::Trial>& trials,
                                    const optics::Lattice& lattice, const SuiteOptions& options);

struct GridSpec {
  std::vector<double> mu_x{0.0};
  std::vector<double> mu_y{0.0};
  std::vector<double> sigma_x{1e-4};
  std::vector<double> sigma_y{1e-4};

  std::size_t size() const { return mu_x.size() * mu_y.size() * sigma_x.size() * sigma_y.size(); }
  void validate() const;
  /// Evenly spaced values: mu in [-mu_max, mu_max], sigma in [sigma_min, sigma_max].
  static GridSpec regular(int n_mu, double mu_max, int n_sigma, double sigma_min, double sigma_max);
};

struct GridCell {
  optics::BeamParameters target;
  double final_mae_um = 0.0;
  std::optional<std::string> error;
};

struct GridResult {
  std::string optimizer;
  int trial_id = 0;
  std::vector<GridCell> cells;  // mu_x slowest, sigma_y fastest
};

/// Holds the trial's magnets and beam fixed and sweeps the target.
GridResult target_grid_scan(const OptimizerSpec& optimizer, const env::Trial& trial,
                            const GridSpec& grid, const env::ScenarioConfig& scenario,
                            const optics::Lattice& lattice, const SuiteOptions& options);

struct Report {
  std::uint64_t seed = 0;
  std::vector<SuiteResult> suites;
  std::vector<GridResult> grids;

  bool has_failures() const;
  const SuiteResult* suite(const std::string& label) const;
};

/// report.json, records/<label>.jsonl, tables.csv, summary.md,
/// best_mae_<label>.svg and timing.json.
void write_report(const Report& report, const std::filesystem::path& dir);

/// Loads report.json plus its record files and recomputes every metric.
Report load_report(const std::filesystem::path& report_json);

/// report.json content: metrics only, no wall-clock data.
std::string format_report_json(const Report& report);
std::string format_tables_csv(const Report& report);
std::string format_summary_md(const Report& report);
/// Median best-seen MAE per step, one polyline per optimizer.
std::string format_best_mae_svg(const SuiteResult& suite);
std::string format_timing_json(const Report& report);

/// Median over trials of the best-seen MAE at each budgeted step.
std::vector<double> median_best_mae_curve(const std::vector<RunRecord>& records, int budget);

}  // namespace beamtune::bench
