#pragma once

// Episode metrics: final beam difference, steps to target, steps to
// convergence, win rates and inference-latency summaries.

#include "beamtune/run_record.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beamtune::metrics {

inline constexpr double kEpsilonUm = 20.0;

/// First step (0-based, reset excluded) whose MAE is strictly below epsilon.
std::optional<int> steps_to_target(std::span<const double> mae_um, double epsilon_um = kEpsilonUm);
std::optional<int> steps_to_target(const RunRecord& record, double epsilon_um = kEpsilonUm);

/// Smallest t with best(t) - min_{t' > t} best(t') < epsilon, where best is
/// the running-minimum MAE. Empty if that t is the last step.
std::optional<int> steps_to_convergence(std::span<const double> best_mae_um,
                                        double epsilon_um = kEpsilonUm);
/// Uses the budgeted steps only; a trailing return-to-best step is not
/// counted as progress.
std::optional<int> steps_to_convergence(const RunRecord& record, double epsilon_um = kEpsilonUm);

struct Summary {
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

struct MetricsRow {
  std::string optimizer;
  std::size_t trials = 0;
  Summary final_mae_um;
  Summary steps_to_target;  // over successful trials only
  double target_success_rate = 0.0;
  Summary steps_to_convergence;
  double convergence_success_rate = 0.0;
};

MetricsRow compute_row(const std::string& optimizer, std::span<const RunRecord> records);

/// Fraction of shared trials where `a` ends strictly below `b` (ties count
/// as no win). Records are matched by trial id.
double win_rate(std::span<const RunRecord> a, std::span<const RunRecord> b);

struct LatencySummary {
  std::string optimizer;
  std::size_t samples = 0;
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p90_s = 0.0;
  double p99_s = 0.0;
  /// Least-squares slope of the per-step median latency against step index.
  double slope_s_per_step = 0.0;
  /// Median latency at each step index with timed samples.
  std::map<int, double> median_by_step;
};

/// One summary per optimizer id present in `records`; empty input gives an
/// empty report.
std::vector<LatencySummary> timing_report(std::span<const RunRecord> records);

}  // namespace beamtune::metrics
