#pragma once

// Baseline tuners: Nelder-Mead on the beam MAE (with a random search over
// initial simplices) and plain random search with return-to-best.

#include "beamtune/environment.hpp"
#include "beamtune/nelder_mead.hpp"
#include "beamtune/run_record.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace beamtune::baselines {

/// Initial simplex: the FDF start plus one vertex per actuator, offset along
/// that axis by `spreads[i]`. Spreads are in normalized units (the
/// operational range maps to [-1, 1]).
struct SimplexConfig {
  std::vector<double> spreads = default_spreads();
  nm::Coefficients coeffs;
  int budget = 150;
  double x_tolerance = 1e-4;     // normalized units
  double f_tolerance = 1e-3;     // micrometres
  std::uint64_t seed = 0;
  /// Mean final MAE across the tuning trials, when produced by tuning.
  std::optional<double> tuned_mean_mae_um;

  /// 5 % of each non-zero start coordinate, 0.00025 for zero coordinates.
  static std::vector<double> default_spreads();
  /// Vertices in normalized units.
  std::vector<nm::Point> initial_simplex() const;
  void validate() const;
};

void save_simplex_config(const SimplexConfig& config, const std::filesystem::path& path);
SimplexConfig load_simplex_config(const std::filesystem::path& path);

/// One machine step per objective evaluation; the reset reading serves as
/// the value of the start vertex. The episode ends at the budget or on
/// convergence and stays at the last evaluated settings.
RunRecord run_nelder_mead(env::Environment& environment, const SimplexConfig& config);

using EnvironmentFactory = std::function<env::Environment()>;

struct TuningResult {
  SimplexConfig best;
  std::vector<double> candidate_mean_mae_um;
  std::size_t best_index = 0;
};

/// Random search over axis-aligned initial simplices, scored by mean final
/// MAE across `trials` (ties keep the earlier candidate).
TuningResult tune_initial_simplex(const EnvironmentFactory& make_env, int n_candidates,
                                  const std::vector<env::Trial>& trials,
                                  const env::ScenarioConfig& scenario, std::uint64_t seed,
                                  const SimplexConfig& base = {});

struct RandomSearchConfig {
  int budget = 150;
  std::uint64_t seed = 0;
  /// Sampling box; defaults to the operational range.
  env::ActuatorVector lo{-30.0, -30.0, -2e-3, -30.0, -2e-3};
  env::ActuatorVector hi{30.0, 30.0, 2e-3, 30.0, 2e-3};

  void validate() const;
};

/// `budget` uniform samples, then one more step back to the lowest-MAE
/// settings seen, the reset reading included.
RunRecord run_random_search(env::Environment& environment, const RandomSearchConfig& config);

}  // namespace beamtune::baselines
