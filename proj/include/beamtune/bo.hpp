#pragma once

// Bayesian optimisation of the tuning objective: GP surrogate refit every
// step, Expected Improvement maximized inside a trust region around the
// last evaluated settings, quadrupole polarities held in the FDF pattern,
// and a final return to the best settings seen.

#include "beamtune/environment.hpp"
#include "beamtune/gp.hpp"
#include "beamtune/random.hpp"
#include "beamtune/run_record.hpp"

#include <array>
#include <optional>
#include <vector>

namespace beamtune::bo {

using env::ActuatorVector;

struct BOConfig {
  int n_init = 5;
  int budget = 150;
  double trust_fraction = 0.1;  // max step per dimension, fraction of the operational width
  bool polarity_constraints = true;
  int candidates = 512;
  int refine_rounds = 6;
  bool return_to_best = true;
  std::uint64_t seed = 0;
  int fit_restarts = 4;
  int fit_max_evaluations = 150;

  void validate() const;

  static BOConfig simulation() { return {}; }
  /// Shorter budget used on the real machine.
  static BOConfig real_machine() {
    BOConfig c;
    c.budget = 75;
    return c;
  }
};

struct Box {
  ActuatorVector lo{};
  ActuatorVector hi{};

  bool contains(const ActuatorVector& u, double tol = 0.0) const;
};

/// Operational range intersected with the FDF polarity half-spaces
/// (k_Q1 >= 0, k_Q2 <= 0, k_Q3 >= 0) when `polarity` is set.
Box feasible_box(bool polarity);

/// Feasible box intersected with the trust region around `center`.
Box trust_box(const ActuatorVector& center, const BOConfig& config);

/// Normalization of actuator values onto [-1, 1] over the operational range.
gp::InputNormalizer actuator_normalizer();

/// EI for maximization; max(mean - best, 0) when stddev is 0.
double expected_improvement(double mean, double stddev, double best);

struct BOState {
  std::vector<ActuatorVector> inputs;  // readback settings, physical units
  std::vector<double> objectives;
  std::optional<gp::Model> model;
  std::optional<gp::Hyperparams> last_hyperparams;
  int step = 0;

  void add(const ActuatorVector& u, double objective);
  std::size_t best_index() const;
  double best_objective() const { return objectives[best_index()]; }
};

/// Refits hyperparameters and conditions the surrogate on all data.
void fit_model(BOState& state, const BOConfig& config);

/// EI of raw actuator points under the fitted model (standardized units).
std::vector<double> acquisition(const BOState& state, const std::vector<ActuatorVector>& points);

/// Next settings: argmax EI over the trust box around the last evaluated
/// settings, seeded random candidates plus coordinate refinement.
optics::MagnetSettings propose_next(const BOState& state, const BOConfig& config, Rng& rng);

/// Full episode on a freshly reset environment.
RunRecord run_bo(env::Environment& environment, const BOConfig& config);

}  // namespace beamtune::bo
