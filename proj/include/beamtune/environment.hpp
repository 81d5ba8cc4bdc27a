#pragma once

// Gym-style tuning task around the optics model: observation/action
// contract, objective and reward, trial sets and scenario hooks.

#include "beamtune/optics.hpp"
#include "beamtune/random.hpp"
#include "beamtune/run_record.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace beamtune::env {

using optics::BeamParameters;
using optics::IncomingBeam;
using optics::MagnetSettings;
using optics::Misalignments;

using ActuatorVector = std::array<double, MagnetSettings::kSize>;

/// Range used during operations, per actuator in u order.
inline constexpr ActuatorVector kOperationalHalfRange{30.0, 30.0, 2e-3, 30.0, 2e-3};
/// Delta-mode action scale: 0.1 of the operational range.
inline constexpr ActuatorVector kDeltaScale{3.0, 3.0, 2e-4, 3.0, 2e-4};
/// Start point: FDF quadrupole triplet, steerers off.
inline constexpr MagnetSettings kFdfSettings{10.0, -10.0, 0.0, 10.0, 0.0};

inline constexpr double kMaeFloor = 1e-12;        // m, before taking logs
inline constexpr double kOnScreenReward = 10.0;

struct Trial {
  int id = 0;
  std::uint64_t seed = 0;
  BeamParameters target;
  Misalignments misalignments;
  IncomingBeam incoming;
  /// Second incoming beam drawn from the same ranges; the drift scenarios
  /// move toward it.
  IncomingBeam drift_incoming;

  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TrialRanges {
  double target_mu = 2e-3;         // |mu| bound
  double target_sigma_max = 2e-3;  // sigma in (0, max]
  double misalignment = 400e-6;    // |offset| bound, quads and screen
  Range energy{80e6, 160e6};
  Range mu{-1e-3, 1e-3};
  Range mu_p{-1e-4, 1e-4};
  Range sigma{1e-5, 5e-4};
  Range sigma_p{1e-6, 5e-5};

  void validate() const;
};

IncomingBeam sample_incoming(const TrialRanges& ranges, Rng& rng);

std::vector<Trial> generate_trials(int n, std::uint64_t seed, const TrialRanges& ranges);

struct TrialSet {
  std::uint64_t seed = 0;
  TrialRanges ranges;
  std::vector<Trial> trials;
};

/// Missing keys keep their defaults; unknown keys are rejected.
nlohmann::json ranges_to_json(const TrialRanges& ranges);
TrialRanges ranges_from_json(const nlohmann::json& j);

/// JSON trial file; see README for the schema.
void save_trial_set(const TrialSet& set, const std::filesystem::path& path);
std::string format_trial_set(const TrialSet& set);
TrialSet load_trial_set(const std::filesystem::path& path);
TrialSet parse_trial_set(const std::string& text);

// ---- objective and reward --------------------------------------------------

/// Mean absolute difference of the four beam parameters, in micrometres.
double mae_um(const BeamParameters& b, const BeamParameters& target);

/// Weighted MAE in metres; weights multiply each |b_i - b'_i|, then the
/// weighted sum is divided by the weight total.
double weighted_mae(const BeamParameters& b, const BeamParameters& target,
                    const std::array<double, 4>& weights);

struct ObjectiveValue {
  double value = 0.0;
  bool floor_applied = false;  // MAE was below kMaeFloor and got clamped
};

/// -ln(MAE [m]) +10 when on screen, -10 otherwise. Larger is better.
ObjectiveValue bo_objective(const BeamParameters& b, const BeamParameters& target, bool on_screen);

/// Improvement of log-MAE, doubled when negative.
double rl_reward(double prev_log_mae, double next_log_mae);

// ---- scenarios ------------------------------------------------------------

enum class DriftMode { None, Instant, Continuous };
enum class FailureMode { None, Before, During };
enum class ActionMode { Direct, Delta };

struct ScenarioConfig {
  std::string name = "sim-infinite";
  optics::ScreenMode screen_mode = optics::ScreenMode::Infinite;
  bool aligned = false;
  DriftMode drift = DriftMode::None;
  int drift_step = 40;       // instant: first step using the new beam
  int drift_duration = 80;   // continuous: steps to reach the new beam
  FailureMode failure = FailureMode::None;
  int failure_step = 40;     // during: first step with k_Q3 stuck at 0
  std::optional<double> noise_rms;
  std::array<double, 4> reward_weights{1.0, 1.0, 1.0, 1.0};

  /// Throws ConfigError for inconsistent settings.
  void validate() const;

  static ScenarioConfig named(const std::string& name);
};

/// Names accepted by ScenarioConfig::named.
std::vector<std::string> scenario_names();

// ---- environment ----------------------------------------------------------

struct Observation {
  BeamParameters beam;      // measured
  MagnetSettings settings;  // readback
  BeamParameters target;

  /// Flat (b, u, b') vector of 13 values.
  std::array<double, 13> to_array() const;
};

struct StepResult {
  Observation observation;
  double objective = 0.0;
  double reward = 0.0;
  bool on_screen = true;
  bool done = false;
  bool clamped = false;
};

class Environment {
 public:
  explicit Environment(optics::Lattice lattice);

  Observation reset(const Trial& trial, const ScenarioConfig& scenario);

  /// Applies an action. Out-of-range actions are clamped (flagged), never
  /// rejected. `latency_s` is stored in the run record.
  StepResult step(const ActuatorVector& action, ActionMode mode,
                  std::optional<double> latency_s = std::nullopt);

  MagnetSettings settings() const { return settings_; }
  const Observation& observation() const { return observation_; }
  int steps_taken() const { return step_; }
  const RunRecord& record() const { return record_; }
  RunRecord& record() { return record_; }
  const optics::Lattice& lattice() const { return lattice_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  /// Incoming beam the next (or current, after reset) evaluation uses.
  IncomingBeam incoming_at(int step) const;
  bool q3_failed_at(int step) const;
  void set_max_steps(int n) { max_steps_ = n; }

 private:
  StepRecord evaluate(int step_index);

  optics::Lattice lattice_;
  Trial trial_;
  ScenarioConfig scenario_;
  IncomingBeam base_incoming_;
  MagnetSettings settings_;
  Observation observation_;
  RunRecord record_;
  Rng noise_rng_;
  double last_log_mae_ = 0.0;
  int step_ = 0;
  int max_steps_ = 0;
  bool reset_done_ = false;
};

/// Clamps settings to the operational range (and physical limits).
MagnetSettings clamp_to_operational(const MagnetSettings& u, bool* clamped = nullptr);

}  // namespace beamtune::env
