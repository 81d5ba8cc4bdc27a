#pragma once

#include "beamtune/optics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace beamtune {

struct StepRecord {
  int step = 0;  // 0 is the state right after reset
  optics::MagnetSettings settings;
  optics::BeamParameters measured;
  optics::BeamParameters truth;
  double mae_um = 0.0;  // measured beam vs target
  double objective = 0.0;
  double reward = 0.0;
  bool on_screen = true;
  bool clamped = false;
  /// Wall time the optimizer spent choosing this step; empty for steps that
  /// involved no inference (random initial samples, return-to-best).
  std::optional<double> latency_s;
};

/// Per-episode trace. `steps` holds every environment step after reset;
/// `initial` is the reset observation.
struct RunRecord {
  int trial_id = 0;
  std::string optimizer;
  std::string scenario;
  optics::BeamParameters target;
  int budget = 0;
  bool returned_to_best = false;
  std::vector<std::string> flags;
  StepRecord initial;
  std::vector<StepRecord> steps;

  const StepRecord& final_step() const { return steps.empty() ? initial : steps.back(); }
  double final_mae_um() const { return final_step().mae_um; }
  /// MAE of every step, reset excluded.
  std::vector<double> mae_trace_um() const;
  /// Running minimum of mae_trace_um().
  std::vector<double> best_mae_trace_um() const;
  void add_flag(const std::string& flag);
};

/// JSON lines: one {"type":"run"} header, then one {"type":"step"} per step
/// (the reset state first, with step = 0).
void write_jsonl(std::ostream& out, const RunRecord& record);
std::vector<RunRecord> read_jsonl(std::istream& in);

}  // namespace beamtune
