#include "beamtune/environment.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace beamtune::env {

namespace {

bool in_range(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

void check_range(const Range& r, const char* what, bool positive) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || (positive && r.lo <= 0.0)) {
    throw ConfigError(std::string("invalid trial range for ") + what);
  }
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

// ---- trials ---------------------------------------------------------------

void Trial::validate() const {
  const TrialRanges defaults;
  for (double mu : {target.mu_x, target.mu_y}) {
    if (!in_range(mu, -defaults.target_mu, defaults.target_mu)) {
      throw ConfigError("trial target centroid outside +-2 mm");
    }
  }
  for (double s : {target.sigma_x, target.sigma_y}) {
    if (!(std::isfinite(s) && s > 0.0 && s <= defaults.target_sigma_max)) {
      throw ConfigError("trial target size outside (0, 2 mm]");
    }
  }
  try {
    incoming.validate();
    drift_incoming.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("trial incoming beam: ") + e.what());
  }
}

void TrialRanges::validate() const {
  if (!(target_mu > 0.0 && target_mu <= 2e-3)) throw ConfigError("target_mu must be in (0, 2 mm]");
  if (!(target_sigma_max > 0.0 && target_sigma_max <= 2e-3)) {
    throw ConfigError("target_sigma_max must be in (0, 2 mm]");
  }
  if (!(misalignment >= 0.0 && std::isfinite(misalignment))) {
    throw ConfigError("misalignment bound must be >= 0");
  }
  check_range(energy, "energy", true);
  check_range(mu, "mu", false);
  check_range(mu_p, "mu_p", false);
  check_range(sigma, "sigma", true);
  check_range(sigma_p, "sigma_p", true);
}

IncomingBeam sample_incoming(const TrialRanges& r, Rng& rng) {
  IncomingBeam b;
  b.energy = uniform(rng, r.energy.lo, r.energy.hi);
  b.mu_x = uniform(rng, r.mu.lo, r.mu.hi);
  b.mu_xp = uniform(rng, r.mu_p.lo, r.mu_p.hi);
  b.mu_y = uniform(rng, r.mu.lo, r.mu.hi);
  b.mu_yp = uniform(rng, r.mu_p.lo, r.mu_p.hi);
  b.sigma_x = uniform(rng, r.sigma.lo, r.sigma.hi);
  b.sigma_xp = uniform(rng, r.sigma_p.lo, r.sigma_p.hi);
  b.sigma_y = uniform(rng, r.sigma.lo, r.sigma.hi);
  b.sigma_yp = uniform(rng, r.sigma_p.lo, r.sigma_p.hi);
  return b;
}

std::vector<Trial> generate_trials(int n, std::uint64_t seed, const TrialRanges& ranges) {
  if (n <= 0) throw ConfigError("trial count must be positive");
  ranges.validate();
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Trial t;
    t.id = i;
    t.seed = derive_seed({seed, static_cast<std::uint64_t>(i)});
    Rng rng(t.seed);
    // Sizes are drawn as hi - U[0, hi) so they land in (0, hi].
    t.target.mu_x = uniform(rng, -ranges.target_mu, ranges.target_mu);
    t.target.sigma_x = ranges.target_sigma_max - uniform(rng, 0.0, ranges.target_sigma_max);
    t.target.mu_y = uniform(rng, -ranges.target_mu, ranges.target_mu);
    t.target.sigma_y = ranges.target_sigma_max - uniform(rng, 0.0, ranges.target_sigma_max);
    const double m = ranges.misalignment;
    auto& mis = t.misalignments;
    for (double* v : {&mis.q1_dx, &mis.q1_dy, &mis.q2_dx, &mis.q2_dy, &mis.q3_dx, &mis.q3_dy,
                      &mis.screen_dx, &mis.screen_dy}) {
      *v = uniform(rng, -m, m);
    }
    t.incoming = sample_incoming(ranges, rng);
    t.drift_incoming = sample_incoming(ranges, rng);
    trials.push_back(t);
  }
  return trials;
}

namespace {

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2) {
    throw ConfigError(std::string("trial ranges: '") + key + "' must be [lo, hi]");
  }
  return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>()};
}

}  // namespace

nlohmann::json ranges_to_json(const TrialRanges& r) {
  return {{"target_mu", r.target_mu},
          {"target_sigma_max", r.target_sigma_max},
          {"misalignment", r.misalignment},
          {"energy", range_json(r.energy)},
          {"mu", range_json(r.mu)},
          {"mu_p", range_json(r.mu_p)},
          {"sigma", range_json(r.sigma)},
          {"sigma_p", range_json(r.sigma_p)}};
}

TrialRanges ranges_from_json(const nlohmann::json& r) {
  if (!r.is_object()) throw ConfigError("trial ranges must be a JSON object");
  json_io::reject_unknown_keys(r, {"target_mu", "target_sigma_max", "misalignment", "energy", "mu",
                                   "mu_p", "sigma", "sigma_p"},
                               "trial ranges");
  TrialRanges out;
  try {
    out.target_mu = r.value("target_mu", out.target_mu);
    out.target_sigma_max = r.value("target_sigma_max", out.target_sigma_max);
    out.misalignment = r.value("misalignment", out.misalignment);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trial ranges: ") + e.what());
  }
  if (r.contains("energy")) out.energy = range_from(r, "energy");
  if (r.contains("mu")) out.mu = range_from(r, "mu");
  if (r.contains("mu_p")) out.mu_p = range_from(r, "mu_p");
  if (r.contains("sigma")) out.sigma = range_from(r, "sigma");
  if (r.contains("sigma_p")) out.sigma_p = range_from(r, "sigma_p");
  out.validate();
  return out;
}

std::string format_trial_set(const TrialSet& set) {
  const nlohmann::json ranges = ranges_to_json(set.ranges);
  nlohmann::json trials = nlohmann::json::array();
  for (const Trial& t : set.trials) {
    trials.push_back({{"id", t.id},
                      {"seed", t.seed},
                      {"target", json_io::to_json(t.target)},
                      {"misalignments", json_io::to_json(t.misalignments)},
                      {"incoming", json_io::to_json(t.incoming)},
                      {"drift_incoming", json_io::to_json(t.drift_incoming)}});
  }
  const nlohmann::json doc = {{"format", "beamtune-trials"},
                              {"version", 1},
                              {"seed", set.seed},
                              {"count", set.trials.size()},
                              {"ranges", ranges},
                              {"trials", trials}};
  return doc.dump(1) + "\n";
}

void save_trial_set(const TrialSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trial file: " + path.string());
  out << format_trial_set(set);
}

TrialSet parse_trial_set(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trial file is not valid JSON: ") + e.what());
  }
  json_io::reject_unknown_keys(doc, {"format", "version", "seed", "count", "ranges", "trials"},
                               "trial file");
  if (doc.value("format", "") != "beamtune-trials" || doc.value("version", 0) != 1) {
    throw ConfigError("trial file: unsupported format or version");
  }
  try {
    TrialSet set;
    set.seed = doc.at("seed").get<std::uint64_t>();
    set.ranges = ranges_from_json(doc.at("ranges"));
    for (const auto& j : doc.at("trials")) {
      json_io::reject_unknown_keys(
          j, {"id", "seed", "target", "misalignments", "incoming", "drift_incoming"}, "trial");
      Trial t;
      t.id = j.at("id").get<int>();
      t.seed = j.at("seed").get<std::uint64_t>();
      t.target = json_io::beam_from_json(j.at("target"));
      t.misalignments = json_io::misalignments_from_json(j.at("misalignments"));
      t.incoming = json_io::incoming_from_json(j.at("incoming"));
      t.drift_incoming = json_io::incoming_from_json(j.at("drift_incoming"));
      t.validate();
      try {
        t.misalignments.validate(set.ranges.misalignment);
      } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("trial misalignments: ") + e.what());
      }
      set.trials.push_back(t);
    }
    if (set.trials.size() != doc.at("count").get<std::size_t>()) {
      throw ConfigError("trial file: count does not match number of trials");
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trial file: ") + e.what());
  }
}

TrialSet load_trial_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trial file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trial_set(buf.str());
}

// ---- objective --------------------------------------------------------------

double weighted_mae(const BeamParameters& b, const BeamParameters& target,
                    const std::array<double, 4>& weights) {
  const auto x = b.to_array();
  const auto y = target.to_array();
  double sum = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sum += weights[i] * std::abs(x[i] - y[i]);
    wsum += weights[i];
  }
  return sum / wsum;
}

double mae_um(const BeamParameters& b, const BeamParameters& target) {
  return 1e6 * weighted_mae(b, target, {1.0, 1.0, 1.0, 1.0});
}

ObjectiveValue bo_objective(const BeamParameters& b, const BeamParameters& target, bool on_screen) {
  double mae = weighted_mae(b, target, {1.0, 1.0, 1.0, 1.0});
  ObjectiveValue out;
  if (mae < kMaeFloor) {
    mae = kMaeFloor;
    out.floor_applied = true;
  }
  out.value = -std::log(mae) + (on_screen ? kOnScreenReward : -kOnScreenReward);
  return out;
}

double rl_reward(double prev_log_mae, double next_log_mae) {
  const double raw = prev_log_mae - next_log_mae;
  return raw > 0.0 ? raw : 2.0 * raw;
}

// ---- scenarios ---------------------------------------------------------------

void ScenarioConfig::validate() const {
  if (drift != DriftMode::None && failure != FailureMode::None) {
    throw ConfigError("scenario '" + name + "': drift and magnet failure cannot be combined");
  }
  if (drift_step < 1) throw ConfigError("drift_step must be >= 1");
  if (drift_duration < 1) throw ConfigError("drift_duration must be >= 1");
  if (failure_step < 1) throw ConfigError("failure_step must be >= 1");
  if (noise_rms && !(*noise_rms >= 0.0)) throw ConfigError("noise_rms must be >= 0");
  double wsum = 0.0;
  for (double w : reward_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("reward weights must be >= 0");
    wsum += w;
  }
  if (!(wsum > 0.0)) throw ConfigError("reward weights must not all be zero");
}

std::vector<std::string> scenario_names() {
  return {"sim-infinite",   "sim-finite",     "sim-finite-aligned", "drift-instant",
          "drift-continuous", "failure-before", "failure-during"};
}

ScenarioConfig ScenarioConfig::named(const std::string& name) {
  ScenarioConfig s;
  s.name = name;
  if (name == "sim-infinite") {
  } else if (name == "sim-finite") {
    s.screen_mode = optics::ScreenMode::Finite;
  } else if (name == "sim-finite-aligned") {
    s.screen_mode = optics::ScreenMode::Finite;
    s.aligned = true;
  } else if (name == "drift-instant") {
    s.drift = DriftMode::Instant;
  } else if (name == "drift-continuous") {
    s.drift = DriftMode::Continuous;
  } else if (name == "failure-before") {
    s.failure = FailureMode::Before;
  } else if (name == "failure-during") {
    s.failure = FailureMode::During;
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return s;
}

// ---- environment -------------------------------------------------------------

std::array<double, 13> Observation::to_array() const {
  const auto b = beam.to_array();
  const auto u = settings.to_array();
  const auto t = target.to_array();
  std::array<double, 13> out{};
  std::copy(b.begin(), b.end(), out.begin());
  std::copy(u.begin(), u.end(), out.begin() + 4);
  std::copy(t.begin(), t.end(), out.begin() + 9);
  return out;
}

MagnetSettings clamp_to_operational(const MagnetSettings& u, bool* clamped) {
  auto a = u.to_array();
  bool any = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double lim = kOperationalHalfRange[i];
    double v = a[i];
    if (!std::isfinite(v)) v = 0.0;
    const double c = std::clamp(v, -lim, lim);
    any = any || c != a[i];
    a[i] = c;
  }
  if (clamped) *clamped = any;
  return MagnetSettings::from_array(a);
}

Environment::Environment(optics::Lattice lattice) : lattice_(std::move(lattice)) {
  lattice_.validate();
}

IncomingBeam Environment::incoming_at(int step) const {
  switch (scenario_.drift) {
    case DriftMode::None:
      return base_incoming_;
    case DriftMode::Instant:
      return step >= scenario_.drift_step ? trial_.drift_incoming : base_incoming_;
    case DriftMode::Continuous: {
      const double t =
          std::clamp(static_cast<double>(step) / scenario_.drift_duration, 0.0, 1.0);
      const IncomingBeam& a = base_incoming_;
      const IncomingBeam& b = trial_.drift_incoming;
      IncomingBeam out;
      out.energy = lerp(a.energy, b.energy, t);
      out.mu_x = lerp(a.mu_x, b.mu_x, t);
      out.mu_xp = lerp(a.mu_xp, b.mu_xp, t);
      out.mu_y = lerp(a.mu_y, b.mu_y, t);
      out.mu_yp = lerp(a.mu_yp, b.mu_yp, t);
      out.sigma_x = lerp(a.sigma_x, b.sigma_x, t);
      out.sigma_xp = lerp(a.sigma_xp, b.sigma_xp, t);
      out.sigma_y = lerp(a.sigma_y, b.sigma_y, t);
      out.sigma_yp = lerp(a.sigma_yp, b.sigma_yp, t);
      return out;
    }
  }
  return base_incoming_;
}

bool Environment::q3_failed_at(int step) const {
  switch (scenario_.failure) {
    case FailureMode::None: return false;
    case FailureMode::Before: return true;
    case FailureMode::During: return step >= scenario_.failure_step;
  }
  return false;
}

StepRecord Environment::evaluate(int step_index) {
  const optics::BeamMoments moments =
      optics::track(incoming_at(step_index), settings_, trial_.misalignments, lattice_);
  const optics::Measurement m =
      optics::measure_screen(moments, lattice_.screen(), scenario_.screen_mode,
                             scenario_.noise_rms, &noise_rng_);
  StepRecord s;
  s.step = step_index;
  s.settings = settings_;
  s.measured = m.beam;
  s.truth = optics::BeamParameters::from_moments(moments);
  s.mae_um = mae_um(m.beam, trial_.target);
  s.on_screen = m.on_screen;
  const ObjectiveValue obj = bo_objective(m.beam, trial_.target, m.on_screen);
  if (obj.floor_applied) record_.add_flag("objective-mae-floor");
  s.objective = obj.value;
  const double log_mae = std::log(
      std::max(weighted_mae(m.beam, trial_.target, scenario_.reward_weights), kMaeFloor));
  s.reward = step_index == 0 ? 0.0 : rl_reward(last_log_mae_, log_mae);
  last_log_mae_ = log_mae;
  observation_ = Observation{m.beam, settings_, trial_.target};
  return s;
}

Observation Environment::reset(const Trial& trial, const ScenarioConfig& scenario) {
  trial.validate();
  scenario.validate();
  trial_ = trial;
  scenario_ = scenario;
  base_incoming_ = trial.incoming;
  if (scenario.aligned) {
    const auto& m = trial.misalignments;
    base_incoming_.mu_x = (m.q1_dx + m.q2_dx + m.q3_dx) / 3.0;
    base_incoming_.mu_y = (m.q1_dy + m.q2_dy + m.q3_dy) / 3.0;
    base_incoming_.mu_xp = 0.0;
    base_incoming_.mu_yp = 0.0;
  }
  noise_rng_.seed(derive_seed({trial.seed, 0x6e6f697365ULL}));
  step_ = 0;
  settings_ = kFdfSettings;
  if (q3_failed_at(0)) settings_.k_q3 = 0.0;
  record_ = RunRecord{};
  record_.trial_id = trial.id;
  record_.scenario = scenario.name;
  record_.target = trial.target;
  record_.initial = evaluate(0);
  reset_done_ = true;
  return observation_;
}

StepResult Environment::step(const ActuatorVector& action, ActionMode mode,
                             std::optional<double> latency_s) {
  if (!reset_done_) throw ConfigError("step() called before reset()");
  bool clamped = false;
  ActuatorVector requested = action;
  if (mode == ActionMode::Delta) {
    const auto current = settings_.to_array();
    for (std::size_t i = 0; i < requested.size(); ++i) {
      double d = std::isfinite(requested[i]) ? requested[i] : 0.0;
      const double c = std::clamp(d, -kDeltaScale[i], kDeltaScale[i]);
      clamped = clamped || c != action[i];
      requested[i] = current[i] + c;
    }
  }
  bool range_clamped = false;
  MagnetSettings next = clamp_to_operational(MagnetSettings::from_array(requested), &range_clamped);
  clamped = clamped || range_clamped;
  ++step_;
  if (q3_failed_at(step_)) next.k_q3 = 0.0;
  settings_ = next;

  StepRecord s = evaluate(step_);
  s.clamped = clamped;
  s.latency_s = latency_s;
  record_.steps.push_back(s);

  StepResult r;
  r.observation = observation_;
  r.objective = s.objective;
  r.reward = s.reward;
  r.on_screen = s.on_screen;
  r.clamped = clamped;
  r.done = max_steps_ > 0 && step_ >= max_steps_;
  return r;
}

}  // namespace beamtune::env
