#include "beamtune/baselines.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/gp.hpp"
#include "beamtune/optics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace beamtune::baselines {

namespace {

gp::InputNormalizer normalizer() {
  gp::InputNormalizer n;
  for (double h : env::kOperationalHalfRange) {
    n.lo.push_back(-h);
    n.hi.push_back(h);
  }
  return n;
}

std::vector<double> fdf_normalized() {
  return normalizer().normalize(env::kFdfSettings.to_array());
}

env::ActuatorVector to_actuators(std::span<const double> z) {
  const auto x = normalizer().denormalize(z);
  env::ActuatorVector u{};
  std::copy(x.begin(), x.end(), u.begin());
  return u;
}

}  // namespace

std::vector<double> SimplexConfig::default_spreads() {
  std::vector<double> s;
  for (double v : fdf_normalized()) s.push_back(v != 0.0 ? 0.05 * v : 0.00025);
  return s;
}

std::vector<nm::Point> SimplexConfig::initial_simplex() const {
  return nm::axis_simplex(fdf_normalized(), spreads);
}

void SimplexConfig::validate() const {
  if (spreads.size() != 5) throw ConfigError("simplex needs five spreads");
  for (double s : spreads) {
    if (!std::isfinite(s) || s == 0.0) throw ConfigError("simplex spreads must be finite and non-zero");
  }
  if (budget < 1) throw ConfigError("simplex budget must be positive");
  if (!nm::is_nondegenerate(initial_simplex())) throw ConfigError("initial simplex is degenerate");
}

void save_simplex_config(const SimplexConfig& c, const std::filesystem::path& path) {
  nlohmann::json j = {{"format", "beamtune-simplex"},
                      {"version", 1},
                      {"spreads", c.spreads},
                      {"coefficients",
                       {{"reflection", c.coeffs.reflection},
                        {"expansion", c.coeffs.expansion},
                        {"contraction", c.coeffs.contraction},
                        {"shrink", c.coeffs.shrink}}},
                      {"budget", c.budget},
                      {"x_tolerance", c.x_tolerance},
                      {"f_tolerance", c.f_tolerance},
                      {"seed", c.seed}};
  if (c.tuned_mean_mae_um) j["tuned_mean_mae_um"] = *c.tuned_mean_mae_um;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write simplex file: " + path.string());
  out << j.dump(1) << "\n";
}

SimplexConfig load_simplex_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open simplex file: " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "beamtune-simplex" || j.value("version", 0) != 1) {
      throw ConfigError("simplex file: unsupported format or version");
    }
    SimplexConfig c;
    c.spreads = j.at("spreads").get<std::vector<double>>();
    const auto& k = j.at("coefficients");
    c.coeffs = {k.at("reflection").get<double>(), k.at("expansion").get<double>(),
                k.at("contraction").get<double>(), k.at("shrink").get<double>()};
    c.budget = j.at("budget").get<int>();
    c.x_tolerance = j.at("x_tolerance").get<double>();
    c.f_tolerance = j.at("f_tolerance").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tuned_mean_mae_um")) c.tuned_mean_mae_um = j.at("tuned_mean_mae_um").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simplex file: ") + e.what());
  }
}

RunRecord run_nelder_mead(env::Environment& environment, const SimplexConfig& config) {
  config.validate();
  const std::vector<double> start = fdf_normalized();
  const double start_mae = environment.record().initial.mae_um;
  bool start_used = false;

  auto objective = [&](std::span<const double> z) -> double {
    if (!start_used && std::equal(z.begin(), z.end(), start.begin(), start.end())) {
      start_used = true;
      return start_mae;
    }
    environment.step(to_actuators(z), env::ActionMode::Direct);
    return environment.record().steps.back().mae_um;
  };

  nm::Options opt;
  opt.coeffs = config.coeffs;
  // The start vertex costs no machine step, so allow one extra evaluation.
  opt.max_evaluations = config.budget + 1;
  opt.x_tolerance = config.x_tolerance;
  opt.f_tolerance = config.f_tolerance;
  opt.jitter_seed = config.seed;
  const nm::Result res = nm::minimize(objective, config.initial_simplex(), opt);

  RunRecord record = environment.record();
  record.optimizer = "simplex";
  record.budget = config.budget;
  if (res.degenerate_restart) record.add_flag("simplex-degenerate-restart");
  if (res.converged) record.add_flag("simplex-converged");
  return record;
}

TuningResult tune_initial_simplex(const EnvironmentFactory& make_env, int n_candidates,
                                  const std::vector<env::Trial>& trials,
                                  const env::ScenarioConfig& scenario, std::uint64_t seed,
                                  const SimplexConfig& base) {
  if (trials.empty()) throw ConfigError("simplex tuning needs at least one trial");
  if (n_candidates < 1) throw ConfigError("simplex tuning needs at least one candidate");
  Rng rng(seed);
  TuningResult out;
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < n_candidates; ++c) {
    SimplexConfig cand = base;
    for (double& s : cand.spreads) {
      // Magnitude in [0.02, 1] of the normalized half-range, random sign.
      const double mag = uniform(rng, 0.02, 1.0);
      s = uniform(rng, 0.0, 1.0) < 0.5 ? -mag : mag;
    }
    double total = 0.0;
    for (const auto& trial : trials) {
      env::Environment e = make_env();
      e.reset(trial, scenario);
      total += run_nelder_mead(e, cand).final_mae_um();
    }
    const double mean = total / static_cast<double>(trials.size());
    out.candidate_mean_mae_um.push_back(mean);
    if (mean < best) {
      best = mean;
      out.best = cand;
      out.best.tuned_mean_mae_um = mean;
      out.best_index = static_cast<std::size_t>(c);
    }
  }
  return out;
}

void RandomSearchConfig::validate() const {
  if (budget < 1) throw ConfigError("random search budget must be positive");
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(lo[d] <= hi[d]) || lo[d] < -env::kOperationalHalfRange[d] ||
        hi[d] > env::kOperationalHalfRange[d]) {
      throw ConfigError("random search box must lie within the operational range");
    }
  }
}

RunRecord run_random_search(env::Environment& environment, const RandomSearchConfig& config) {
  config.validate();
  Rng rng(derive_seed({config.seed, 0x7273ULL}));
  // The reset reading competes with the samples.
  env::ActuatorVector best_u = environment.settings().to_array();
  double best_mae = environment.record().initial.mae_um;
  for (int i = 0; i < config.budget; ++i) {
    env::ActuatorVector u{};
    for (std::size_t d = 0; d < u.size(); ++d) u[d] = uniform(rng, config.lo[d], config.hi[d]);
    environment.step(u, env::ActionMode::Direct);
    const StepRecord& s = environment.record().steps.back();
    if (s.mae_um < best_mae) {
      best_mae = s.mae_um;
      best_u = s.settings.to_array();
    }
  }
  environment.step(best_u, env::ActionMode::Direct);
  RunRecord record = environment.record();
  record.optimizer = "random";
  record.budget = config.budget;
  record.returned_to_best = true;
  return record;
}

}  // namespace beamtune::baselines
