#include "beamtune/bo.hpp"

#include "beamtune/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace beamtune::bo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd normalized_rows(const std::vector<ActuatorVector>& points) {
  const gp::InputNormalizer norm = actuator_normalizer();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), 5);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto z = norm.normalize(points[i]);
    for (int d = 0; d < 5; ++d) x(static_cast<Eigen::Index>(i), d) = z[static_cast<std::size_t>(d)];
  }
  return x;
}

ActuatorVector sample_in(const Box& box, Rng& rng) {
  ActuatorVector u{};
  for (std::size_t d = 0; d < u.size(); ++d) {
    u[d] = box.lo[d] == box.hi[d] ? box.lo[d] : uniform(rng, box.lo[d], box.hi[d]);
  }
  return u;
}

}  // namespace

void BOConfig::validate() const {
  if (n_init < 1) throw ConfigError("BO n_init must be >= 1");
  if (budget < n_init) throw ConfigError("BO budget must be >= n_init");
  if (!(trust_fraction > 0.0 && trust_fraction <= 1.0)) {
    throw ConfigError("BO trust_fraction must be in (0, 1]");
  }
  if (candidates < 1) throw ConfigError("BO needs at least one acquisition candidate");
  if (fit_restarts < 1 || fit_max_evaluations < 1) throw ConfigError("BO fit settings must be positive");
}

bool Box::contains(const ActuatorVector& u, double tol) const {
  for (std::size_t d = 0; d < u.size(); ++d) {
    if (u[d] < lo[d] - tol || u[d] > hi[d] + tol) return false;
  }
  return true;
}

Box feasible_box(bool polarity) {
  Box b;
  for (std::size_t d = 0; d < 5; ++d) {
    b.lo[d] = -env::kOperationalHalfRange[d];
    b.hi[d] = env::kOperationalHalfRange[d];
  }
  if (polarity) {
    b.lo[0] = 0.0;  // k_Q1 focusing
    b.hi[1] = 0.0;  // k_Q2 defocusing
    b.lo[3] = 0.0;  // k_Q3 focusing
  }
  return b;
}

Box trust_box(const ActuatorVector& center, const BOConfig& config) {
  Box b = feasible_box(config.polarity_constraints);
  for (std::size_t d = 0; d < 5; ++d) {
    const double half = config.trust_fraction * 2.0 * env::kOperationalHalfRange[d];
    const double c = std::clamp(center[d], b.lo[d], b.hi[d]);
    b.lo[d] = std::max(b.lo[d], c - half);
    b.hi[d] = std::min(b.hi[d], c + half);
    if (b.lo[d] > b.hi[d]) throw std::logic_error("empty trust region");
  }
  return b;
}

gp::InputNormalizer actuator_normalizer() {
  gp::InputNormalizer n;
  for (double h : env::kOperationalHalfRange) {
    n.lo.push_back(-h);
    n.hi.push_back(h);
  }
  return n;
}

double expected_improvement(double mean, double stddev, double best) {
  if (stddev < 0.0) throw InvalidParameter("EI needs a non-negative standard deviation");
  const double delta = mean - best;
  if (stddev == 0.0) return std::max(delta, 0.0);
  const double z = delta / stddev;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, delta * cdf + stddev * pdf);
}

void BOState::add(const ActuatorVector& u, double objective) {
  inputs.push_back(u);
  objectives.push_back(objective);
}

std::size_t BOState::best_index() const {
  if (objectives.empty()) throw std::logic_error("BO state has no observations");
  // First maximum wins.
  std::size_t best = 0;
  for (std::size_t i = 1; i < objectives.size(); ++i) {
    if (objectives[i] > objectives[best]) best = i;
  }
  return best;
}

void fit_model(BOState& state, const BOConfig& config) {
  Eigen::MatrixXd x = normalized_rows(state.inputs);
  gp::FitOptions opt;
  opt.restarts = config.fit_restarts;
  opt.max_evaluations = config.fit_max_evaluations;
  opt.seed = derive_seed({config.seed, 0x6669ULL, static_cast<std::uint64_t>(state.step)});
  opt.warm_start = state.last_hyperparams;
  const gp::FitResult fit = gp::fit_hyperparams(x, state.objectives, opt);
  state.last_hyperparams = fit.hyperparams;
  state.model = gp::Model::condition(std::move(x), state.objectives, fit.hyperparams);
}

std::vector<double> acquisition(const BOState& state, const std::vector<ActuatorVector>& points) {
  if (!state.model) throw std::logic_error("acquisition needs a fitted model");
  const gp::Model& m = *state.model;
  const double best = m.standardizer().standardize(state.best_objective());
  const gp::Prediction p = m.posterior_standardized(normalized_rows(points));
  std::vector<double> ei(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    ei[i] = expected_improvement(p.mean[i], std::sqrt(p.variance[i]), best);
  }
  return ei;
}

optics::MagnetSettings propose_next(const BOState& state, const BOConfig& config, Rng& rng) {
  if (!state.model) throw std::logic_error("propose_next needs a fitted model");
  const Box box = trust_box(state.inputs.back(), config);

  std::vector<ActuatorVector> cand;
  cand.reserve(static_cast<std::size_t>(config.candidates) + 1);
  ActuatorVector center = state.inputs.back();
  for (std::size_t d = 0; d < 5; ++d) center[d] = std::clamp(center[d], box.lo[d], box.hi[d]);
  cand.push_back(center);
  for (int i = 0; i < config.candidates; ++i) cand.push_back(sample_in(box, rng));
  const std::vector<double> ei = acquisition(state, cand);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < ei.size(); ++i) {
    if (ei[i] > ei[arg]) arg = i;
  }
  ActuatorVector best = cand[arg];
  double best_ei = ei[arg];

  // Coordinate refinement: probe +-step along each axis, halve the step
  // every round. Probes for one round are scored in a single batch.
  ActuatorVector step{};
  for (std::size_t d = 0; d < 5; ++d) step[d] = 0.25 * (box.hi[d] - box.lo[d]);
  for (int round = 0; round < config.refine_rounds; ++round) {
    std::vector<ActuatorVector> probes;
    for (std::size_t d = 0; d < 5; ++d) {
      if (step[d] <= 0.0) continue;
      for (double sign : {-1.0, 1.0}) {
        ActuatorVector p = best;
        p[d] = std::clamp(p[d] + sign * step[d], box.lo[d], box.hi[d]);
        if (p != best) probes.push_back(p);
      }
    }
    if (!probes.empty()) {
      const std::vector<double> pe = acquisition(state, probes);
      for (std::size_t i = 0; i < probes.size(); ++i) {
        if (pe[i] > best_ei) {
          best_ei = pe[i];
          best = probes[i];
        }
      }
    }
    for (double& s : step) s *= 0.5;
  }
  return optics::MagnetSettings::from_array(best);
}

RunRecord run_bo(env::Environment& environment, const BOConfig& config) {
  config.validate();
  Rng rng(derive_seed({config.seed, 0x626fULL}));
  BOState state;
  state.add(environment.settings().to_array(), environment.record().initial.objective);

  const Box feasible = feasible_box(config.polarity_constraints);
  for (int i = 0; i < config.n_init; ++i) {
    const ActuatorVector u = sample_in(feasible, rng);
    environment.step(u, env::ActionMode::Direct);
    state.step = environment.steps_taken();
    state.add(environment.settings().to_array(), environment.record().steps.back().objective);
  }
  while (environment.steps_taken() < config.budget) {
    const auto t0 = Clock::now();
    state.step = environment.steps_taken();
    fit_model(state, config);
    const optics::MagnetSettings next = propose_next(state, config, rng);
    const double latency = seconds_since(t0);
    environment.step(next.to_array(), env::ActionMode::Direct, latency);
    state.add(environment.settings().to_array(), environment.record().steps.back().objective);
  }
  RunRecord record = environment.record();
  if (config.return_to_best) {
    environment.step(state.inputs[state.best_index()], env::ActionMode::Direct);
    record = environment.record();
    record.returned_to_best = true;
  }
  record.optimizer = "bo";
  record.budget = config.budget;
  return record;
}

}  // namespace beamtune::bo
