#include "beamtune/baselines.hpp"
#include "beamtune/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace beamtune;
using namespace beamtune::baselines;

namespace {

std::vector<env::Trial> trials(int n) { return env::generate_trials(n, 13, {}); }

env::Environment fresh(const env::Trial& t, const std::string& scenario = "sim-infinite") {
  env::Environment e(optics::Lattice::ares_ea());
  e.reset(t, env::ScenarioConfig::named(scenario));
  return e;
}

bool in_operational_range(const StepRecord& s) {
  const auto u = s.settings.to_array();
  for (std::size_t d = 0; d < u.size(); ++d) {
    if (std::abs(u[d]) > env::kOperationalHalfRange[d]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default simplex starts at FDF with small axis spreads") {
  const SimplexConfig c;
  CHECK_NOTHROW(c.validate());
  const auto v = c.initial_simplex();
  REQUIRE(v.size() == 6);
  const std::vector<double> start{1.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0};
  for (std::size_t d = 0; d < 5; ++d) CHECK(v[0][d] == doctest::Approx(start[d]).epsilon(1e-15));
  CHECK(c.spreads[0] == doctest::Approx(0.05 / 3.0));
  CHECK(c.spreads[2] == 0.00025);
  SimplexConfig bad = c;
  bad.spreads[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("nelder-mead stays in range and within budget") {
  for (const auto& t : trials(4)) {
    SimplexConfig c;
    c.budget = 60;
    c.spreads = {0.3, -0.3, 0.4, 0.3, -0.4};
    env::Environment e = fresh(t);
    const RunRecord r = run_nelder_mead(e, c);
    CHECK(r.steps.size() <= 60);
    CHECK_FALSE(r.returned_to_best);
    CHECK(r.optimizer == "simplex");
    for (const StepRecord& s : r.steps) {
      CHECK(in_operational_range(s));
    }
  }
}

TEST_CASE("nelder-mead improves on the start for a well-tuned simplex") {
  int improved = 0;
  const auto ts = trials(6);
  for (const auto& t : ts) {
    SimplexConfig c;
    c.spreads = {0.3, -0.3, 0.4, 0.3, -0.4};
    env::Environment e = fresh(t);
    const RunRecord r = run_nelder_mead(e, c);
    if (r.final_mae_um() < r.initial.mae_um) ++improved;
  }
  CHECK(improved == static_cast<int>(ts.size()));
}

TEST_CASE("simplex config file round trip") {
  SimplexConfig c;
  c.spreads = {0.1, -0.2, 0.3, -0.4, 0.5};
  c.budget = 99;
  c.seed = 4;
  c.tuned_mean_mae_um = 123.25;
  const auto path = std::filesystem::temp_directory_path() / "beamtune_simplex_rt.json";
  save_simplex_config(c, path);
  const SimplexConfig d = load_simplex_config(path);
  CHECK(d.spreads == c.spreads);
  CHECK(d.budget == 99);
  CHECK(d.seed == 4);
  CHECK(d.tuned_mean_mae_um == c.tuned_mean_mae_um);
  CHECK(d.coeffs.reflection == 1.0);
  CHECK(d.coeffs.expansion == 2.0);
  CHECK(d.coeffs.contraction == 0.5);
  CHECK(d.coeffs.shrink == 0.5);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_simplex_config(path), ConfigError);
}

TEST_CASE("simplex tuning") {
  const auto ts = trials(5);
  const auto scenario = env::ScenarioConfig::named("sim-infinite");
  const EnvironmentFactory make = [] { return env::Environment(optics::Lattice::ares_ea()); };
  SimplexConfig base;
  base.budget = 60;

  SUBCASE("a single candidate is returned as is") {
    const TuningResult r = tune_initial_simplex(make, 1, ts, scenario, 3, base);
    CHECK(r.best_index == 0);
    REQUIRE(r.candidate_mean_mae_um.size() == 1);
    CHECK(*r.best.tuned_mean_mae_um == r.candidate_mean_mae_um[0]);
  }
  SUBCASE("argmin, determinism and improvement over the default") {
    const TuningResult a = tune_initial_simplex(make, 12, ts, scenario, 8, base);
    const TuningResult b = tune_initial_simplex(make, 12, ts, scenario, 8, base);
    CHECK(a.best.spreads == b.best.spreads);
    CHECK(a.candidate_mean_mae_um == b.candidate_mean_mae_um);
    for (double m : a.candidate_mean_mae_um) CHECK(*a.best.tuned_mean_mae_um <= m);
    double untuned = 0.0;
    for (const auto& t : ts) {
      env::Environment e = fresh(t);
      untuned += run_nelder_mead(e, base).final_mae_um();
    }
    CHECK(*a.best.tuned_mean_mae_um < untuned / static_cast<double>(ts.size()));
  }
  CHECK_THROWS_AS(tune_initial_simplex(make, 1, {}, scenario, 3, base), ConfigError);
}

TEST_CASE("random search returns to the best setting seen") {
  for (const auto& t : trials(5)) {
    RandomSearchConfig c;
    c.budget = 40;
    c.seed = static_cast<std::uint64_t>(t.id);
    env::Environment e = fresh(t, "sim-finite");
    const RunRecord r = run_random_search(e, c);
    REQUIRE(r.steps.size() == 41);
    CHECK(r.returned_to_best);
    double best = r.initial.mae_um;
    for (int i = 0; i < 40; ++i) best = std::min(best, r.steps[static_cast<std::size_t>(i)].mae_um);
    CHECK(r.final_mae_um() == best);
    CHECK(r.final_mae_um() <= r.initial.mae_um);
    for (const StepRecord& s : r.steps) CHECK(in_operational_range(s));
    const auto trace = r.best_mae_trace_um();
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
  }
}

TEST_CASE("random search with one sample") {
  const auto t = trials(1)[0];
  RandomSearchConfig c;
  c.budget = 1;
  env::Environment e = fresh(t);
  const RunRecord r = run_random_search(e, c);
  REQUIRE(r.steps.size() == 2);
  CHECK(r.final_mae_um() == std::min(r.initial.mae_um, r.steps[0].mae_um));
}

TEST_CASE("random search samples each axis uniformly over its box") {
  RandomSearchConfig c;
  c.budget = 4000;
  c.seed = 17;
  env::Environment e = fresh(trials(1)[0]);
  e.set_max_steps(5000);
  const RunRecord r = run_random_search(e, c);
  for (std::size_t d = 0; d < 5; ++d) {
    double mean = 0.0;
    for (int i = 0; i < c.budget; ++i) {
      mean += r.steps[static_cast<std::size_t>(i)].settings.to_array()[d] / env::kOperationalHalfRange[d];
    }
    mean /= c.budget;
    // normalized samples are U(-1, 1): standard error 1/sqrt(3n)
    CHECK(std::abs(mean) < 4.0 / std::sqrt(3.0 * c.budget));
  }
}

TEST_CASE("random search box must lie within the operational range") {
  RandomSearchConfig c;
  c.hi[0] = 40.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.budget = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
