#include "beamtune/environment.hpp"
#include "beamtune/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace beamtune;
using namespace beamtune::env;

namespace {

Trial sample_trial(int i = 0) { return generate_trials(i + 1, 99, {})[static_cast<std::size_t>(i)]; }

}  // namespace

TEST_CASE("mae examples") {
  const BeamParameters zero{};
  CHECK(mae_um(zero, zero) == 0.0);
  CHECK(mae_um({1e-3, 1e-3, 1e-3, 1e-3}, zero) == doctest::Approx(1000.0));
  CHECK(mae_um({2e-3, 0, 0, 0}, zero) == doctest::Approx(500.0));
}

TEST_CASE("bo objective examples") {
  const BeamParameters target{};
  const double e1 = std::exp(-1.0);
  const BeamParameters b{e1, e1, e1, e1};
  CHECK(bo_objective(b, target, true).value == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(bo_objective(b, target, false).value == doctest::Approx(-9.0).epsilon(1e-12));
  const BeamParameters b45{45e-6, 45e-6, 45e-6, 45e-6};
  CHECK(bo_objective(b45, target, true).value == doctest::Approx(20.008848068193956).epsilon(1e-12));
  const ObjectiveValue exact = bo_objective(target, target, true);
  CHECK(exact.floor_applied);
  CHECK(exact.value == doctest::Approx(-std::log(1e-12) + 10.0));
  // on/off-screen gap is exactly 20 and the objective falls with MAE
  CHECK(bo_objective(b45, target, true).value - bo_objective(b45, target, false).value == 20.0);
  CHECK(bo_objective({1e-4, 0, 0, 0}, target, true).value > bo_objective({2e-4, 0, 0, 0}, target, true).value);
  // on-screen outranks off-screen whenever the MAE ratio is below e^20
  CHECK(bo_objective({4.0, 0, 0, 0}, target, true).value > bo_objective({8.4e-9, 0, 0, 0}, target, false).value);
  CHECK(bo_objective({1.0, 0, 0, 0}, target, true).value > bo_objective({2.1e-9, 0, 0, 0}, target, false).value);
  CHECK(bo_objective({1.0, 0, 0, 0}, target, true).value < bo_objective({1e-9, 0, 0, 0}, target, false).value);
}

TEST_CASE("rl reward examples") {
  CHECK(rl_reward(3.0, 2.0) == 1.0);
  CHECK(rl_reward(2.0, 3.0) == -2.0);
  CHECK(rl_reward(2.5, 2.5) == 0.0);
}

TEST_CASE("weighted mae with unit weights is the plain mae") {
  const BeamParameters a{1e-3, 2e-4, -3e-4, 5e-4}, t{0, 1e-4, 0, 1e-4};
  CHECK(weighted_mae(a, t, {1, 1, 1, 1}) * 1e6 == doctest::Approx(mae_um(a, t)));
  CHECK(weighted_mae(a, t, {1, 0, 0, 0}) == doctest::Approx(1e-3));
}

TEST_CASE("reset uses the FDF setting") {
  Environment e(optics::Lattice::ares_ea());
  const Observation o = e.reset(sample_trial(), ScenarioConfig::named("sim-infinite"));
  CHECK(o.settings.to_array() == ActuatorVector{10.0, -10.0, 0.0, 10.0, 0.0});
  CHECK(e.steps_taken() == 0);
  const auto flat = o.to_array();
  CHECK(flat[4] == 10.0);
  CHECK(flat[9] == o.target.mu_x);
}

TEST_CASE("failure-before pins k_Q3 at zero for the whole episode") {
  Environment e(optics::Lattice::ares_ea());
  const Observation o = e.reset(sample_trial(), ScenarioConfig::named("failure-before"));
  CHECK(o.settings.k_q3 == 0.0);
  for (int i = 0; i < 5; ++i) {
    const StepResult r = e.step({5, -5, 0, 25, 0}, ActionMode::Direct);
    CHECK(r.observation.settings.k_q3 == 0.0);
  }
}

TEST_CASE("failure-during pins k_Q3 from step 40 on") {
  Environment e(optics::Lattice::ares_ea());
  e.reset(sample_trial(), ScenarioConfig::named("failure-during"));
  for (int i = 1; i <= 60; ++i) {
    const StepResult r = e.step({5, -5, 0, 25, 0}, ActionMode::Direct);
    if (i < 40) {
      CHECK(r.observation.settings.k_q3 == 25.0);
    } else {
      CHECK(r.observation.settings.k_q3 == 0.0);
    }
  }
}

TEST_CASE("aligned scenario centers the beam on the mean quadrupole offset") {
  Trial t = sample_trial();
  Environment e(optics::Lattice::ares_ea());
  e.reset(t, ScenarioConfig::named("sim-finite-aligned"));
  const IncomingBeam in = e.incoming_at(0);
  const auto& m = t.misalignments;
  CHECK(in.mu_x == doctest::Approx((m.q1_dx + m.q2_dx + m.q3_dx) / 3.0));
  CHECK(in.mu_y == doctest::Approx((m.q1_dy + m.q2_dy + m.q3_dy) / 3.0));
  CHECK(in.mu_xp == 0.0);
  CHECK(in.mu_yp == 0.0);

  // Induced centroid motion under a quadrupole sweep shrinks after alignment.
  auto sweep_motion = [&](const IncomingBeam& beam) {
    double lo = 1e9, hi = -1e9;
    for (double k = 0.0; k <= 30.0; k += 5.0) {
      const double mu =
          optics::track(beam, {k, -k, 0.0, k, 0.0}, m, optics::Lattice::ares_ea()).mu_x();
      lo = std::min(lo, mu);
      hi = std::max(hi, mu);
    }
    return hi - lo;
  };
  double aligned = 0.0, unaligned = 0.0;
  for (int i = 0; i < 20; ++i) {
    Trial ti = sample_trial(i);
    Environment ei(optics::Lattice::ares_ea());
    ei.reset(ti, ScenarioConfig::named("sim-finite-aligned"));
    aligned += sweep_motion(ei.incoming_at(0));
    unaligned += sweep_motion(ti.incoming);
  }
  CHECK(aligned < unaligned);
}

TEST_CASE("continuous drift is halfway at step 40") {
  Trial t = sample_trial();
  Environment e(optics::Lattice::ares_ea());
  e.reset(t, ScenarioConfig::named("drift-continuous"));
  CHECK(e.incoming_at(0).mu_x == t.incoming.mu_x);
  CHECK(e.incoming_at(40).mu_x == doctest::Approx(0.5 * (t.incoming.mu_x + t.drift_incoming.mu_x)));
  CHECK(e.incoming_at(80).mu_x == doctest::Approx(t.drift_incoming.mu_x));
  CHECK(e.incoming_at(200).mu_x == doctest::Approx(t.drift_incoming.mu_x));
}

TEST_CASE("instant drift switches beams at step 40") {
  Trial t = sample_trial();
  Environment e(optics::Lattice::ares_ea());
  e.reset(t, ScenarioConfig::named("drift-instant"));
  CHECK(e.incoming_at(39).mu_x == t.incoming.mu_x);
  CHECK(e.incoming_at(40).mu_x == t.drift_incoming.mu_x);
}

TEST_CASE("drift combined with failure is a configuration error") {
  ScenarioConfig s = ScenarioConfig::named("drift-instant");
  s.failure = FailureMode::During;
  Environment e(optics::Lattice::ares_ea());
  CHECK_THROWS_AS(e.reset(sample_trial(), s), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::named("no-such-scenario"), ConfigError);
}

TEST_CASE("zero delta action is a no-op with zero reward") {
  Environment e(optics::Lattice::ares_ea());
  const Observation o = e.reset(sample_trial(), ScenarioConfig::named("sim-infinite"));
  const StepResult r = e.step({0, 0, 0, 0, 0}, ActionMode::Delta);
  CHECK(r.observation.beam == o.beam);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.clamped);
}

TEST_CASE("direct action back to the reset settings reproduces the reset beam") {
  Environment e(optics::Lattice::ares_ea());
  const Observation o = e.reset(sample_trial(), ScenarioConfig::named("sim-finite"));
  e.step({20, -3, 1e-3, 2, -1e-3}, ActionMode::Direct);
  const StepResult r = e.step(kFdfSettings.to_array(), ActionMode::Direct);
  CHECK(r.observation.beam == o.beam);
}

TEST_CASE("out-of-range actions are clamped, never rejected") {
  Environment e(optics::Lattice::ares_ea());
  e.reset(sample_trial(), ScenarioConfig::named("sim-infinite"));
  StepResult r = e.step({100, -100, 1.0, 31, -5e-3}, ActionMode::Direct);
  CHECK(r.clamped);
  CHECK(r.observation.settings.to_array() == ActuatorVector{30, -30, 2e-3, 30, -2e-3});
  r = e.step({10, 10, 1, 10, 1}, ActionMode::Delta);
  CHECK(r.clamped);
  CHECK(r.observation.settings.to_array() == ActuatorVector{30, -27, 2e-3, 30, -1.8e-3});
  CHECK(e.record().steps.back().clamped);
  r = e.step({std::nan(""), 0, 0, 0, 0}, ActionMode::Direct);
  CHECK(r.observation.settings.within_physical_limits());
}

TEST_CASE("record stores every step with recomputable mae") {
  Environment e(optics::Lattice::ares_ea());
  e.reset(sample_trial(), ScenarioConfig::named("sim-finite"));
  for (int i = 0; i < 10; ++i) {
    const double d = i;
    e.step({3.0 * d, -2.0 * d, 1e-4 * d, d, -1e-4 * d}, ActionMode::Direct);
  }
  const RunRecord& r = e.record();
  CHECK(r.steps.size() == 10);
  for (const StepRecord& s : r.steps) {
    CHECK(std::abs(mae_um(s.measured, r.target) - s.mae_um) < 1e-9);
    CHECK(s.objective == doctest::Approx(bo_objective(s.measured, r.target, s.on_screen).value));
  }
}

TEST_CASE("step before reset is an error") {
  Environment e(optics::Lattice::ares_ea());
  CHECK_THROWS_AS(e.step({0, 0, 0, 0, 0}, ActionMode::Direct), ConfigError);
}

TEST_CASE("trial generation is seeded and respects the ranges") {
  const auto a = generate_trials(300, 42, {});
  const auto b = generate_trials(300, 42, {});
  TrialSet sa{42, {}, a}, sb{42, {}, b};
  CHECK(format_trial_set(sa) == format_trial_set(sb));
  for (const Trial& t : a) {
    CHECK(std::abs(t.target.mu_x) <= 2e-3);
    CHECK(std::abs(t.target.mu_y) <= 2e-3);
    CHECK(t.target.sigma_x > 0.0);
    CHECK(t.target.sigma_x <= 2e-3);
    CHECK(t.target.sigma_y > 0.0);
    CHECK(t.target.sigma_y <= 2e-3);
    CHECK_NOTHROW(t.misalignments.validate(4e-4));
  }
  CHECK(format_trial_set(TrialSet{42, {}, generate_trials(5, 43, {})}) !=
        format_trial_set(TrialSet{42, {}, generate_trials(5, 42, {})}));
  CHECK_THROWS_AS(generate_trials(0, 1, {}), ConfigError);
  TrialRanges bad;
  bad.energy = {2e8, 1e8};
  CHECK_THROWS_AS(generate_trials(3, 1, bad), ConfigError);
}

TEST_CASE("target mu_x mean is zero within three standard errors") {
  const int n = 100000;
  const auto trials = generate_trials(n, 5, {});
  double sum = 0.0;
  for (const Trial& t : trials) sum += t.target.mu_x;
  const double mean = sum / n;
  const double sd = 2e-3 / std::sqrt(3.0);  // uniform on [-2, 2] mm
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(n));
}

TEST_CASE("trial file round-trip") {
  TrialSet set{7, {}, generate_trials(4, 7, {})};
  const std::string text = format_trial_set(set);
  const TrialSet back = parse_trial_set(text);
  CHECK(format_trial_set(back) == text);
  const auto path = std::filesystem::temp_directory_path() / "beamtune_trials_test.json";
  save_trial_set(set, path);
  CHECK(format_trial_set(load_trial_set(path)) == text);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_trial_set("{"), ConfigError);
  CHECK_THROWS_AS(parse_trial_set(R"({"format":"other","version":1})"), ConfigError);
  std::string extra = text;
  extra.insert(extra.find('{') + 1, "\"bogus\": 1,");
  CHECK_THROWS_AS(parse_trial_set(extra), ConfigError);
}

TEST_CASE("ranges json keeps defaults for missing keys") {
  const TrialRanges r = ranges_from_json(nlohmann::json{{"misalignment", 1e-4}});
  CHECK(r.misalignment == 1e-4);
  CHECK(r.target_mu == 2e-3);
  CHECK_THROWS_AS(ranges_from_json(nlohmann::json{{"colour", 1}}), ConfigError);
}

TEST_CASE("observation never carries hidden state") {
  // 13 values: measured beam, settings, target; nothing else.
  CHECK(std::tuple_size_v<decltype(Observation{}.to_array())> == 13);
}
