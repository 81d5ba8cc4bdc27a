#include "beamtune/bo.hpp"
#include "beamtune/errors.hpp"
#include "beamtune/metrics.hpp"
#include "beamtune/policy.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace beamtune;
using namespace beamtune::policy;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(BEAMTUNE_FIXTURE_DIR) / "policy_identity.json";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

env::Environment fresh(int i = 0) {
  env::Environment e(optics::Lattice::ares_ea());
  e.reset(env::generate_trials(i + 1, 5, {})[static_cast<std::size_t>(i)],
          env::ScenarioConfig::named("sim-infinite"));
  return e;
}

PolicyWeights random_weights(std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  PolicyWeights w = PolicyWeights::zeros();
  for (Layer& l : w.layers) {
    for (double& v : l.weights) v = g(rng);
    for (double& v : l.bias) v = g(rng);
  }
  for (double& m : w.observation_mean) m = 1e-4 * g(rng);
  for (double& s : w.observation_std) s = 1e-3 + std::abs(g(rng));
  return w;
}

}  // namespace

TEST_CASE("shipped fixture loads with the expected shapes") {
  const PolicyWeights w = load_policy(kFixture);
  REQUIRE(w.layers.size() == 3);
  CHECK(w.layers[0].in == 13);
  CHECK(w.layers[0].out == 64);
  CHECK(w.layers[1].in == 64);
  CHECK(w.layers[1].out == 64);
  CHECK(w.layers[2].in == 64);
  CHECK(w.layers[2].out == 5);
  CHECK(w.layers[2].activation == Activation::Tanh);
}

TEST_CASE("a 63-wide hidden layer is rejected naming layer 1") {
  auto j = nlohmann::json::parse(read_file(kFixture));
  j["layers"][0]["out"] = 63;
  j["layers"][0]["weights"].erase(63);
  j["layers"][0]["bias"].erase(63);
  try {
    parse_policy(j.dump());
    FAIL("expected a shape error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layer 1") != std::string::npos);
  }
}

TEST_CASE("malformed files are rejected") {
  CHECK_THROWS_AS(parse_policy("{"), ConfigError);
  CHECK_THROWS_AS(load_policy("/nonexistent/policy.json"), ConfigError);
  auto j = nlohmann::json::parse(read_file(kFixture));
  j["observation_std"][4] = 0.0;
  CHECK_THROWS_AS(parse_policy(j.dump()), ConfigError);
  j = nlohmann::json::parse(read_file(kFixture));
  j["layers"][2]["activation"] = "softmax";
  CHECK_THROWS_AS(parse_policy(j.dump()), ConfigError);
  j = nlohmann::json::parse(read_file(kFixture));
  j["layers"][1]["weights"][3].erase(0);
  CHECK_THROWS_AS(parse_policy(j.dump()), ConfigError);
  j = nlohmann::json::parse(read_file(kFixture));
  j["version"] = 2;
  CHECK_THROWS_AS(parse_policy(j.dump()), ConfigError);
}

TEST_CASE("save and load round trip bit-exact") {
  const PolicyWeights w = random_weights(3, 0.7);
  const auto path = std::filesystem::temp_directory_path() / "beamtune_policy_rt.json";
  save_policy(w, path);
  const PolicyWeights back = load_policy(path);
  CHECK(back == w);
  CHECK(format_policy(back) == format_policy(w));
  std::filesystem::remove(path);
}

TEST_CASE("zero network emits zero actions") {
  const PolicyWeights w = PolicyWeights::zeros();
  const PolicyAction a = infer(w, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13});
  for (double v : a) CHECK(v == 0.0);
}

TEST_CASE("single-path network matches a hand computation") {
  PolicyWeights w = PolicyWeights::zeros();
  w.observation_mean[2] = 0.5;
  w.observation_std[2] = 2.0;
  w.layers[0].weights[5 * 13 + 2] = 1.5;  // obs 2 -> hidden0 neuron 5
  w.layers[0].bias[5] = 0.25;
  w.layers[1].weights[7 * 64 + 5] = -0.8;  // hidden0 5 -> hidden1 7
  w.layers[1].bias[7] = 2.0;
  w.layers[2].weights[3 * 64 + 7] = 0.3;  // hidden1 7 -> action 3
  w.layers[2].bias[3] = -0.1;
  w.layers[2].bias[0] = 0.2;
  w.action_scale = {3.0, 3.0, 2e-4, 3.0, 2e-4};
  std::array<double, 13> obs{};
  obs[2] = 1.7;

  const double x = (1.7 - 0.5) / 2.0;   // 0.6
  const double h0 = 1.5 * x + 0.25;     // 1.15
  const double h1 = -0.8 * h0 + 2.0;    // 1.08
  const double out3 = std::tanh(0.3 * h1 - 0.1) * 3.0;
  const double out0 = std::tanh(0.2) * 3.0;

  const PolicyAction a = infer(w, obs);
  CHECK(std::abs(a[3] - out3) < 1e-12);
  CHECK(std::abs(a[0] - out0) < 1e-12);
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 0.0);
  CHECK(a[4] == 0.0);

  obs[2] = -10.0;  // hidden0 neuron 5 goes negative and is cut by the relu
  const PolicyAction b = infer(w, obs);
  CHECK(std::abs(b[3] - std::tanh(0.3 * 2.0 - 0.1) * 3.0) < 1e-12);
}

TEST_CASE("inference is pure") {
  const PolicyWeights w = random_weights(8, 1.0);
  const std::array<double, 13> obs{1e-4, 2e-4, 3e-4, 4e-4, 10, -10, 0, 10, 0, 0, 0, 1e-4, 1e-4};
  CHECK(infer(w, obs) == infer(w, obs));
}

TEST_CASE("zero policy keeps FDF settings for the whole episode") {
  env::Environment e = fresh();
  const RunRecord r = run_policy(e, PolicyWeights::zeros(), 50);
  REQUIRE(r.steps.size() == 50);
  CHECK_FALSE(r.returned_to_best);
  for (const StepRecord& s : r.steps) {
    CHECK(s.settings.to_array() == env::kFdfSettings.to_array());
    CHECK(s.latency_s.has_value());
  }
}

TEST_CASE("random policies respect the action bound and the operational range") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    env::Environment e = fresh(static_cast<int>(seed));
    const RunRecord r = run_policy(e, random_weights(seed, 2.0), 60);
    auto prev = r.initial.settings.to_array();
    for (const StepRecord& s : r.steps) {
      const auto u = s.settings.to_array();
      for (std::size_t d = 0; d < 5; ++d) {
        CHECK(std::abs(u[d]) <= env::kOperationalHalfRange[d]);
        CHECK(std::abs(u[d] - prev[d]) <= env::kDeltaScale[d] * (1.0 + 1e-12));
      }
      prev = u;
    }
  }
  env::Environment e = fresh();
  CHECK_THROWS_AS(run_policy(e, PolicyWeights::zeros(), 0), ConfigError);
}

TEST_CASE("policy latency does not grow with the step index") {
  std::vector<RunRecord> records;
  const PolicyWeights w = random_weights(4, 0.5);
  for (int t = 0; t < 10; ++t) {
    env::Environment e = fresh(t);
    records.push_back(run_policy(e, w, 150));
  }
  const auto report = metrics::timing_report(records);
  REQUIRE(report.size() == 1);
  CHECK(report[0].samples == 1500);
  CHECK(std::abs(report[0].slope_s_per_step) < 0.01 * report[0].mean_s);
}

TEST_CASE("trained weights beat BO when supplied") {
  const char* path = std::getenv("BEAMTUNE_POLICY_WEIGHTS");
  if (path == nullptr || *path == '\0') {
    MESSAGE("BEAMTUNE_POLICY_WEIGHTS not set; skipping the trained-policy comparison");
    return;
  }
  const PolicyWeights w = load_policy(path);
  std::vector<double> policy_final, bo_final;
  for (int t = 0; t < 10; ++t) {
    env::Environment a = fresh(t);
    policy_final.push_back(run_policy(a, w, 150).final_mae_um());
    env::Environment b = fresh(t);
    bo::BOConfig c;
    c.seed = static_cast<std::uint64_t>(t);
    bo_final.push_back(bo::run_bo(b, c).final_mae_um());
  }
  CHECK(metrics::summarize(policy_final).median < metrics::summarize(bo_final).median);
}
