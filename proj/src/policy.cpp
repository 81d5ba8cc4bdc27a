#include "beamtune/policy.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/kernels.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace beamtune::policy {

namespace {

std::string layer_name(std::size_t i) { return "layer " + std::to_string(i); }

Activation parse_activation(const std::string& s, std::size_t layer) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError(layer_name(layer) + ": unknown activation '" + s + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

template <std::size_t N>
std::array<double, N> fixed_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != N) {
    throw ConfigError(std::string("policy: '") + key + "' must have " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j.at(key)[i].get<double>();
  return out;
}

}  // namespace

void PolicyWeights::validate() const {
  // Shape chain first, so a bad hidden width is reported where it breaks.
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weights.size() != l.in * l.out) {
      throw ConfigError(layer_name(i) + ": weights are not " + std::to_string(l.out) + "x" +
                        std::to_string(l.in));
    }
    if (l.bias.size() != l.out) throw ConfigError(layer_name(i) + ": bias length != " + std::to_string(l.out));
    if (i > 0 && l.in != layers[i - 1].out) {
      throw ConfigError("shape mismatch at " + layer_name(i) + ": expects " + std::to_string(l.in) +
                        " inputs but " + layer_name(i - 1) + " produces " +
                        std::to_string(layers[i - 1].out));
    }
    for (double w : l.weights) {
      if (!std::isfinite(w)) throw ConfigError(layer_name(i) + ": non-finite weight");
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) throw ConfigError(layer_name(i) + ": non-finite bias");
    }
  }
  if (layers.size() != 3) throw ConfigError("policy needs exactly 3 layers (2 hidden + output)");
  if (layers[0].in != kObservationSize) {
    throw ConfigError("shape mismatch at layer 0: expects 13 observation inputs");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (layers[i].out != kHiddenWidth) {
      throw ConfigError("shape mismatch at " + layer_name(i) + ": hidden width must be 64");
    }
  }
  if (layers[2].out != kActionSize) throw ConfigError("shape mismatch at layer 2: expects 5 outputs");
  for (double s : observation_std) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("policy: observation_std must be positive");
  }
  for (double m : observation_mean) {
    if (!std::isfinite(m)) throw ConfigError("policy: observation_mean must be finite");
  }
  for (double a : action_scale) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("policy: action_scale must be >= 0");
  }
}

PolicyWeights PolicyWeights::zeros() {
  PolicyWeights w;
  const std::size_t shapes[3][2] = {{kObservationSize, kHiddenWidth},
                                    {kHiddenWidth, kHiddenWidth},
                                    {kHiddenWidth, kActionSize}};
  for (std::size_t i = 0; i < 3; ++i) {
    Layer l;
    l.in = shapes[i][0];
    l.out = shapes[i][1];
    l.activation = i < 2 ? Activation::Relu : Activation::Tanh;
    l.weights.assign(l.in * l.out, 0.0);
    l.bias.assign(l.out, 0.0);
    w.layers.push_back(std::move(l));
  }
  w.observation_std.fill(1.0);
  w.action_scale = env::kDeltaScale;
  return w;
}

PolicyWeights parse_policy(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "beamtune-policy" || j.value("version", 0) != 1) {
      throw ConfigError("policy file: unsupported format or version");
    }
    PolicyWeights w;
    w.observation_mean = fixed_array<kObservationSize>(j, "observation_mean");
    w.observation_std = fixed_array<kObservationSize>(j, "observation_std");
    w.action_scale = fixed_array<kActionSize>(j, "action_scale");
    const auto& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& lj = layers[i];
      Layer l;
      l.in = lj.at("in").get<std::size_t>();
      l.out = lj.at("out").get<std::size_t>();
      l.activation = parse_activation(lj.at("activation").get<std::string>(), i);
      const auto& rows = lj.at("weights");
      if (rows.size() != l.out) {
        throw ConfigError(layer_name(i) + ": weights have " + std::to_string(rows.size()) +
                          " rows, declared out = " + std::to_string(l.out));
      }
      for (const auto& row : rows) {
        if (row.size() != l.in) {
          throw ConfigError(layer_name(i) + ": weight row has " + std::to_string(row.size()) +
                            " entries, declared in = " + std::to_string(l.in));
        }
        for (const auto& v : row) l.weights.push_back(v.get<double>());
      }
      l.bias = lj.at("bias").get<std::vector<double>>();
      w.layers.push_back(std::move(l));
    }
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy file: ") + e.what());
  }
}

PolicyWeights load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open policy weights file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str());
}

std::string format_policy(const PolicyWeights& w) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : w.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < l.out; ++r) {
      rows.push_back(std::vector<double>(l.weights.begin() + static_cast<std::ptrdiff_t>(r * l.in),
                                         l.weights.begin() + static_cast<std::ptrdiff_t>((r + 1) * l.in)));
    }
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"activation", activation_name(l.activation)},
                      {"weights", rows},
                      {"bias", l.bias}});
  }
  const nlohmann::json j = {{"format", "beamtune-policy"},
                            {"version", 1},
                            {"observation_mean", w.observation_mean},
                            {"observation_std", w.observation_std},
                            {"action_scale", w.action_scale},
                            {"layers", layers}};
  return j.dump() + "\n";
}

void save_policy(const PolicyWeights& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write policy file: " + path.string());
  out << format_policy(weights);
}

PolicyAction infer(const PolicyWeights& w, const std::array<double, kObservationSize>& observation) {
  const auto& k = kernels::active();
  // Fixed-size scratch keeps inference allocation-free.
  std::array<double, kHiddenWidth> a{}, b{};
  std::array<double, kObservationSize> x{};
  for (std::size_t i = 0; i < kObservationSize; ++i) {
    x[i] = (observation[i] - w.observation_mean[i]) / w.observation_std[i];
  }
  const double* in = x.data();
  double* out = a.data();
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const Layer& l = w.layers[li];
    k.dense(l.weights.data(), l.bias.data(), in, l.out, l.in, out);
    for (std::size_t r = 0; r < l.out; ++r) {
      switch (l.activation) {
        case Activation::Relu: out[r] = out[r] > 0.0 ? out[r] : 0.0; break;
        case Activation::Tanh: out[r] = std::tanh(out[r]); break;
        case Activation::Identity: break;
      }
    }
    in = out;
    out = (out == a.data()) ? b.data() : a.data();
  }
  PolicyAction action{};
  for (std::size_t i = 0; i < kActionSize; ++i) action[i] = in[i] * w.action_scale[i];
  return action;
}

RunRecord run_policy(env::Environment& environment, const PolicyWeights& weights, int budget) {
  if (budget < 1) throw ConfigError("policy budget must be positive");
  weights.validate();
  for (int i = 0; i < budget; ++i) {
    const auto obs = environment.observation().to_array();
    const auto t0 = std::chrono::steady_clock::now();
    const PolicyAction action = infer(weights, obs);
    const double latency =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    environment.step(action, env::ActionMode::Delta, latency);
  }
  RunRecord record = environment.record();
  record.optimizer = "policy";
  record.budget = budget;
  return record;
}

}  // namespace beamtune::policy
