#pragma once

// Inference-only runtime for a trained tuning policy: a 13 -> 64 -> 64 -> 5
// MLP read from a portable JSON weights file, emitting actuator deltas.
//
// Weights file (format "beamtune-policy", version 1):
//   observation_mean[13], observation_std[13]   running statistics, (b, u, b')
//   action_scale[5]                             physical units per output
//   layers[]: {in, out, activation: relu|tanh|identity,
//              weights: out rows of `in` numbers, bias: out numbers}

#include "beamtune/environment.hpp"
#include "beamtune/run_record.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace beamtune::policy {

inline constexpr std::size_t kObservationSize = 13;
inline constexpr std::size_t kActionSize = 5;
inline constexpr std::size_t kHiddenWidth = 64;

enum class Activation { Relu, Tanh, Identity };

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Relu;
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> bias;
  bool operator==(const Layer&) const = default;
};

struct PolicyWeights {
  std::vector<Layer> layers;
  std::array<double, kObservationSize> observation_mean{};
  std::array<double, kObservationSize> observation_std{};
  std::array<double, kActionSize> action_scale{};

  /// Throws ConfigError naming the offending layer on a shape mismatch.
  void validate() const;
  bool operator==(const PolicyWeights&) const = default;

  /// All-zero network (zero action everywhere), unit statistics.
  static PolicyWeights zeros();
};

using PolicyAction = std::array<double, kActionSize>;

PolicyWeights parse_policy(const std::string& text);
PolicyWeights load_policy(const std::filesystem::path& path);
std::string format_policy(const PolicyWeights& weights);
void save_policy(const PolicyWeights& weights, const std::filesystem::path& path);

/// Normalize, hidden layers, tanh head, scale. Pure and reentrant.
PolicyAction infer(const PolicyWeights& weights, const std::array<double, kObservationSize>& observation);

/// `budget` delta steps from the current (reset) state, no return-to-best.
RunRecord run_policy(env::Environment& environment, const PolicyWeights& weights, int budget = 50);

}  // namespace beamtune::policy
