#include "beamtune/run_record.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/json_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace beamtune {

std::vector<double> RunRecord::mae_trace_um() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.mae_um);
  return out;
}

std::vector<double> RunRecord::best_mae_trace_um() const {
  std::vector<double> out = mae_trace_um();
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::min(out[i], out[i - 1]);
  return out;
}

void RunRecord::add_flag(const std::string& flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.push_back(flag);
}

namespace {

nlohmann::json step_to_json(const StepRecord& s) {
  return {{"type", "step"},
          {"step", s.step},
          {"settings", json_io::to_json(s.settings)},
          {"measured", json_io::to_json(s.measured)},
          {"truth", json_io::to_json(s.truth)},
          {"mae_um", s.mae_um},
          {"objective", s.objective},
          {"reward", s.reward},
          {"on_screen", s.on_screen},
          {"clamped", s.clamped},
          {"latency_s", s.latency_s ? nlohmann::json(*s.latency_s) : nlohmann::json(nullptr)}};
}

StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord s;
  s.step = j.at("step").get<int>();
  s.settings = json_io::settings_from_json(j.at("settings"));
  s.measured = json_io::beam_from_json(j.at("measured"));
  s.truth = json_io::beam_from_json(j.at("truth"));
  s.mae_um = j.at("mae_um").get<double>();
  s.objective = j.at("objective").get<double>();
  s.reward = j.at("reward").get<double>();
  s.on_screen = j.at("on_screen").get<bool>();
  s.clamped = j.at("clamped").get<bool>();
  if (!j.at("latency_s").is_null()) s.latency_s = j.at("latency_s").get<double>();
  return s;
}

}  // namespace

void write_jsonl(std::ostream& out, const RunRecord& r) {
  const nlohmann::json header = {{"type", "run"},
                                 {"trial_id", r.trial_id},
                                 {"optimizer", r.optimizer},
                                 {"scenario", r.scenario},
                                 {"target", json_io::to_json(r.target)},
                                 {"budget", r.budget},
                                 {"returned_to_best", r.returned_to_best},
                                 {"flags", r.flags},
                                 {"steps", r.steps.size()}};
  out << header.dump() << '\n';
  out << step_to_json(r.initial).dump() << '\n';
  for (const auto& s : r.steps) out << step_to_json(s).dump() << '\n';
}

std::vector<RunRecord> read_jsonl(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::vector<std::size_t> expected;
  bool want_initial = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("run record: bad JSON line: ") + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "run") {
      RunRecord r;
      r.trial_id = j.at("trial_id").get<int>();
      r.optimizer = j.at("optimizer").get<std::string>();
      r.scenario = j.at("scenario").get<std::string>();
      r.target = json_io::beam_from_json(j.at("target"));
      r.budget = j.at("budget").get<int>();
      r.returned_to_best = j.at("returned_to_best").get<bool>();
      r.flags = j.at("flags").get<std::vector<std::string>>();
      expected.push_back(j.at("steps").get<std::size_t>());
      out.push_back(std::move(r));
      want_initial = true;
    } else if (type == "step") {
      if (out.empty()) throw ConfigError("run record: step line before run header");
      if (want_initial) {
        out.back().initial = step_from_json(j);
        want_initial = false;
      } else {
        out.back().steps.push_back(step_from_json(j));
      }
    } else {
      throw ConfigError("run record: unknown line type '" + type + "'");
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].steps.size() != expected[i]) throw ConfigError("run record: truncated step list");
  }
  return out;
}

}  // namespace beamtune
