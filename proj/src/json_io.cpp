#include "beamtune/json_io.hpp"

#include "beamtune/errors.hpp"

#include <cstring>
#include <string>

namespace beamtune::json_io {

using nlohmann::json;

json to_json(const optics::MagnetSettings& u) {
  return {{"k_q1", u.k_q1}, {"k_q2", u.k_q2}, {"a_cv", u.a_cv}, {"k_q3", u.k_q3}, {"a_ch", u.a_ch}};
}

json to_json(const optics::BeamParameters& b) {
  return {{"mu_x", b.mu_x}, {"sigma_x", b.sigma_x}, {"mu_y", b.mu_y}, {"sigma_y", b.sigma_y}};
}

json to_json(const optics::IncomingBeam& i) {
  return {{"energy", i.energy},     {"mu_x", i.mu_x},         {"mu_xp", i.mu_xp},
          {"mu_y", i.mu_y},         {"mu_yp", i.mu_yp},       {"sigma_x", i.sigma_x},
          {"sigma_xp", i.sigma_xp}, {"sigma_y", i.sigma_y},   {"sigma_yp", i.sigma_yp}};
}

json to_json(const optics::Misalignments& m) {
  return {{"q1_dx", m.q1_dx}, {"q1_dy", m.q1_dy}, {"q2_dx", m.q2_dx},
          {"q2_dy", m.q2_dy}, {"q3_dx", m.q3_dx}, {"q3_dy", m.q3_dy},
          {"screen_dx", m.screen_dx}, {"screen_dy", m.screen_dy}};
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const char* context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
  }
}

namespace {
double num(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(std::string("missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}
}  // namespace

optics::MagnetSettings settings_from_json(const json& j) {
  reject_unknown_keys(j, {"k_q1", "k_q2", "a_cv", "k_q3", "a_ch"}, "magnet settings");
  return {num(j, "k_q1"), num(j, "k_q2"), num(j, "a_cv"), num(j, "k_q3"), num(j, "a_ch")};
}

optics::BeamParameters beam_from_json(const json& j) {
  reject_unknown_keys(j, {"mu_x", "sigma_x", "mu_y", "sigma_y"}, "beam parameters");
  return {num(j, "mu_x"), num(j, "sigma_x"), num(j, "mu_y"), num(j, "sigma_y")};
}

optics::IncomingBeam incoming_from_json(const json& j) {
  reject_unknown_keys(j, {"energy", "mu_x", "mu_xp", "mu_y", "mu_yp", "sigma_x", "sigma_xp",
                          "sigma_y", "sigma_yp"},
                      "incoming beam");
  optics::IncomingBeam i;
  i.energy = num(j, "energy");
  i.mu_x = num(j, "mu_x");
  i.mu_xp = num(j, "mu_xp");
  i.mu_y = num(j, "mu_y");
  i.mu_yp = num(j, "mu_yp");
  i.sigma_x = num(j, "sigma_x");
  i.sigma_xp = num(j, "sigma_xp");
  i.sigma_y = num(j, "sigma_y");
  i.sigma_yp = num(j, "sigma_yp");
  return i;
}

optics::Misalignments misalignments_from_json(const json& j) {
  reject_unknown_keys(j, {"q1_dx", "q1_dy", "q2_dx", "q2_dy", "q3_dx", "q3_dy", "screen_dx",
                          "screen_dy"},
                      "misalignments");
  optics::Misalignments m;
  m.q1_dx = num(j, "q1_dx");
  m.q1_dy = num(j, "q1_dy");
  m.q2_dx = num(j, "q2_dx");
  m.q2_dy = num(j, "q2_dy");
  m.q3_dx = num(j, "q3_dx");
  m.q3_dy = num(j, "q3_dy");
  m.screen_dx = num(j, "screen_dx");
  m.screen_dy = num(j, "screen_dy");
  return m;
}

}  // namespace beamtune::json_io
