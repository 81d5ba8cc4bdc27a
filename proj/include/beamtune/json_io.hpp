#pragma once

// JSON mapping of the shared value types (SI units throughout).

#include "beamtune/optics.hpp"

#include <json.hpp>

namespace beamtune::json_io {

nlohmann::json to_json(const optics::MagnetSettings& u);
nlohmann::json to_json(const optics::BeamParameters& b);
nlohmann::json to_json(const optics::IncomingBeam& beam);
nlohmann::json to_json(const optics::Misalignments& m);

optics::MagnetSettings settings_from_json(const nlohmann::json& j);
optics::BeamParameters beam_from_json(const nlohmann::json& j);
optics::IncomingBeam incoming_from_json(const nlohmann::json& j);
optics::Misalignments misalignments_from_json(const nlohmann::json& j);

/// Throws ConfigError naming the first key of `j` not listed in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* context);

}  // namespace beamtune::json_io
