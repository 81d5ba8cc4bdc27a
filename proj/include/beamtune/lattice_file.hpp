#pragma once

// Plain-text lattice description, one `key = value` pair per line, SI units.
//
//   format_version = 1
//   elements = D0 Q1 D1 ... SCREEN
//   <name>.type = drift | quadrupole | corrector | screen
//   drift:       <name>.length
//   quadrupole:  <name>.length, <name>.magnet = Q1 | Q2 | Q3
//   corrector:   <name>.length, <name>.plane = horizontal | vertical
//   screen:      <name>.half_width, <name>.half_height, <name>.resolution
//
// `#` starts a comment. Unknown or duplicate keys are rejected.

#include "beamtune/optics.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace beamtune::optics {

inline constexpr int kLatticeFormatVersion = 1;

Lattice parse_lattice(std::string_view text);
Lattice load_lattice_file(const std::filesystem::path& path);
std::string format_lattice(const Lattice& lattice);

/// Path of the lattice file shipped with the sources.
std::filesystem::path default_lattice_path();

}  // namespace beamtune::optics
