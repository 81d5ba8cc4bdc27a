#include "beamtune/errors.hpp"
#include "beamtune/lattice_file.hpp"

#include <doctest.h>

#include <string>

using namespace beamtune;
using namespace beamtune::optics;

namespace {

const char* kMinimal = R"(format_version = 1
elements = Q1 Q2 CV Q3 CH S
Q1.type = quadrupole
Q1.length = 0.1
Q1.magnet = Q1
Q2.type = quadrupole
Q2.length = 0.1
Q2.magnet = Q2
CV.type = corrector
CV.length = 0.02
CV.plane = vertical
Q3.type = quadrupole
Q3.length = 0.1
Q3.magnet = Q3
CH.type = corrector
CH.length = 0.02
CH.plane = horizontal
S.type = screen
S.half_width = 0.004
S.half_height = 0.0025
S.resolution = 2e-5
)";

}  // namespace

TEST_CASE("shipped lattice file equals the built-in section") {
  const Lattice file = load_lattice_file(default_lattice_path());
  const Lattice built = Lattice::ares_ea();
  CHECK(format_lattice(file) == format_lattice(built));
  CHECK(file.total_length() == doctest::Approx(built.total_length()));
}

TEST_CASE("format and parse round-trip") {
  const Lattice a = Lattice::ares_ea();
  const Lattice b = parse_lattice(format_lattice(a));
  CHECK(format_lattice(b) == format_lattice(a));
  const Lattice c = parse_lattice(kMinimal);
  CHECK(c.elements.size() == 6);
  CHECK(c.screen().half_width == 0.004);
}

TEST_CASE("unknown, duplicate and missing keys are rejected") {
  CHECK_THROWS_AS(parse_lattice(std::string(kMinimal) + "Q1.colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_lattice(std::string(kMinimal) + "Q1.length = 0.2\n"), ConfigError);
  std::string missing = kMinimal;
  missing.erase(missing.find("S.resolution"));
  CHECK_THROWS_AS(parse_lattice(missing), ConfigError);
  CHECK_THROWS_AS(parse_lattice("format_version = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_lattice("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(load_lattice_file("/nonexistent/path.lattice"), ConfigError);
}

TEST_CASE("element order and values are validated") {
  std::string swapped = kMinimal;
  swapped.replace(swapped.find("Q1 Q2 CV"), 8, "Q2 Q1 CV");
  CHECK_THROWS_AS(parse_lattice(swapped), ConfigError);
  std::string negative = kMinimal;
  negative.replace(negative.find("Q1.length = 0.1"), 15, "Q1.length = -1");
  CHECK_THROWS(parse_lattice(negative));
  std::string nan = kMinimal;
  nan.replace(nan.find("CV.length = 0.02"), 16, "CV.length = nan");
  CHECK_THROWS(parse_lattice(nan));
  std::string bad_plane = kMinimal;
  bad_plane.replace(bad_plane.find("= horizontal"), 12, "= diagonal");
  CHECK_THROWS_AS(parse_lattice(bad_plane), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
  const std::string text = std::string("# header\n\n") + kMinimal + "   # trailing\n";
  CHECK_NOTHROW(parse_lattice(text));
}
