#include "beamtune/lattice_file.hpp"

#include "beamtune/errors.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace beamtune::optics {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class KeyValues {
 public:
  explicit KeyValues(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("lattice line " + std::to_string(lineno) + ": expected key = value");
      }
      std::string key = trim(std::string_view(body).substr(0, eq));
      std::string value = trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) throw ConfigError("lattice line " + std::to_string(lineno) + ": empty key");
      if (!values_.emplace(key, value).second) throw ConfigError("duplicate lattice key: " + key);
    }
  }

  std::string take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing lattice key: " + key);
    used_.insert(key);
    return it->second;
  }

  double take_number(const std::string& key) {
    const std::string v = take(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      throw ConfigError("lattice key " + key + ": not a number: '" + v + "'");
    }
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) throw ConfigError("unknown lattice key: " + key);
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

std::string slot_name(QuadSlot s) {
  switch (s) {
    case QuadSlot::Q1: return "Q1";
    case QuadSlot::Q2: return "Q2";
    case QuadSlot::Q3: return "Q3";
  }
  return "?";
}

}  // namespace

Lattice parse_lattice(std::string_view text) {
  KeyValues kv(text);
  const double version = kv.take_number("format_version");
  if (version != kLatticeFormatVersion) {
    throw ConfigError("unsupported lattice format_version");
  }
  std::istringstream names(kv.take("elements"));
  Lattice lattice;
  std::set<std::string> seen;
  for (std::string name; names >> name;) {
    if (!seen.insert(name).second) throw ConfigError("duplicate element name: " + name);
    const std::string type = kv.take(name + ".type");
    if (type == "drift") {
      lattice.elements.emplace_back(Drift{kv.take_number(name + ".length")});
    } else if (type == "quadrupole") {
      Quadrupole q{kv.take_number(name + ".length"), QuadSlot::Q1};
      const std::string magnet = kv.take(name + ".magnet");
      if (magnet == "Q1") q.slot = QuadSlot::Q1;
      else if (magnet == "Q2") q.slot = QuadSlot::Q2;
      else if (magnet == "Q3") q.slot = QuadSlot::Q3;
      else throw ConfigError(name + ".magnet must be Q1, Q2 or Q3");
      lattice.elements.emplace_back(q);
    } else if (type == "corrector") {
      Corrector c{kv.take_number(name + ".length"), CorrectorPlane::Horizontal};
      const std::string plane = kv.take(name + ".plane");
      if (plane == "horizontal") c.plane = CorrectorPlane::Horizontal;
      else if (plane == "vertical") c.plane = CorrectorPlane::Vertical;
      else throw ConfigError(name + ".plane must be horizontal or vertical");
      lattice.elements.emplace_back(c);
    } else if (type == "screen") {
      lattice.elements.emplace_back(Screen{kv.take_number(name + ".half_width"),
                                           kv.take_number(name + ".half_height"),
                                           kv.take_number(name + ".resolution")});
    } else {
      throw ConfigError("unknown element type '" + type + "' for " + name);
    }
  }
  kv.reject_unused();
  lattice.validate();
  return lattice;
}

Lattice load_lattice_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lattice file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lattice(buf.str());
}

std::string format_lattice(const Lattice& lattice) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "format_version = " << kLatticeFormatVersion << "\n";
  std::vector<std::string> names;
  std::ostringstream body;
  body << std::setprecision(17);
  int drifts = 0;
  for (const Element& el : lattice.elements) {
    std::string name;
    if (const auto* d = std::get_if<Drift>(&el)) {
      name = "D" + std::to_string(drifts++);
      body << name << ".type = drift\n" << name << ".length = " << d->length << "\n";
    } else if (const auto* q = std::get_if<Quadrupole>(&el)) {
      name = slot_name(q->slot);
      body << name << ".type = quadrupole\n"
           << name << ".length = " << q->length << "\n"
           << name << ".magnet = " << name << "\n";
    } else if (const auto* c = std::get_if<Corrector>(&el)) {
      const bool h = c->plane == CorrectorPlane::Horizontal;
      name = h ? "CH" : "CV";
      body << name << ".type = corrector\n"
           << name << ".length = " << c->length << "\n"
           << name << ".plane = " << (h ? "horizontal" : "vertical") << "\n";
    } else {
      const auto& s = std::get<Screen>(el);
      name = "SCREEN";
      body << name << ".type = screen\n"
           << name << ".half_width = " << s.half_width << "\n"
           << name << ".half_height = " << s.half_height << "\n"
           << name << ".resolution = " << s.resolution << "\n";
    }
    names.push_back(name);
  }
  os << "elements =";
  for (const auto& n : names) os << ' ' << n;
  os << "\n" << body.str();
  return os.str();
}

std::filesystem::path default_lattice_path() {
  return std::filesystem::path(BEAMTUNE_DATA_DIR) / "ares_ea.lattice";
}

}  // namespace beamtune::optics
