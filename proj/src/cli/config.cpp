#include "collemit/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace collemit::cli {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"geometry", {"type", "dims", "n", "d0", "file", "length_scale", "mean_spacing", "box",
                    "tolerance"}},
      {"drive", {"direction", "k0", "dipole", "gamma"}},
      {"fluctuation", {"model", "xi", "x0", "n_thermal", "xi_axes", "box"}},
      {"grid", {"n_theta", "n_phi"}},
      {"sampling", {"seed", "n_samples", "method"}},
      {"output", {"pattern", "summary", "write_pattern"}},
      {"sweep", {"variable", "values", "fit", "exclude_smallest"}},
      {"states", {"kind", "k", "q", "n_a", "n_b", "tolerance"}},
      {"rydberg", {"omega1", "omega2", "delta", "u", "u_over_omega_eff", "k1", "k2", "t_final",
                   "dt", "n_phase", "k_a1", "k_b1", "k_a2", "k_b2", "pair_mask"}},
      {"chain", {"n", "tolerance", "length_scale", "mean_spacing"}},
      {"dynamics", {"form", "shift", "t_final", "n_steps", "wave", "mode"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& token, const std::string& where) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last || token.empty())
    throw ConfigError(where + ": expected a number, got '" + token + "'");
  return v;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

std::string key_name(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse(is, path.string());
}

Config Config::parse(std::istream& is, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source + ": key '" + section + "' outside of any section");
    const auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError(source + ": unknown section [" + section + "]");
    auto& dst = cfg.values_[section];
    for (const auto& [key, leaf] : body) {
      if (!it->second.count(key))
        throw ConfigError(source + ": unknown key " + key_name(section, key));
      // Strip trailing comments after ';' or '#'.
      std::string v = leaf.get_value<std::string>();
      const auto c = v.find_first_of(";#");
      if (c != std::string::npos) v.resize(c);
      dst[key] = trim(v);
    }
  }
  return cfg;
}

bool Config::has_section(const std::string& section) const { return values_.count(section) > 0; }

bool Config::has(const std::string& section, const std::string& key) const {
  return raw(section, key).has_value();
}

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string Config::text(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v || v->empty()) throw ConfigError("missing required key " + key_name(section, key));
  return *v;
}

std::string Config::text(const std::string& section, const std::string& key,
                         const std::string& def) const {
  return has(section, key) ? text(section, key) : def;
}

double Config::number(const std::string& section, const std::string& key) const {
  return parse_number(text(section, key), key_name(section, key));
}

double Config::number(const std::string& section, const std::string& key, double def) const {
  return has(section, key) ? number(section, key) : def;
}

long long Config::integer(const std::string& section, const std::string& key) const {
  const std::string t = text(section, key);
  long long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw ConfigError(key_name(section, key) + ": expected an integer, got '" + t + "'");
  return v;
}

long long Config::integer(const std::string& section, const std::string& key,
                          long long def) const {
  return has(section, key) ? integer(section, key) : def;
}

std::uint64_t Config::u64(const std::string& section, const std::string& key) const {
  const std::string t = text(section, key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw ConfigError(key_name(section, key) + ": expected an unsigned integer, got '" + t + "'");
  return v;
}

bool Config::flag(const std::string& section, const std::string& key, bool def) const {
  if (!has(section, key)) return def;
  const std::string t = text(section, key);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError(key_name(section, key) + ": expected true or false, got '" + t + "'");
}

std::vector<double> Config::list(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split(text(section, key)))
    out.push_back(parse_number(tok, key_name(section, key)));
  return out;
}

Vec3 Config::vec3(const std::string& section, const std::string& key) const {
  const auto v = list(section, key);
  if (v.size() != 3) throw ConfigError(key_name(section, key) + ": expected three numbers");
  return {v[0], v[1], v[2]};
}

Vec3 Config::vec3(const std::string& section, const std::string& key, const Vec3& def) const {
  return has(section, key) ? vec3(section, key) : def;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  values_[section][key] = value;
}

void Config::erase(const std::string& section, const std::string& key) {
  const auto s = values_.find(section);
  if (s != values_.end()) s->second.erase(key);
}

}  // namespace collemit::cli
