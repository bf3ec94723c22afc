#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "collemit/errors.hpp"
#include "collemit/types.hpp"

namespace collemit::cli {

/// Bad configuration; the message names the offending key.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// INI-style run configuration: `[section]` headers and `key = value` lines.
/// Only known sections and keys are accepted.
class Config {
 public:
  static Config load(const std::filesystem::path& path);
  static Config parse(std::istream& is, const std::string& source = "<config>");

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  std::string text(const std::string& section, const std::string& key) const;
  std::string text(const std::string& section, const std::string& key, const std::string& def) const;
  double number(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key, double def) const;
  long long integer(const std::string& section, const std::string& key) const;
  long long integer(const std::string& section, const std::string& key, long long def) const;
  std::uint64_t u64(const std::string& section, const std::string& key) const;
  bool flag(const std::string& section, const std::string& key, bool def) const;
  std::vector<double> list(const std::string& section, const std::string& key) const;
  Vec3 vec3(const std::string& section, const std::string& key) const;
  Vec3 vec3(const std::string& section, const std::string& key, const Vec3& def) const;

  /// Overrides a value (used for sweeps).
  void set(const std::string& section, const std::string& key, const std::string& value);
  void erase(const std::string& section, const std::string& key);

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Name of a key for messages: "[section] key".
std::string key_name(const std::string& section, const std::string& key);

}  // namespace collemit::cli
