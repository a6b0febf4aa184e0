#pragma once

// Flat sectioned key/value config files, and the mapping between config keys
// and command-line options. Explicit flags win over config values.

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace stme::cli {

/// Invalid command line or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string section;
  std::string key;
  std::vector<std::string> values;
};

/// Parses `[section]` headers and `key = value` lines. Keys outside a section
/// or repeated within one are errors.
std::vector<ConfigEntry> read_config(const std::filesystem::path& path);

/// Options of one subcommand together with their config keys.
class OptionTable {
 public:
  using Key = std::pair<std::string, std::string>;  // section, key

  CLI::Option* bind(CLI::Option* option, std::string section, std::string key);

  /// Fills options not given on the command line. Keys bound by some other
  /// subcommand are ignored; keys nobody binds are rejected.
  void apply(const std::vector<ConfigEntry>& entries, const std::set<Key>& known) const;

  /// Effective values, grouped by section.
  nlohmann::json echo() const;

  const std::map<Key, CLI::Option*>& bindings() const { return bindings_; }

 private:
  std::map<Key, CLI::Option*> bindings_;
};

}  // namespace stme::cli
