#include "config.hpp"

#include <fstream>

namespace stme::cli {

std::vector<ConfigEntry> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  std::vector<ConfigEntry> entries;
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() != 1) {
      throw UsageError(path.string() + ": key '" + item.name + "' must sit in one [section]");
    }
    if (!seen.emplace(item.parents[0], item.name).second) {
      throw UsageError(path.string() + ": duplicate key " + item.parents[0] + "." + item.name);
    }
    entries.push_back({item.parents[0], item.name, std::move(item.inputs)});
  }
  return entries;
}

CLI::Option* OptionTable::bind(CLI::Option* option, std::string section, std::string key) {
  option->group(section);
  bindings_.emplace(Key{std::move(section), std::move(key)}, option);
  return option;
}

void OptionTable::apply(const std::vector<ConfigEntry>& entries, const std::set<Key>& known) const {
  for (const auto& entry : entries) {
    const Key key{entry.section, entry.key};
    if (!known.contains(key)) {
      throw UsageError("unknown config key " + entry.section + "." + entry.key);
    }
    const auto it = bindings_.find(key);
    if (it == bindings_.end()) continue;
    CLI::Option* opt = it->second;
    if (opt->count() > 0) continue;
    try {
      for (const auto& v : entry.values) opt->add_result(v);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key " + entry.section + "." + entry.key + ": " + e.what());
    }
  }
}

nlohmann::json OptionTable::echo() const {
  auto doc = nlohmann::json::object();
  for (const auto& [key, opt] : bindings_) {
    nlohmann::json value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      value = results.size() == 1 ? nlohmann::json(results.front()) : nlohmann::json(results);
    } else {
      value = opt->get_default_str();
    }
    doc[key.first][key.second] = std::move(value);
  }
  return doc;
}

}  // namespace stme::cli
