#include "hgapso/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hgapso/error.hpp"

namespace hgapso {

namespace {

void merge_into(nlohmann::json& base, const nlohmann::json& patch, const std::string& path) {
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    nlohmann::json& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) throw ConfigError("config key '" + where + "' must be a table");
      merge_into(slot, value, where);
    } else {
      if (value.is_object()) throw ConfigError("config key '" + where + "' is not a table");
      slot = value;
    }
  }
}

SearchConfig from_tree(const nlohmann::json& tree) {
  try {
    return config_from_json(tree.dump());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

SearchConfig load_config_toml(std::string_view text) {
  const nlohmann::json patch = parse_toml(text);
  nlohmann::json tree = nlohmann::json::parse(config_to_json(SearchConfig{}));
  merge_into(tree, patch, "");
  SearchConfig config = from_tree(tree);
  const bool explicit_max = patch.contains("ranges") && patch["ranges"].contains("max_blocks");
  if (!explicit_max) {
    config.ranges.max_blocks = std::max(1, config.ranges.spatial_block_limit() - 1);
  }
  config.validate();
  return config;
}

SearchConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return load_config_toml(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_override(SearchConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  std::string key(assignment.substr(0, eq));
  key.erase(std::remove_if(key.begin(), key.end(), [](char c) { return c == ' ' || c == '\t'; }), key.end());
  const nlohmann::json value = parse_toml_value(assignment.substr(eq + 1));

  nlohmann::json patch = nlohmann::json::object();
  nlohmann::json* node = &patch;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
  nlohmann::json tree = nlohmann::json::parse(config_to_json(config));
  merge_into(tree, patch, "");
  SearchConfig updated = from_tree(tree);
  updated.validate();
  config = std::move(updated);
}

}  // namespace hgapso
