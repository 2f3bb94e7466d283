#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hgapso/search.hpp"

namespace hgapso {

/// Parses the TOML subset used by search configs into a JSON tree:
/// [table] / [a.b] headers, `key = value` pairs, comments, basic and literal strings,
/// integers, floats, booleans and (possibly multi-line) arrays of scalars.
/// Throws ConfigError with a line number.
nlohmann::json parse_toml(std::string_view text);

/// Parses a single TOML value ("0.5", "true", "[1, 2]", "\"x\"").
nlohmann::json parse_toml_value(std::string_view text);

/// Builds a SearchConfig from TOML text. Missing keys keep their defaults;
/// unknown keys are rejected. Without an explicit ranges.max_blocks the
/// bound follows the input size (floor(log2(min side)) - 1).
SearchConfig load_config_toml(std::string_view text);
SearchConfig load_config_file(const std::string& path);

/// Applies `dotted.key=value` (value in TOML syntax) on top of `config`.
void apply_override(SearchConfig& config, std::string_view assignment);

}  // namespace hgapso
