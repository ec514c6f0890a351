#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ofdmclip/harness.hpp"

namespace ofdmclip {

/// Scalar or flat array from a TOML-style config file.
struct ConfigValue {
    enum class Kind { Integer, Float, Bool, String, Array };

    Kind kind = Kind::Integer;
    long integer = 0;
    double number = 0.0;      // also set for integers
    bool boolean = false;
    std::string text;
    std::vector<ConfigValue> items;
    int line = 0;
};

/// section -> key -> value; keys before any header live in section "".
using ConfigDocument = std::map<std::string, std::map<std::string, ConfigValue>>;

/// Parses the TOML subset used by the experiment files: [section] headers, key = value,
/// integers, floats (including inf), booleans, double-quoted strings, flat arrays, # comments.
/// Throws ConfigError("line N: ...") on malformed input or duplicate keys.
ConfigDocument parse_config(const std::string& text);

/// Sweep settings from a parsed document on top of the experiment's defaults.
/// Unknown sections or keys are rejected with their line number.
SweepSpec spec_from_config(const ConfigDocument& doc, Experiment fallback);

/// Reads and parses a config file. Throws ConfigError naming the path if it cannot be read.
ConfigDocument load_config(const std::filesystem::path& path);

}  // namespace ofdmclip
