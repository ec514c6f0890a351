#include "ofdmclip/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace ofdmclip {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment outside of string literals.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

bool is_bare_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

ConfigValue parse_scalar(const std::string& raw, int line) {
    const std::string s = trim(raw);
    ConfigValue v;
    v.line = line;
    if (s.empty()) fail(line, "missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
        v.kind = ConfigValue::Kind::String;
        v.text = s.substr(1, s.size() - 2);
        if (v.text.find('"') != std::string::npos) fail(line, "unexpected quote in string");
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.boolean = s == "true";
        return v;
    }
    if (s == "inf" || s == "+inf" || s == "-inf") {
        v.kind = ConfigValue::Kind::Float;
        v.number = s == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return v;
    }
    std::string digits;
    for (char c : s) {
        if (c != '_') digits += c;
    }
    const bool floating = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data();
    if (*first == '+') ++first;
    const char* last = digits.data() + digits.size();
    if (floating) {
        const auto [end, ec] = std::from_chars(first, last, v.number);
        if (ec != std::errc() || end != last) fail(line, "invalid number '" + s + "'");
        v.kind = ConfigValue::Kind::Float;
    } else {
        const auto [end, ec] = std::from_chars(first, last, v.integer);
        if (ec != std::errc() || end != last) fail(line, "invalid value '" + s + "'");
        v.kind = ConfigValue::Kind::Integer;
        v.number = static_cast<double>(v.integer);
    }
    return v;
}

ConfigValue parse_value(const std::string& raw, int line) {
    const std::string s = trim(raw);
    if (s.empty() || s.front() != '[') return parse_scalar(s, line);
    if (s.back() != ']') fail(line, "unterminated array");
    ConfigValue v;
    v.kind = ConfigValue::Kind::Array;
    v.line = line;
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return v;
    std::string item;
    bool quoted = false;
    auto flush = [&](bool last) {
        if (trim(item).empty()) {
            if (last) return;  // trailing comma
            fail(line, "empty array element");
        }
        const ConfigValue element = parse_scalar(item, line);
        if (!v.items.empty() && (element.kind == ConfigValue::Kind::String) != (v.items[0].kind == ConfigValue::Kind::String)) {
            fail(line, "mixed array element types");
        }
        v.items.push_back(element);
        item.clear();
    };
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == '[' && !quoted) fail(line, "nested arrays are not supported");
        if (c == ',' && !quoted) {
            flush(false);
        } else {
            item += c;
        }
    }
    flush(true);
    return v;
}

const char* kind_name(ConfigValue::Kind k) {
    switch (k) {
        case ConfigValue::Kind::Integer: return "integer";
        case ConfigValue::Kind::Float: return "number";
        case ConfigValue::Kind::Bool: return "boolean";
        case ConfigValue::Kind::String: return "string";
        case ConfigValue::Kind::Array: return "array";
    }
    return "value";
}

void expect(const ConfigValue& v, ConfigValue::Kind kind, const std::string& key) {
    if (v.kind != kind) fail(v.line, "'" + key + "' must be a " + kind_name(kind) + ", got " + kind_name(v.kind));
}

double as_number(const ConfigValue& v, const std::string& key) {
    if (v.kind != ConfigValue::Kind::Integer && v.kind != ConfigValue::Kind::Float) {
        fail(v.line, "'" + key + "' must be a number, got " + kind_name(v.kind));
    }
    return v.number;
}

long as_integer(const ConfigValue& v, const std::string& key) {
    expect(v, ConfigValue::Kind::Integer, key);
    return v.integer;
}

int as_int(const ConfigValue& v, const std::string& key) {
    const long x = as_integer(v, key);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(v.line, "'" + key + "' out of range");
    return static_cast<int>(x);
}

bool as_bool(const ConfigValue& v, const std::string& key) {
    expect(v, ConfigValue::Kind::Bool, key);
    return v.boolean;
}

std::string as_string(const ConfigValue& v, const std::string& key) {
    expect(v, ConfigValue::Kind::String, key);
    return v.text;
}

using Setter = std::function<void(SweepSpec&, const ConfigValue&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table{
        {"sweep",
         {
             {"grid",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  expect(v, ConfigValue::Kind::Array, k);
                  s.grid.clear();
                  for (const auto& item : v.items) s.grid.push_back(as_number(item, k));
              }},
             {"algorithms",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  expect(v, ConfigValue::Kind::Array, k);
                  s.algorithms.clear();
                  for (const auto& item : v.items) s.algorithms.push_back(as_string(item, k));
              }},
             {"seed",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  const long x = as_integer(v, k);
                  if (x < 0) fail(v.line, "'seed' must be non-negative");
                  s.seed = static_cast<std::uint64_t>(x);
              }},
             {"threads", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.threads = as_int(v, k); }},
             {"batch", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.batch = as_int(v, k); }},
             {"target_errors",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.stop.target_errors = as_integer(v, k); }},
             {"max_frames",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.stop.max_frames = as_integer(v, k); }},
             {"mse_frames",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.stop.mse_frames = as_integer(v, k); }},
         }},
        {"link",
         {
             {"n", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.n = as_int(v, k); }},
             {"qam_order",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.qam_order = as_int(v, k); }},
             {"taps", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.taps = as_int(v, k); }},
             {"clip_ratio",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.clip_ratio = as_number(v, k); }},
             {"ebn0_db",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.ebn0_db = as_number(v, k); }},
             {"measurements",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.link.measurements = as_int(v, k); }},
             {"tap_variance",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  const std::string t = as_string(v, k);
                  if (t == "unit_total") {
                      s.link.tap_variance = TapVariance::UnitTotal;
                  } else if (t == "per_tap_unit") {
                      s.link.tap_variance = TapVariance::PerTapUnit;
                  } else {
                      fail(v.line, "tap_variance must be \"unit_total\" or \"per_tap_unit\"");
                  }
              }},
         }},
        {"receiver",
         {
             {"beam", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.beam = as_int(v, k); }},
             {"max_depth",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.max_depth = as_int(v, k); }},
             {"window",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.window = as_number(v, k); }},
             {"support_threshold",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  s.rx.search.support_threshold = as_number(v, k);
              }},
             {"early_stop",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.early_stop = as_bool(v, k); }},
             {"collect_all",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.collect_all = as_bool(v, k); }},
             {"nonnegative",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.search.nonnegative = as_bool(v, k); }},
             {"known_gamma",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.known_gamma = as_bool(v, k); }},
             {"per_carrier_reliability",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) {
                  s.rx.per_carrier_reliability = as_bool(v, k);
              }},
             {"max_iterations",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.max_iterations = as_int(v, k); }},
             {"passes", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.passes = as_int(v, k); }},
             {"max_passes",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.max_passes = as_int(v, k); }},
             {"outlier_tail",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.outlier_tail = as_number(v, k); }},
             {"misspecification",
              [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.rx.misspecification = as_number(v, k); }},
         }},
        {"simo",
         {
             {"antennas", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.antennas = as_int(v, k); }},
         }},
        {"multiuser",
         {
             {"stage2_wpa", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.stage2_wpa = as_bool(v, k); }},
         }},
        {"chanest",
         {
             {"pilots", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.pilots = as_int(v, k); }},
             {"reliable", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.reliable = as_int(v, k); }},
             {"cpa_passes", [](SweepSpec& s, const ConfigValue& v, const std::string& k) { s.cpa_passes = as_int(v, k); }},
         }},
    };
    return table;
}

}  // namespace

ConfigDocument parse_config(const std::string& text) {
    ConfigDocument doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::map<std::string, int> section_lines;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!is_bare_key(section)) fail(line, "invalid section name '" + section + "'");
            if (section_lines.count(section)) fail(line, "duplicate section [" + section + "]");
            section_lines[section] = line;
            doc[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (!is_bare_key(key)) fail(line, "invalid key '" + key + "'");
        auto& table = doc[section];
        if (table.count(key)) fail(line, "duplicate key '" + key + "'");
        table[key] = parse_value(s.substr(eq + 1), line);
    }
    return doc;
}

SweepSpec spec_from_config(const ConfigDocument& doc, Experiment fallback) {
    Experiment experiment = fallback;
    const auto sweep = doc.find("sweep");
    if (sweep != doc.end()) {
        const auto e = sweep->second.find("experiment");
        if (e != sweep->second.end()) {
            try {
                experiment = parse_experiment(as_string(e->second, "experiment"));
            } catch (const ConfigError& err) {
                if (std::string(err.what()).rfind("line ", 0) == 0) throw;
                fail(e->second.line, err.what());
            }
        }
    }
    SweepSpec spec = default_spec(experiment);
    for (const auto& [section, table] : doc) {
        if (section.empty()) {
            if (!table.empty()) fail(table.begin()->second.line, "key outside of a section");
            continue;
        }
        const auto known = setters().find(section);
        for (const auto& [key, value] : table) {
            if (section == "sweep" && key == "experiment") continue;
            if (known == setters().end()) fail(value.line, "unknown section [" + section + "]");
            const auto setter = known->second.find(key);
            if (setter == known->second.end()) fail(value.line, "unknown key '" + key + "' in [" + section + "]");
            setter->second(spec, value, key);
        }
    }
    return spec;
}

ConfigDocument load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace ofdmclip
