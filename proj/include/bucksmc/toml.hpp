#pragma once

// Minimal TOML reader covering the config surface of this project:
// [section] headers, key = value pairs with numbers, booleans, strings,
// string arrays and one-level inline tables, # comments. Values remember
// their source line so config errors can point at them.

#include <map>
#include <string>
#include <vector>

#include "bucksmc/errors.hpp"

namespace bucksmc::toml {

struct Value {
    enum class Kind { Number, Bool, String, Array, Table };
    Kind kind = Kind::Number;
    double number = 0.0;
    bool boolean = false;
    std::string string;
    std::vector<Value> array;
    std::vector<std::pair<std::string, Value>> table; // inline table, ordered
    int line = 0;

    bool is_number() const { return kind == Kind::Number; }

    double as_number(const std::string& key) const;
    bool as_bool(const std::string& key) const;
    const std::string& as_string(const std::string& key) const;
    const Value* find(const std::string& name) const;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, Value>> entries; // ordered
    const Value* find(const std::string& key) const;
};

struct Document {
    std::vector<Section> sections; // root keys live in a section named ""
    const Section* find(const std::string& name) const;
};

/// Parses TOML text; throws ConfigError with line information.
Document parse(const std::string& text);

/// Parses the file at path.
Document parse_file(const std::string& path);

} // namespace bucksmc::toml
