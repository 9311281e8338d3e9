#include "bucksmc/toml.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bucksmc::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

struct Cursor {
    const std::string& s;
    std::size_t pos = 0;
    int line;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    void skip_ws() {
        while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
};

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string parse_key(Cursor& c) {
    c.skip_ws();
    std::size_t start = c.pos;
    while (!c.done() && is_key_char(c.peek())) ++c.pos;
    if (c.pos == start) fail(c.line, "expected a key");
    return c.s.substr(start, c.pos - start);
}

Value parse_value(Cursor& c);

std::string parse_string_body(Cursor& c) {
    ++c.pos; // opening quote
    std::string out;
    while (!c.done() && c.peek() != '"') {
        if (c.peek() == '\\') {
            ++c.pos;
            if (c.done()) break;
            switch (c.peek()) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            default: fail(c.line, "unsupported escape in string");
            }
            ++c.pos;
        } else {
            out.push_back(c.peek());
            ++c.pos;
        }
    }
    if (c.done()) fail(c.line, "unterminated string");
    ++c.pos; // closing quote
    return out;
}

Value parse_inline_table(Cursor& c) {
    Value v;
    v.kind = Value::Kind::Table;
    v.line = c.line;
    ++c.pos; // {
    c.skip_ws();
    if (!c.done() && c.peek() == '}') {
        ++c.pos;
        return v;
    }
    for (;;) {
        const std::string key = parse_key(c);
        c.skip_ws();
        if (c.done() || c.peek() != '=') fail(c.line, "expected '=' in inline table");
        ++c.pos;
        c.skip_ws();
        Value item = parse_value(c);
        for (const auto& e : v.table)
            if (e.first == key) fail(c.line, "duplicate key '" + key + "' in inline table");
        v.table.emplace_back(key, std::move(item));
        c.skip_ws();
        if (c.done()) fail(c.line, "unterminated inline table");
        if (c.peek() == ',') {
            ++c.pos;
            c.skip_ws();
            continue;
        }
        if (c.peek() == '}') {
            ++c.pos;
            return v;
        }
        fail(c.line, "expected ',' or '}' in inline table");
    }
}

Value parse_array(Cursor& c) {
    Value v;
    v.kind = Value::Kind::Array;
    v.line = c.line;
    ++c.pos; // [
    c.skip_ws();
    if (!c.done() && c.peek() == ']') {
        ++c.pos;
        return v;
    }
    for (;;) {
        c.skip_ws();
        v.array.push_back(parse_value(c));
        c.skip_ws();
        if (c.done()) fail(c.line, "unterminated array");
        if (c.peek() == ',') {
            ++c.pos;
            continue;
        }
        if (c.peek() == ']') {
            ++c.pos;
            return v;
        }
        fail(c.line, "expected ',' or ']' in array");
    }
}

Value parse_value(Cursor& c) {
    c.skip_ws();
    if (c.done()) fail(c.line, "expected a value");
    Value v;
    v.line = c.line;
    const char ch = c.peek();
    if (ch == '"') {
        v.kind = Value::Kind::String;
        v.string = parse_string_body(c);
        return v;
    }
    if (ch == '{') return parse_inline_table(c);
    if (ch == '[') return parse_array(c);
    if (c.s.compare(c.pos, 4, "true") == 0 && (c.pos + 4 >= c.s.size() || !is_key_char(c.s[c.pos + 4]))) {
        v.kind = Value::Kind::Bool;
        v.boolean = true;
        c.pos += 4;
        return v;
    }
    if (c.s.compare(c.pos, 5, "false") == 0 && (c.pos + 5 >= c.s.size() || !is_key_char(c.s[c.pos + 5]))) {
        v.kind = Value::Kind::Bool;
        v.boolean = false;
        c.pos += 5;
        return v;
    }
    // number: allow digits, sign, dot, exponent and TOML '_' separators
    std::size_t start = c.pos;
    while (!c.done()) {
        const char d = c.peek();
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '+' || d == '-' || d == '.' ||
            d == 'e' || d == 'E' || d == '_') {
            ++c.pos;
        } else {
            break;
        }
    }
    if (c.pos == start) fail(c.line, "unrecognized value");
    std::string text = c.s.substr(start, c.pos - start);
    std::erase(text, '_');
    char* end = nullptr;
    v.kind = Value::Kind::Number;
    v.number = std::strtod(text.c_str(), &end);
    if (end == nullptr || *end != '\0') fail(c.line, "malformed number '" + text + "'");
    return v;
}

} // namespace

double Value::as_number(const std::string& key) const {
    if (kind != Kind::Number)
        fail(line, "key '" + key + "' must be a number");
    return number;
}

bool Value::as_bool(const std::string& key) const {
    if (kind != Kind::Bool) fail(line, "key '" + key + "' must be a boolean");
    return boolean;
}

const std::string& Value::as_string(const std::string& key) const {
    if (kind != Kind::String) fail(line, "key '" + key + "' must be a string");
    return string;
}

const Value* Value::find(const std::string& name) const {
    for (const auto& e : table)
        if (e.first == name) return &e.second;
    return nullptr;
}

const Value* Section::find(const std::string& key) const {
    for (const auto& e : entries)
        if (e.first == key) return &e.second;
    return nullptr;
}

const Section* Document::find(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

Document parse(const std::string& text) {
    Document doc;
    Section* current = nullptr;
    int line_no = 0;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        Cursor c{raw, 0, line_no};
        c.skip_ws();
        if (c.done() || c.peek() == '#') continue;
        if (c.peek() == '[') {
            ++c.pos;
            const std::string name = parse_key(c);
            c.skip_ws();
            if (c.done() || c.peek() != ']') fail(line_no, "malformed section header");
            ++c.pos;
            c.skip_ws();
            if (!c.done() && c.peek() != '#') fail(line_no, "trailing text after section header");
            if (doc.find(name) != nullptr)
                fail(line_no, "duplicate section [" + name + "]");
            doc.sections.push_back(Section{name, line_no, {}});
            current = &doc.sections.back();
            continue;
        }
        const std::string key = parse_key(c);
        c.skip_ws();
        if (c.done() || c.peek() != '=') fail(line_no, "expected '=' after key '" + key + "'");
        ++c.pos;
        Value v = parse_value(c);
        c.skip_ws();
        if (!c.done() && c.peek() != '#') fail(line_no, "trailing text after value for '" + key + "'");
        if (current == nullptr) {
            doc.sections.push_back(Section{"", 0, {}});
            current = &doc.sections.back();
        }
        if (current->find(key) != nullptr)
            fail(line_no, "duplicate key '" + key + "' in section [" + current->name + "]");
        current->entries.emplace_back(key, std::move(v));
    }
    return doc;
}

Document parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

} // namespace bucksmc::toml
