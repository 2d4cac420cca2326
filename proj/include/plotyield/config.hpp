#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "plotyield/error.hpp"

namespace plotyield {

// TOML-style configuration: [section] headers, key = value pairs, # comments.
// Values are strings ("..."), booleans, numbers, or flat numeric arrays.
class Config {
public:
    using Value = std::variant<bool, int64_t, double, std::string, std::vector<double>>;

    static Config parse(const std::string& text, const std::string& origin = "<config>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = strip(strip_comment(line));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    fail("config_parse", origin + ":" + std::to_string(line_no) +
                                             ": unterminated section header");
                section = strip(s.substr(1, s.size() - 2));
                if (section.empty())
                    fail("config_parse", origin + ":" + std::to_string(line_no) +
                                             ": empty section name");
                continue;
            }
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                fail("config_parse",
                     origin + ":" + std::to_string(line_no) + ": expected key = value");
            std::string key = strip(s.substr(0, eq));
            std::string raw = strip(s.substr(eq + 1));
            if (key.empty() || raw.empty())
                fail("config_parse",
                     origin + ":" + std::to_string(line_no) + ": empty key or value");
            cfg.values_[section][key] = parse_value(raw, origin, line_no);
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail("config_open", "cannot open config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        return s != values_.end() && s->second.count(key) > 0;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const Value* v = find(section, key);
        if (!v) return fallback;
        if (std::holds_alternative<double>(*v)) return std::get<double>(*v);
        if (std::holds_alternative<int64_t>(*v))
            return static_cast<double>(std::get<int64_t>(*v));
        fail("config_type", "[" + section + "] " + key + " must be a number");
    }

    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const {
        const Value* v = find(section, key);
        if (!v) return fallback;
        if (std::holds_alternative<int64_t>(*v)) return std::get<int64_t>(*v);
        fail("config_type", "[" + section + "] " + key + " must be an integer");
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        const Value* v = find(section, key);
        if (!v) return fallback;
        if (std::holds_alternative<bool>(*v)) return std::get<bool>(*v);
        fail("config_type", "[" + section + "] " + key + " must be a boolean");
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        const Value* v = find(section, key);
        if (!v) return fallback;
        if (std::holds_alternative<std::string>(*v)) return std::get<std::string>(*v);
        fail("config_type", "[" + section + "] " + key + " must be a string");
    }

    std::vector<double> get_array(const std::string& section, const std::string& key,
                                  std::vector<double> fallback) const {
        const Value* v = find(section, key);
        if (!v) return fallback;
        if (std::holds_alternative<std::vector<double>>(*v))
            return std::get<std::vector<double>>(*v);
        fail("config_type", "[" + section + "] " + key + " must be an array of numbers");
    }

private:
    static std::string strip(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    // drop a trailing # comment, respecting quoted strings
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            else if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }

    static Value parse_value(const std::string& raw, const std::string& origin, size_t line_no) {
        auto err = [&](const std::string& msg) -> Value {
            fail("config_parse", origin + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"') return err("unterminated string");
            return raw.substr(1, raw.size() - 2);
        }
        if (raw == "true") return true;
        if (raw == "false") return false;
        if (raw.front() == '[') {
            if (raw.back() != ']') return err("unterminated array");
            std::vector<double> arr;
            std::string inner = raw.substr(1, raw.size() - 2);
            std::istringstream ss(inner);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = strip(item);
                if (item.empty()) return err("empty array element");
                try {
                    size_t pos = 0;
                    arr.push_back(std::stod(item, &pos));
                    if (pos != item.size()) return err("bad array element '" + item + "'");
                } catch (const std::exception&) {
                    return err("bad array element '" + item + "'");
                }
            }
            return arr;
        }
        // integer first, then float
        try {
            size_t pos = 0;
            int64_t i = std::stoll(raw, &pos);
            if (pos == raw.size()) return i;
        } catch (const std::exception&) {
        }
        try {
            size_t pos = 0;
            double d = std::stod(raw, &pos);
            if (pos == raw.size()) return d;
        } catch (const std::exception&) {
        }
        return err("cannot parse value '" + raw + "'");
    }

    const Value* find(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        if (s == values_.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    std::map<std::string, std::map<std::string, Value>> values_;
};

}  // namespace plotyield
