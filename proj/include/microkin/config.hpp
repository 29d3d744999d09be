#pragma once
// Sectioned key = value configuration files.
//
//   [section]
//   key = value        # full-line comments start with '#' or ';'
//
// Parsing is strict: unknown syntax, duplicate keys inside a section and
// malformed numbers are reported with line/column positions.  serialize()
// followed by parse() is the identity on a Config.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace microkin::cfg {

struct ConfigError : std::runtime_error {
    int line = 0;
    int column = 0;
    ConfigError(int ln, int col, const std::string& msg)
        : std::runtime_error("config error at line " + std::to_string(ln) + ", column " +
                             std::to_string(col) + ": " + msg),
          line(ln), column(col) {}
};

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;  // insertion order

    bool has(const std::string& key) const {
        for (const auto& kv : entries)
            if (kv.first == key) return true;
        return false;
    }
    const std::string& raw(const std::string& key) const {
        for (const auto& kv : entries)
            if (kv.first == key) return kv.second;
        throw std::out_of_range("missing key '" + key + "' in section [" + name + "]");
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& kv : entries)
            if (kv.first == key) { kv.second = value; return; }
        entries.emplace_back(key, value);
    }
    void set(const std::string& key, double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        set(key, std::string(buf));
    }
    void set(const std::string& key, int v) { set(key, std::to_string(v)); }
    void set(const std::string& key, long long v) { set(key, std::to_string(v)); }

    double get_double(const std::string& key) const {
        const std::string& s = raw(key);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw std::runtime_error("key '" + key + "' in [" + name + "] is not a number: '" + s + "'");
        return v;
    }
    long long get_int(const std::string& key) const {
        const std::string& s = raw(key);
        char* end = nullptr;
        long long v = std::strtoll(s.c_str(), &end, 10);
        if (end == s.c_str() || *end != '\0')
            throw std::runtime_error("key '" + key + "' in [" + name + "] is not an integer: '" + s + "'");
        return v;
    }
    bool get_bool(const std::string& key) const {
        std::string s = raw(key);
        if (s == "true" || s == "yes" || s == "1") return true;
        if (s == "false" || s == "no" || s == "0") return false;
        throw std::runtime_error("key '" + key + "' in [" + name + "] is not a boolean: '" + s + "'");
    }
    std::string get_string(const std::string& key) const { return raw(key); }

    double get_double_or(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }
    long long get_int_or(const std::string& key, long long dflt) const {
        return has(key) ? get_int(key) : dflt;
    }
    std::string get_string_or(const std::string& key, const std::string& dflt) const {
        return has(key) ? raw(key) : dflt;
    }
    bool operator==(const Section& o) const { return name == o.name && entries == o.entries; }
};

struct Config {
    std::vector<Section> sections;  // insertion order

    bool has(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return true;
        return false;
    }
    const Section& section(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return s;
        throw std::out_of_range("missing section [" + name + "]");
    }
    Section& section(const std::string& name) {
        for (auto& s : sections)
            if (s.name == name) return s;
        sections.push_back(Section{name, {}});
        return sections.back();
    }
    bool operator==(const Config& o) const { return sections == o.sections; }
};

inline Config parse(const std::string& text) {
    Config cfg;
    Section* cur = nullptr;
    std::istringstream in(text);
    std::string rawline;
    int ln = 0;
    while (std::getline(in, rawline)) {
        ++ln;
        if (!rawline.empty() && rawline.back() == '\r') rawline.pop_back();
        std::string line = trim(rawline);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line[0] == '[') {
            size_t close = line.find(']');
            if (close == std::string::npos)
                throw ConfigError(ln, static_cast<int>(rawline.find('[')) + 1, "unterminated section header");
            std::string name = trim(line.substr(1, close - 1));
            if (name.empty()) throw ConfigError(ln, 1, "empty section name");
            if (trim(line.substr(close + 1)).size())
                throw ConfigError(ln, static_cast<int>(close) + 2, "trailing characters after section header");
            cfg.sections.push_back(Section{name, {}});
            cur = &cfg.sections.back();
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(ln, 1, "expected 'key = value' or '[section]'");
        if (!cur)
            throw ConfigError(ln, 1, "key outside of any section");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(ln, 1, "empty key");
        if (cur->has(key)) throw ConfigError(ln, 1, "duplicate key '" + key + "' in section [" + cur->name + "]");
        cur->entries.emplace_back(key, val);
    }
    return cfg;
}

inline Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

inline std::string serialize(const Config& cfg) {
    std::ostringstream out;
    bool first = true;
    for (const auto& s : cfg.sections) {
        if (!first) out << "\n";
        first = false;
        out << "[" << s.name << "]\n";
        for (const auto& kv : s.entries) out << kv.first << " = " << kv.second << "\n";
    }
    return out.str();
}

}  // namespace microkin::cfg
