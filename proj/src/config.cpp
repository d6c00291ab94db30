#include "kips/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kips/errors.hpp"

namespace kips {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    cfg.text_ = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: bad section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        cfg.kv_[section][key] = val;
    }
    return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
    const auto s = kv_.find(section);
    return s != kv_.end() && s->second.count(key) > 0;
}

std::string Config::get_str(const std::string& section, const std::string& key) const {
    const auto s = kv_.find(section);
    if (s == kv_.end() || !s->second.count(key))
        throw ConfigError("config: missing [" + section + "] " + key);
    return s->second.at(key);
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& dflt) const {
    return has(section, key) ? get_str(section, key) : dflt;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get_str(section, key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: [" + section + "] " + key + " is not a number: " + v);
    return d;
}

double Config::get_double(const std::string& section, const std::string& key, double dflt) const {
    return has(section, key) ? get_double(section, key) : dflt;
}

long Config::get_long(const std::string& section, const std::string& key) const {
    const std::string v = get_str(section, key);
    char* end = nullptr;
    const long l = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: [" + section + "] " + key + " is not an integer: " + v);
    return l;
}

long Config::get_long(const std::string& section, const std::string& key, long dflt) const {
    return has(section, key) ? get_long(section, key) : dflt;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool dflt) const {
    if (!has(section, key)) return dflt;
    const std::string v = get_str(section, key);
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: [" + section + "] " + key + " is not a bool: " + v);
}

std::vector<std::string> Config::get_strs(const std::string& section, const std::string& key) const {
    std::istringstream ss(get_str(section, key));
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : get_strs(section, key)) {
        char* end = nullptr;
        const double d = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw ConfigError("config: [" + section + "] " + key + " has a non-number: " + tok);
        out.push_back(d);
    }
    return out;
}

std::vector<long> Config::get_longs(const std::string& section, const std::string& key) const {
    std::vector<long> out;
    for (const auto& tok : get_strs(section, key)) {
        char* end = nullptr;
        const long l = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0')
            throw ConfigError("config: [" + section + "] " + key + " has a non-integer: " + tok);
        out.push_back(l);
    }
    return out;
}

}  // namespace kips
