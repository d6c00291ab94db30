#pragma once

#include <map>
#include <string>
#include <vector>

namespace kips {

// Declarative `[section] key = value` files. Values are whitespace-separated
// lists; `#` starts a comment. The raw text is kept for run manifests.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_str(const std::string& section, const std::string& key) const;
    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& dflt) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double dflt) const;
    long get_long(const std::string& section, const std::string& key) const;
    long get_long(const std::string& section, const std::string& key, long dflt) const;
    bool get_bool(const std::string& section, const std::string& key, bool dflt) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    std::vector<long> get_longs(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_strs(const std::string& section, const std::string& key) const;

    const std::string& text() const { return text_; }

private:
    std::map<std::string, std::map<std::string, std::string>> kv_;
    std::string text_;
};

}  // namespace kips
