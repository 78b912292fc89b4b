#pragma once

// Flat sectioned key/value configuration files:
//
//   # comment
//   task = copy
//   [model]
//   M = 30
//   P = 0, 1, 30
//
// Keys inside a [section] are addressed as "section.key". Values are
// trimmed strings; list-valued keys are comma separated.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace alrnn {

class ConfigFile {
public:
    static ConfigFile parse(std::istream& in);
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const; // throws if missing
    std::string get(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<long> get_int_list(const std::string& key,
                                   const std::vector<long>& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    /// Canonical "key = value" rendering, sorted by key. Hashing this
    /// gives a stable identity for resume checks.
    std::string canonical() const;

    const std::map<std::string, std::string>& values() const { return values_; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace alrnn
