#include "hoi/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hoi/hashing.hpp"

namespace hoi {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at " + path + ":" + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key at " + path + ":" + std::to_string(lineno));
        cfg.kv_[key] = val;
    }
    return cfg;
}

void Config::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    f << dump();
}

void Config::set(const std::string& key, double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    kv_[key] = ss.str();
}

void Config::set(const std::string& key, int64_t v) { kv_[key] = std::to_string(v); }

std::string Config::get_str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

double Config::get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        throw std::runtime_error("config: key '" + key + "' is not a number: " + it->second);
    return v;
}

int64_t Config::get_int(const std::string& key, int64_t dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        throw std::runtime_error("config: key '" + key + "' is not an integer: " + it->second);
    return v;
}

bool Config::get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::runtime_error("config: key '" + key + "' is not a bool: " + s);
}

void Config::apply_override(const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::runtime_error("override must be key=value, got: " + spec);
    kv_[spec.substr(0, eq)] = spec.substr(eq + 1);
}

std::string Config::dump() const {
    std::ostringstream ss;
    for (const auto& [k, v] : kv_) ss << k << " = " << v << "\n";
    return ss.str();
}

std::string Config::hash() const { return hash_bytes(dump()); }

}  // namespace hoi
