#pragma once

#include <map>
#include <string>
#include <vector>

namespace hoi {

// Flat key=value run configuration. '#' starts a comment; whitespace around
// keys and values is trimmed. Keys are dotted paths, e.g. "tracker.iou_match_min".
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    void save(const std::string& path) const;  // keys written sorted

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set(const std::string& key, double v);
    void set(const std::string& key, int64_t v);

    std::string get_str(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key, double dflt) const;
    int64_t get_int(const std::string& key, int64_t dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;

    // "key=value" override string, as accepted by the CLI.
    void apply_override(const std::string& spec);

    std::string dump() const;  // sorted canonical text form
    std::string hash() const;  // hash of dump()

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace hoi
