#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace omnivid {

// Flat key=value config files. '#' starts a comment, blank lines ignored.
class KvConfig {
  public:
    KvConfig() = default;
    static KvConfig from_file(const std::string& path);
    static KvConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

    void set(const std::string& key, const std::string& v) { kv_[key] = v; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace omnivid
