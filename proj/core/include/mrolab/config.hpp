#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mrolab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text `key = value` configuration. Lines starting with '#' are
// comments; `[section]` headers prefix the following keys with "section.".
// Later assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  // Sorted `key = value` lines; stable input for hashing.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> entries_;
};

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace mrolab
