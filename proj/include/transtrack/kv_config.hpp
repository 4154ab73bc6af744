#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace transtrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
/// Values are read through typed getters; finish() rejects keys nobody read.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig parse(std::istream& in);
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  /// Copies every entry of other over this one.
  void merge(const KvConfig& other);

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  const std::string* lookup(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace transtrack
