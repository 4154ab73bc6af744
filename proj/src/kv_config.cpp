#include "transtrack/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace transtrack {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

KvConfig KvConfig::parse(std::istream& in) {
  KvConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse(in);
}

KvConfig KvConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

const std::string* KvConfig::lookup(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) {
  const std::string* v = lookup(key);
  return v != nullptr ? *v : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) {
  const std::string* v = lookup(key);
  return v != nullptr ? parse_number<double>(key, *v) : fallback;
}

int KvConfig::get_int(const std::string& key, int fallback) {
  const std::string* v = lookup(key);
  return v != nullptr ? parse_number<int>(key, *v) : fallback;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = lookup(key);
  return v != nullptr ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  const std::string* v = lookup(key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<int> KvConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) {
  const std::string* v = lookup(key);
  if (v == nullptr) return fallback;
  std::vector<int> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item));
  }
  return out;
}

void KvConfig::finish() const {
  for (const auto& [k, v] : values_) {
    if (!used_.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

}  // namespace transtrack
