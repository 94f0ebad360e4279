#pragma once

#include <map>
#include <string>

namespace teg {

/// Flat-sectioned text config: `[section]` headers, `key = value` lines,
/// `#` comments. Keys are addressed as "section.key".
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// sweep overrides: "section.key=value"
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace teg
