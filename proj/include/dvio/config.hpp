#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dvio {

// Line-oriented "key = value" file. "[section]" headers prefix the keys that
// follow with "section.". '#' and ';' start comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  std::string to_string() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

}  // namespace dvio
