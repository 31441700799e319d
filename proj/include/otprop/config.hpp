#pragma once

// Flat key=value configuration files. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace otprop {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Keys present in the file but not in `known`.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_ = "<config>";
};

/// Comma-separated tokens, whitespace trimmed, empty tokens dropped.
std::vector<std::string> split_list(const std::string& text, char sep = ',');
double parse_number(const std::string& text, const std::string& what);

}  // namespace otprop
