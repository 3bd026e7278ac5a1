// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace implicity {

/// Flat key=value configuration. '#' starts a comment; blank lines are ignored.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  /// Keys in sorted order, one `key=value` per line.
  std::string to_string() const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Entries of `overrides` replace entries here.
  void merge(const KvConfig& overrides);

 private:
  std::map<std::string, std::string> values_;
};

std::string format_double(double v);

}  // namespace implicity
