#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecgdnn {

/// Plain-text run configuration: `key = value` lines grouped by [section]
/// headers, '#' comments, blank lines ignored. Keys are section-qualified
/// ("training.lr"). Unknown keys are hard errors at validation time.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  /// Overrides (e.g. from command-line flags) take precedence over file
  /// values.
  void set(const std::string& key, const std::string& value);

  /// Throws ConfigError naming the first key not in the allowed set.
  void require_known_keys(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ecgdnn
