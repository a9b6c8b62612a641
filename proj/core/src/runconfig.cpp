#include "ecgdnn/runconfig.hpp"

#include <algorithm>
#include <cstdlib>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::string section;
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("unterminated section header at line " + std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value at line " + std::to_string(line_no) + ": " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(line_no));
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_text_file(path)); }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("bad number for " + key + ": " + it->second);
  }
  return v;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  return static_cast<int>(v);
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("bad integer for " + key + ": " + it->second);
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + it->second);
}

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& tok : csv_split(it->second)) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw ConfigError("bad list entry for " + key + ": " + tok);
    out.push_back(v);
  }
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (double v : get_double_list(key, {})) out.push_back(static_cast<int>(v));
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void RunConfig::require_known_keys(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown configuration key: " + key);
    }
  }
}

}  // namespace ecgdnn
