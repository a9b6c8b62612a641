#include "ecgdnn/labels.hpp"

#include <cstdlib>

#include "ecgdnn/errors.hpp"

namespace ecgdnn {

std::string_view target_name(Target t) {
  switch (t) {
    case Target::kAfib: return "AFIB";
    case Target::kRbbb: return "RBBB";
    case Target::kStach: return "STACH";
    case Target::kSbrad: return "SBRAD";
    case Target::kAvb1: return "1AVB";
    case Target::kLbbb: return "LBBB";
    case Target::kPvc: return "PVC";
  }
  return "?";
}

Target target_from_name(std::string_view name) {
  for (Target t : kAllTargets) {
    if (target_name(t) == name) return t;
  }
  throw ConfigError("unknown target: " + std::string(name));
}

LabelSet derive_labels(const std::map<std::string, double>& scp_codes) {
  LabelSet labels;
  for (const auto& [code, likelihood] : scp_codes) {
    (void)likelihood;  // presence in the map is what counts
    if (code == "AFIB") labels.set(Target::kAfib);
    else if (code == "CRBBB" || code == "IRBBB") labels.set(Target::kRbbb);
    else if (code == "CLBBB" || code == "ILBBB") labels.set(Target::kLbbb);
    else if (code == "STACH") labels.set(Target::kStach);
    else if (code == "SBRAD") labels.set(Target::kSbrad);
    else if (code == "1AVB") labels.set(Target::kAvb1);
    else if (code == "PVC") labels.set(Target::kPvc);
  }
  return labels;
}

std::map<std::string, double> parse_scp_codes(std::string_view text) {
  std::map<std::string, double> codes;
  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_ws();
  if (i < text.size() && text[i] == '{') ++i;
  while (i < text.size()) {
    skip_ws();
    if (i >= text.size() || text[i] == '}') break;
    // Key, optionally single- or double-quoted.
    std::string key;
    if (text[i] == '\'' || text[i] == '"') {
      const char quote = text[i++];
      while (i < text.size() && text[i] != quote) key.push_back(text[i++]);
      if (i >= text.size()) throw ConfigError("unterminated quote in scp_codes");
      ++i;
    } else {
      while (i < text.size() && text[i] != ':' && text[i] != ',' && text[i] != '}' &&
             text[i] != ' ') {
        key.push_back(text[i++]);
      }
    }
    skip_ws();
    double value = 0.0;
    if (i < text.size() && text[i] == ':') {
      ++i;
      skip_ws();
      std::size_t start = i;
      while (i < text.size() && text[i] != ',' && text[i] != '}') ++i;
      const std::string num(text.substr(start, i - start));
      if (!num.empty()) {
        char* end = nullptr;
        value = std::strtod(num.c_str(), &end);
        if (end == num.c_str()) throw ConfigError("bad likelihood in scp_codes: " + num);
      }
    }
    if (!key.empty()) codes[key] = value;
    skip_ws();
    if (i < text.size() && text[i] == ',') ++i;
  }
  return codes;
}

}  // namespace ecgdnn
