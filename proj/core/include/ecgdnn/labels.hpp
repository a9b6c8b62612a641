#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace ecgdnn {

/// The 7 binary classification targets. The order is the canonical on-disk
/// order (manifest columns, cache label bytes).
enum class Target : std::uint8_t {
  kAfib = 0,
  kRbbb = 1,
  kStach = 2,
  kSbrad = 3,
  kAvb1 = 4,
  kLbbb = 5,
  kPvc = 6,
};

inline constexpr std::size_t kNumTargets = 7;
inline constexpr std::array<Target, kNumTargets> kAllTargets = {
    Target::kAfib, Target::kRbbb, Target::kStach, Target::kSbrad,
    Target::kAvb1, Target::kLbbb, Target::kPvc};

std::string_view target_name(Target t);

/// Parses "AFIB", "1AVB", ... (case sensitive). Throws ConfigError.
Target target_from_name(std::string_view name);

/// Multi-label membership flags for the 7 targets.
struct LabelSet {
  std::array<bool, kNumTargets> flags{};

  bool get(Target t) const { return flags[static_cast<std::size_t>(t)]; }
  void set(Target t, bool v = true) { flags[static_cast<std::size_t>(t)] = v; }
  bool any() const {
    for (bool f : flags)
      if (f) return true;
    return false;
  }
  bool operator==(const LabelSet&) const = default;
};

/// Maps SCP-ECG statement codes to target flags. Complete and incomplete
/// bundle branch blocks merge into one flag (CRBBB/IRBBB -> RBBB,
/// CLBBB/ILBBB -> LBBB). Any listed code counts as present regardless of
/// its likelihood, including 0. Unknown codes are ignored.
LabelSet derive_labels(const std::map<std::string, double>& scp_codes);

/// Parses a serialized scp_codes map. Accepts the PTB-XL python-dict style
/// ("{'CRBBB': 100.0, 'AFIB': 80.0}") and the bare form ("{CRBBB:100,AFIB:80}").
std::map<std::string, double> parse_scp_codes(std::string_view text);

}  // namespace ecgdnn
