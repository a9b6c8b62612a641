#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"

namespace ecgdnn {

enum class Sex : std::uint8_t { kMale = 0, kFemale = 1, kUnknown = 2 };

std::string_view sex_name(Sex s);
Sex sex_from_string(std::string_view s);

struct RecordMeta {
  std::string record_id;
  double age = 0.0;  // years
  Sex sex = Sex::kUnknown;
  std::optional<int> strat_fold;  // 1..10 when present
  std::map<std::string, double> scp_codes;
  std::string path;  // record path relative to the dataset root, no extension
};

/// Loads a PTB-XL style metadata CSV. Required columns: ecg_id, age, sex,
/// scp_codes, strat_fold, filename_hr. Column order is free; extra columns
/// are ignored. sex accepts 0/1 (PTB-XL: 0=male, 1=female) or male/female.
/// An empty strat_fold cell leaves the fold unset.
std::vector<RecordMeta> load_metadata_csv(const std::string& path);

}  // namespace ecgdnn
