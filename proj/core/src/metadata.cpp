#include "ecgdnn/metadata.hpp"

#include <algorithm>
#include <cstdlib>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

std::string_view sex_name(Sex s) {
  switch (s) {
    case Sex::kMale: return "male";
    case Sex::kFemale: return "female";
    case Sex::kUnknown: return "unknown";
  }
  return "?";
}

Sex sex_from_string(std::string_view s) {
  if (s == "0" || s == "male" || s == "M" || s == "m") return Sex::kMale;
  if (s == "1" || s == "female" || s == "F" || s == "f") return Sex::kFemale;
  return Sex::kUnknown;
}

namespace {

int find_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return -1;
  return static_cast<int>(it - header.begin());
}

double parse_double_or(const std::string& s, double fallback) {
  if (s.empty()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return end == s.c_str() ? fallback : v;
}

}  // namespace

std::vector<RecordMeta> load_metadata_csv(const std::string& path) {
  const auto lines = split_lines(read_text_file(path));
  if (lines.empty()) throw IoError("empty metadata file: " + path);

  const auto header = csv_split(lines[0]);
  const int col_id = find_column(header, "ecg_id");
  const int col_age = find_column(header, "age");
  const int col_sex = find_column(header, "sex");
  const int col_scp = find_column(header, "scp_codes");
  const int col_fold = find_column(header, "strat_fold");
  const int col_file = find_column(header, "filename_hr");
  for (auto [col, name] : {std::pair{col_id, "ecg_id"}, {col_age, "age"}, {col_sex, "sex"},
                           {col_scp, "scp_codes"}, {col_fold, "strat_fold"},
                           {col_file, "filename_hr"}}) {
    if (col < 0) throw IoError(std::string("metadata missing column ") + name + ": " + path);
  }

  std::vector<RecordMeta> metas;
  metas.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv_split(lines[i]);
    const auto field = [&](int col) -> std::string {
      return col < static_cast<int>(fields.size()) ? fields[static_cast<std::size_t>(col)] : "";
    };
    RecordMeta meta;
    meta.record_id = field(col_id);
    if (meta.record_id.empty()) {
      throw IoError("metadata row " + std::to_string(i + 1) + " has no ecg_id");
    }
    meta.age = parse_double_or(field(col_age), -1.0);
    meta.sex = sex_from_string(field(col_sex));
    meta.scp_codes = parse_scp_codes(field(col_scp));
    const std::string fold = field(col_fold);
    if (!fold.empty()) {
      const int f = static_cast<int>(parse_double_or(fold, 0));
      if (f < 1 || f > 10) {
        throw IoError("strat_fold out of range [1,10] in row " + std::to_string(i + 1));
      }
      meta.strat_fold = f;
    }
    meta.path = field(col_file);
    metas.push_back(std::move(meta));
  }
  return metas;
}

}  // namespace ecgdnn
