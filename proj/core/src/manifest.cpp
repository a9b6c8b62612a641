#include "ecgdnn/manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <unordered_map>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split: " + std::string(s));
}

std::string_view filter_reason_name(FilterReason r) {
  switch (r) {
    case FilterReason::kUnderage: return "underage";
    case FilterReason::kDuration: return "duration";
    case FilterReason::kSamplingRate: return "sampling_rate";
    case FilterReason::kLeadCount: return "lead_count";
    case FilterReason::kNoHeader: return "no_header";
    case FilterReason::kDuplicateId: return "duplicate_id";
  }
  return "?";
}

std::size_t DatasetManifest::count_positive(Target t) const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.labels.get(t) ? 1 : 0;
  return n;
}

FilterResult filter_records(const std::vector<RecordMeta>& metas,
                            const std::vector<WfdbHeader>& headers) {
  std::unordered_map<std::string, const WfdbHeader*> by_id;
  by_id.reserve(headers.size());
  for (const auto& h : headers) by_id[h.record_name] = &h;

  FilterResult result;
  result.manifest.rows.reserve(metas.size());
  std::unordered_map<std::string, bool> seen;
  for (const auto& meta : metas) {
    if (!seen.emplace(meta.record_id, true).second) {
      result.rejected.push_back({meta.record_id, FilterReason::kDuplicateId});
      continue;
    }
    const auto it = by_id.find(meta.record_id);
    if (it == by_id.end()) {
      result.rejected.push_back({meta.record_id, FilterReason::kNoHeader});
      continue;
    }
    const WfdbHeader& header = *it->second;
    const double duration = header.sampling_rate > 0
                                ? static_cast<double>(header.num_samples) / header.sampling_rate
                                : 0.0;
    if (header.num_signals != 12) {
      result.rejected.push_back({meta.record_id, FilterReason::kLeadCount});
      continue;
    }
    if (!(meta.age >= 18.0)) {
      result.rejected.push_back({meta.record_id, FilterReason::kUnderage});
      continue;
    }
    if (!(duration >= 9.0 && duration <= 10.0)) {
      result.rejected.push_back({meta.record_id, FilterReason::kDuration});
      continue;
    }
    if (header.sampling_rate != 500.0 && header.sampling_rate != 1000.0) {
      result.rejected.push_back({meta.record_id, FilterReason::kSamplingRate});
      continue;
    }
    ManifestRow row;
    row.record_id = meta.record_id;
    row.path = meta.path.empty() ? meta.record_id : meta.path;
    row.sampling_rate = header.sampling_rate;
    row.duration_s = duration;
    row.age = meta.age;
    row.sex = meta.sex;
    row.strat_fold = meta.strat_fold;
    row.labels = derive_labels(meta.scp_codes);
    result.manifest.rows.push_back(std::move(row));
  }
  return result;
}

void split_by_fold(DatasetManifest& manifest, int test_fold, int val_fold) {
  for (auto& row : manifest.rows) {
    if (!row.strat_fold.has_value()) {
      throw MissingFold("record " + row.record_id + " has no strat_fold");
    }
    const int fold = *row.strat_fold;
    if (fold == test_fold) row.split = Split::kTest;
    else if (fold == val_fold) row.split = Split::kVal;
    else row.split = Split::kTrain;
  }
}

namespace {

std::string format_num(double v) {
  char buf[64];
  if (v == static_cast<long long>(v)) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  }
  return buf;
}

}  // namespace

void write_manifest_csv(const DatasetManifest& manifest, const std::string& path) {
  std::string out;
  if (!manifest.provenance.empty()) {
    out += "# " + manifest.provenance + "\n";
  }
  out += "record_id,path,sampling_rate,duration_s,age,sex,strat_fold";
  for (Target t : kAllTargets) out += "," + std::string(target_name(t));
  out += ",split\n";
  for (const auto& row : manifest.rows) {
    std::vector<std::string> fields = {
        row.record_id,
        row.path,
        format_num(row.sampling_rate),
        format_num(row.duration_s),
        format_num(row.age),
        std::string(sex_name(row.sex)),
        row.strat_fold ? std::to_string(*row.strat_fold) : "",
    };
    for (Target t : kAllTargets) fields.push_back(row.labels.get(t) ? "1" : "0");
    fields.emplace_back(split_name(row.split));
    out += csv_join(fields) + "\n";
  }
  write_text_file(path, out);
}

DatasetManifest read_manifest_csv(const std::string& path) {
  const auto lines = split_lines(read_text_file(path));
  DatasetManifest manifest;
  std::size_t first = 0;
  if (first < lines.size() && !lines[first].empty() && lines[first][0] == '#') {
    manifest.provenance = lines[first].substr(lines[first].find_first_not_of("# "));
    ++first;
  }
  if (first >= lines.size()) throw IoError("manifest has no header row: " + path);
  const auto header = csv_split(lines[first]);
  const std::size_t expected_cols = 7 + kNumTargets + 1;
  if (header.size() != expected_cols || header[0] != "record_id") {
    throw IoError("unrecognized manifest header: " + path);
  }

  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != expected_cols) {
      throw IoError("manifest row " + std::to_string(i + 1) + " has " +
                    std::to_string(f.size()) + " fields, expected " +
                    std::to_string(expected_cols));
    }
    ManifestRow row;
    row.record_id = f[0];
    row.path = f[1];
    row.sampling_rate = std::atof(f[2].c_str());
    row.duration_s = std::atof(f[3].c_str());
    row.age = std::atof(f[4].c_str());
    row.sex = sex_from_string(f[5]);
    if (!f[6].empty()) row.strat_fold = std::atoi(f[6].c_str());
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      row.labels.set(static_cast<Target>(t), f[7 + t] == "1");
    }
    row.split = split_from_string(f[7 + kNumTargets]);
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

}  // namespace ecgdnn
