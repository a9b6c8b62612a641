#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/metadata.hpp"
#include "ecgdnn/wfdb.hpp"

namespace ecgdnn {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

std::string_view split_name(Split s);
Split split_from_string(std::string_view s);

struct ManifestRow {
  std::string record_id;
  std::string path;  // record path, no extension
  double sampling_rate = 0.0;
  double duration_s = 0.0;
  double age = 0.0;
  Sex sex = Sex::kUnknown;
  std::optional<int> strat_fold;
  LabelSet labels;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::string provenance;

  std::size_t count_positive(Target t) const;
};

/// Why a record was excluded while building a manifest.
enum class FilterReason : std::uint8_t {
  kUnderage = 0,     // age < 18 or unknown
  kDuration = 1,     // outside [9, 10] s
  kSamplingRate = 2, // not 500 or 1000 Hz
  kLeadCount = 3,    // header does not carry 12 signals
  kNoHeader = 4,     // no header found for the metadata row
  kDuplicateId = 5,  // record id seen before; first occurrence kept
};

std::string_view filter_reason_name(FilterReason r);

struct FilterLogEntry {
  std::string record_id;
  FilterReason reason;
};

struct FilterResult {
  DatasetManifest manifest;
  std::vector<FilterLogEntry> rejected;
};

/// Joins metadata and headers by record id and keeps rows with age >= 18,
/// duration within [9, 10] s and sampling rate 500 or 1000 Hz. Rejections
/// are returned, not raised. Labels are derived from scp_codes.
FilterResult filter_records(const std::vector<RecordMeta>& metas,
                            const std::vector<WfdbHeader>& headers);

/// Assigns splits from PTB-XL style stratified folds: test_fold -> test,
/// val_fold -> val, everything else -> train. Throws MissingFold if a row
/// has no fold.
void split_by_fold(DatasetManifest& manifest, int test_fold = 10, int val_fold = 9);

/// Manifest CSV: optional leading "# ..." provenance comment, then a header
/// row and one row per record with the 7 label flags as 0/1 columns.
void write_manifest_csv(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest_csv(const std::string& path);

}  // namespace ecgdnn
