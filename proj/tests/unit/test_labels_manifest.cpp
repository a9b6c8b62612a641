#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/manifest.hpp"
#include "ecgdnn/metadata.hpp"
#include "ecgdnn/prng.hpp"

using namespace ecgdnn;

namespace {

WfdbHeader make_header(const std::string& id, int nsig, double fs, std::int64_t nsamp) {
  WfdbHeader h;
  h.record_name = id;
  h.num_signals = nsig;
  h.sampling_rate = fs;
  h.num_samples = nsamp;
  h.signals.resize(static_cast<std::size_t>(nsig));
  return h;
}

RecordMeta make_meta(const std::string& id, double age, int fold) {
  RecordMeta m;
  m.record_id = id;
  m.age = age;
  m.strat_fold = fold;
  return m;
}

}  // namespace

TEST_SUITE("labels") {

TEST_CASE("bundle branch blocks merge") {
  const auto l1 = derive_labels({{"CRBBB", 100.0}, {"AFIB", 80.0}});
  CHECK(l1.get(Target::kRbbb));
  CHECK(l1.get(Target::kAfib));
  CHECK_FALSE(l1.get(Target::kLbbb));

  // likelihood 0 still counts as present
  const auto l2 = derive_labels({{"ILBBB", 0.0}});
  CHECK(l2.get(Target::kLbbb));

  CHECK_FALSE(derive_labels({}).any());
}

TEST_CASE("complete and incomplete forms are indistinguishable") {
  Prng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, double> extra;
    if (rng.uniform() < 0.5) extra["STACH"] = 100.0;
    if (rng.uniform() < 0.5) extra["NORM"] = rng.uniform(0, 100);

    auto with_complete = extra;
    with_complete["CRBBB"] = rng.uniform(0, 100);
    auto with_incomplete = extra;
    with_incomplete["IRBBB"] = rng.uniform(0, 100);
    CHECK(derive_labels(with_complete) == derive_labels(with_incomplete));

    auto lc = extra;
    lc["CLBBB"] = 100.0;
    auto li = extra;
    li["ILBBB"] = 100.0;
    CHECK(derive_labels(lc) == derive_labels(li));
  }
}

TEST_CASE("unknown codes are ignored") {
  const auto labels = derive_labels({{"NORM", 100.0}, {"SR", 0.0}, {"IMI", 50.0}});
  CHECK_FALSE(labels.any());
}

TEST_CASE("scp map parses quoted and bare forms") {
  const auto quoted = parse_scp_codes("{'CRBBB': 100.0, 'AFIB': 80.0}");
  REQUIRE(quoted.size() == 2);
  CHECK(quoted.at("CRBBB") == 100.0);
  CHECK(quoted.at("AFIB") == 80.0);

  const auto bare = parse_scp_codes("{CRBBB:100,AFIB:80}");
  CHECK(bare == quoted);

  CHECK(parse_scp_codes("{}").empty());
  CHECK(parse_scp_codes("").empty());
}

}  // TEST_SUITE

TEST_SUITE("manifest") {

TEST_CASE("filter keeps the paper's inclusion rules") {
  std::vector<RecordMeta> metas = {
      make_meta("a", 17.0, 1),   // underage
      make_meta("b", 40.0, 2),   // 8.5 s -> duration reject
      make_meta("c", 40.0, 3),   // ok, 10 s 500 Hz
      make_meta("d", 40.0, 4),   // ok, 9 s 1000 Hz
      make_meta("e", 40.0, 5),   // 250 Hz -> rate reject
      make_meta("f", 40.0, 6),   // 8 leads -> lead reject
      make_meta("g", 40.0, 7),   // no header
  };
  std::vector<WfdbHeader> headers = {
      make_header("a", 12, 500, 5000), make_header("b", 12, 500, 4250),
      make_header("c", 12, 500, 5000), make_header("d", 12, 1000, 9000),
      make_header("e", 12, 250, 2500), make_header("f", 8, 500, 5000),
  };

  const auto result = filter_records(metas, headers);
  REQUIRE(result.manifest.rows.size() == 2);
  CHECK(result.manifest.rows[0].record_id == "c");
  CHECK(result.manifest.rows[1].record_id == "d");
  CHECK(result.manifest.rows[1].duration_s == doctest::Approx(9.0));

  REQUIRE(result.rejected.size() == 5);
  std::map<std::string, FilterReason> reasons;
  for (const auto& r : result.rejected) reasons[r.record_id] = r.reason;
  CHECK(reasons.at("a") == FilterReason::kUnderage);
  CHECK(reasons.at("b") == FilterReason::kDuration);
  CHECK(reasons.at("e") == FilterReason::kSamplingRate);
  CHECK(reasons.at("f") == FilterReason::kLeadCount);
  CHECK(reasons.at("g") == FilterReason::kNoHeader);
}

TEST_CASE("exact boundary: age 18 and durations 9 and 10 are kept") {
  std::vector<RecordMeta> metas = {make_meta("x", 18.0, 1), make_meta("y", 90.0, 2)};
  std::vector<WfdbHeader> headers = {make_header("x", 12, 500, 4500),
                                     make_header("y", 12, 1000, 10000)};
  const auto result = filter_records(metas, headers);
  CHECK(result.manifest.rows.size() == 2);
}

TEST_CASE("filtering is idempotent") {
  std::vector<RecordMeta> metas;
  std::vector<WfdbHeader> headers;
  Prng rng(11);
  for (int i = 0; i < 60; ++i) {
    const std::string id = "r" + std::to_string(i);
    metas.push_back(make_meta(id, rng.uniform(10, 95), 1 + i % 10));
    headers.push_back(make_header(id, rng.uniform() < 0.9 ? 12 : 8,
                                  rng.uniform() < 0.5 ? 500 : 1000,
                                  rng.uniform() < 0.8 ? 5000 : 4000));
    if (headers.back().sampling_rate == 1000) headers.back().num_samples *= 2;
  }
  const auto once = filter_records(metas, headers);

  // Re-filter the survivors: nothing changes.
  std::vector<RecordMeta> kept_metas;
  std::vector<WfdbHeader> kept_headers;
  for (const auto& row : once.manifest.rows) {
    for (const auto& m : metas) {
      if (m.record_id == row.record_id) kept_metas.push_back(m);
    }
    for (const auto& h : headers) {
      if (h.record_name == row.record_id) kept_headers.push_back(h);
    }
  }
  const auto twice = filter_records(kept_metas, kept_headers);
  CHECK(twice.rejected.empty());
  REQUIRE(twice.manifest.rows.size() == once.manifest.rows.size());
  for (std::size_t i = 0; i < twice.manifest.rows.size(); ++i) {
    CHECK(twice.manifest.rows[i].record_id == once.manifest.rows[i].record_id);
  }
}

TEST_CASE("split_by_fold maps folds to splits") {
  DatasetManifest manifest;
  for (int fold = 1; fold <= 10; ++fold) {
    ManifestRow row;
    row.record_id = "f" + std::to_string(fold);
    row.strat_fold = fold;
    manifest.rows.push_back(row);
  }
  split_by_fold(manifest);
  for (const auto& row : manifest.rows) {
    const int fold = *row.strat_fold;
    if (fold == 10) CHECK(row.split == Split::kTest);
    else if (fold == 9) CHECK(row.split == Split::kVal);
    else CHECK(row.split == Split::kTrain);
  }

  // every row gets exactly one split; counts partition the manifest
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& row : manifest.rows) {
    if (row.split == Split::kTrain) ++train;
    if (row.split == Split::kVal) ++val;
    if (row.split == Split::kTest) ++test;
  }
  CHECK(train + val + test == manifest.rows.size());
  CHECK(train == 8);
  CHECK(val == 1);
  CHECK(test == 1);
}

TEST_CASE("split_by_fold needs folds") {
  DatasetManifest manifest;
  ManifestRow row;
  row.record_id = "nofold";
  manifest.rows.push_back(row);
  CHECK_THROWS_AS(split_by_fold(manifest), MissingFold);
}

TEST_CASE("manifest CSV round trip") {
  DatasetManifest manifest;
  manifest.provenance = "unit test";
  Prng rng(3);
  for (int i = 0; i < 25; ++i) {
    ManifestRow row;
    row.record_id = "m" + std::to_string(i);
    row.path = "records/m" + std::to_string(i);
    row.sampling_rate = rng.uniform() < 0.5 ? 500 : 1000;
    row.duration_s = rng.uniform() < 0.5 ? 10.0 : 9.0;
    row.age = 18 + static_cast<double>(rng.below(70));
    row.sex = static_cast<Sex>(rng.below(3));
    row.strat_fold = 1 + static_cast<int>(rng.below(10));
    for (Target t : kAllTargets) row.labels.set(t, rng.uniform() < 0.3);
    row.split = static_cast<Split>(rng.below(3));
    manifest.rows.push_back(row);
  }

  const auto path = std::filesystem::temp_directory_path() / "ecgdnn_manifest_test.csv";
  write_manifest_csv(manifest, path.string());
  const auto back = read_manifest_csv(path.string());
  std::filesystem::remove(path);

  CHECK(back.provenance == manifest.provenance);
  REQUIRE(back.rows.size() == manifest.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].record_id == manifest.rows[i].record_id);
    CHECK(back.rows[i].labels == manifest.rows[i].labels);
    CHECK(back.rows[i].split == manifest.rows[i].split);
    CHECK(back.rows[i].age == doctest::Approx(manifest.rows[i].age));
    CHECK(back.rows[i].strat_fold == manifest.rows[i].strat_fold);
  }
}

TEST_CASE("metadata CSV parsing, PTB-XL style") {
  const auto path = std::filesystem::temp_directory_path() / "ecgdnn_meta_test.csv";
  write_text_file(path.string(),
                  "ecg_id,age,sex,height,scp_codes,strat_fold,filename_hr\n"
                  "1,56.0,1,170,\"{'NORM': 100.0, 'SR': 0.0}\",3,records500/00000/00001_hr\n"
                  "2,19.0,0,,\"{'CRBBB': 80.0}\",10,records500/00000/00002_hr\n");
  const auto metas = load_metadata_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(metas.size() == 2);
  CHECK(metas[0].record_id == "1");
  CHECK(metas[0].age == doctest::Approx(56.0));
  CHECK(metas[0].sex == Sex::kFemale);
  CHECK(metas[0].scp_codes.size() == 2);
  CHECK(metas[0].strat_fold == 3);
  CHECK(metas[0].path == "records500/00000/00001_hr");
  CHECK(derive_labels(metas[1].scp_codes).get(Target::kRbbb));
}

}  // TEST_SUITE
