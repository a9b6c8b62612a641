#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/metadata.hpp"
#include "ecgdnn/preprocess.hpp"
#include "ecgdnn/wfdb.hpp"

namespace ecgdnn {

/// Synthetic 12-lead corpus: AR(1)-smoothed noise background, with the
/// positive class carrying a windowed sinusoidal burst on a few leads.
/// The defect fractions inject records the ingest filters must reject.
struct SynthSpec {
  int n_records = 200;
  double prevalence = 0.4;
  std::uint64_t seed = 1;
  Target target = Target::kAfib;

  double burst_freq_hz = 7.0;
  std::vector<int> burst_leads = {0, 1, 2};
  double burst_amplitude = 1.0;  // mV
  double burst_duration_s = 3.0;

  double noise_rho = 0.95;   // AR(1) pole; lower = whiter spectrum
  double noise_sigma = 0.3;  // innovation std, mV
  double white_sigma = 0.05; // extra white noise, mV

  double frac_1000hz = 0.2;
  double frac_9s = 0.15;

  double frac_underage = 0.0;
  double frac_flat_lead = 0.0;
  double frac_short = 0.0;  // 8.5 s records, outside the duration filter
};

/// Deterministically generates record `index` of the corpus; `positive` et
/// al. are decided inside from the spec and index.
struct SynthRecord {
  PhysicalRecord record;
  RecordMeta meta;
  bool positive = false;
  bool defect = false;  // built to be rejected by a filter
};

SynthRecord synth_record(const SynthSpec& spec, int index);

/// Writes WFDB pairs under out_dir/records plus out_dir/metadata.csv.
/// Returns the metadata path.
std::string write_synth_corpus(const SynthSpec& spec, const std::string& out_dir);

/// Clean in-memory shortcut for tests: generates records, runs the
/// preprocessing pipeline, and keeps the accepted samples (defect fractions
/// should be zero when using this).
std::vector<PreprocessedSample> synth_preprocessed(const SynthSpec& spec);

}  // namespace ecgdnn
