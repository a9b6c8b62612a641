#include "ecgdnn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/prng.hpp"

namespace ecgdnn {

namespace {

// SCP statement emitted for a positive record of each target.
std::string_view scp_code_for(Target t) {
  switch (t) {
    case Target::kRbbb: return "CRBBB";
    case Target::kLbbb: return "CLBBB";
    default: return target_name(t);
  }
}

}  // namespace

SynthRecord synth_record(const SynthSpec& spec, int index) {
  Prng rng(Prng::derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
  SynthRecord out;

  out.positive = rng.uniform() < spec.prevalence;
  const bool at_1000 = rng.uniform() < spec.frac_1000hz;
  const bool short_9s = rng.uniform() < spec.frac_9s;
  const bool underage = rng.uniform() < spec.frac_underage;
  const bool flat = rng.uniform() < spec.frac_flat_lead;
  const bool too_short = rng.uniform() < spec.frac_short;
  out.defect = underage || flat || too_short;

  const double fs = at_1000 ? 1000.0 : 500.0;
  const double duration = too_short ? 8.5 : (short_9s ? 9.0 : 10.0);
  const std::size_t n = static_cast<std::size_t>(std::lround(fs * duration));

  char id[32];
  std::snprintf(id, sizeof(id), "syn%06d", index);
  out.record.record_id = id;
  out.record.sampling_rate = fs;
  out.record.signals.assign(kNumLeads, std::vector<double>(n));

  // AR(1) background plus a little white noise, independent per lead.
  for (int lead = 0; lead < kNumLeads; ++lead) {
    auto& x = out.record.signals[static_cast<std::size_t>(lead)];
    double state = rng.normal(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < n; ++i) {
      state = spec.noise_rho * state + spec.noise_sigma * rng.normal();
      x[i] = state + spec.white_sigma * rng.normal();
    }
  }

  if (out.positive) {
    const double burst_len = std::min(spec.burst_duration_s, duration);
    const double start_max = duration - burst_len;
    const double start_s = rng.uniform(0.0, start_max);
    const std::size_t i0 = static_cast<std::size_t>(std::lround(start_s * fs));
    const std::size_t count = static_cast<std::size_t>(std::lround(burst_len * fs));
    for (int lead : spec.burst_leads) {
      auto& x = out.record.signals[static_cast<std::size_t>(lead)];
      for (std::size_t i = 0; i < count && i0 + i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double window = 0.5 - 0.5 * std::cos(2.0 * M_PI * t / burst_len);  // Hann
        x[i0 + i] += spec.burst_amplitude * window *
                     std::sin(2.0 * M_PI * spec.burst_freq_hz * t);
      }
    }
  }

  if (flat) {
    const int lead = static_cast<int>(rng.below(kNumLeads));
    auto& x = out.record.signals[static_cast<std::size_t>(lead)];
    std::fill(x.begin(), x.end(), 0.2);
  }

  out.meta.record_id = out.record.record_id;
  out.meta.age = underage ? rng.uniform(8.0, 17.0) : rng.uniform(20.0, 90.0);
  out.meta.sex = index % 2 == 0 ? Sex::kFemale : Sex::kMale;
  out.meta.strat_fold = 1 + index % 10;
  if (out.positive) {
    out.meta.scp_codes[std::string(scp_code_for(spec.target))] = 100.0;
  } else {
    out.meta.scp_codes["NORM"] = 100.0;
  }
  out.meta.path = std::string("records/") + id;
  return out;
}

std::string write_synth_corpus(const SynthSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "records");

  std::string csv = "ecg_id,age,sex,scp_codes,strat_fold,filename_hr\n";
  const std::vector<double> gains(kNumLeads, 1000.0);
  const std::vector<int> baselines(kNumLeads, 0);

  for (int i = 0; i < spec.n_records; ++i) {
    const SynthRecord rec = synth_record(spec, i);
    const std::string rec_path = (fs::path(out_dir) / rec.meta.path).string();
    write_wfdb_files(rec_path, rec.record, gains, baselines);

    std::string codes = "{";
    bool first = true;
    for (const auto& [code, likelihood] : rec.meta.scp_codes) {
      if (!first) codes += ", ";
      char buf[64];
      std::snprintf(buf, sizeof(buf), "'%s': %.1f", code.c_str(), likelihood);
      codes += buf;
      first = false;
    }
    codes += "}";

    char age[32];
    std::snprintf(age, sizeof(age), "%.1f", rec.meta.age);
    csv += csv_join({rec.meta.record_id, age,
                     rec.meta.sex == Sex::kMale ? "0" : "1", codes,
                     std::to_string(*rec.meta.strat_fold), rec.meta.path}) +
           "\n";
  }
  const std::string metadata_path = (fs::path(out_dir) / "metadata.csv").string();
  write_text_file(metadata_path, csv);
  return metadata_path;
}

std::vector<PreprocessedSample> synth_preprocessed(const SynthSpec& spec) {
  std::vector<PreprocessedSample> samples;
  samples.reserve(static_cast<std::size_t>(spec.n_records));
  for (int i = 0; i < spec.n_records; ++i) {
    const SynthRecord rec = synth_record(spec, i);
    LabelSet labels;
    labels.set(spec.target, rec.positive);
    auto outcome = run_pipeline(rec.record, labels);
    if (auto* sample = std::get_if<PreprocessedSample>(&outcome)) {
      samples.push_back(std::move(*sample));
    } else {
      throw Error("synthetic record " + rec.record.record_id + " rejected: " +
                  std::get<Rejection>(outcome).detail);
    }
  }
  return samples;
}

}  // namespace ecgdnn
