#include "ecgdnn/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ecgdnn/errors.hpp"

namespace ecgdnn {

std::string_view reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::kFlatLead: return "flat_lead";
    case RejectReason::kUnsupportedRate: return "unsupported_rate";
    case RejectReason::kTooShort: return "too_short";
    case RejectReason::kTooLong: return "too_long";
    case RejectReason::kNotTwelveLeads: return "not_twelve_leads";
    case RejectReason::kNonFinite: return "non_finite";
  }
  return "?";
}

std::vector<int> detect_flat_leads(const PhysicalRecord& rec, double tolerance) {
  std::vector<int> flat;
  for (std::size_t lead = 0; lead < rec.signals.size(); ++lead) {
    const auto& x = rec.signals[lead];
    if (x.empty()) {
      flat.push_back(static_cast<int>(lead));
      continue;
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi - *lo <= tolerance) flat.push_back(static_cast<int>(lead));
  }
  return flat;
}

std::vector<double> design_decimation_fir(int taps, double cutoff_fraction) {
  if (taps < 3 || taps % 2 == 0) throw ConfigInvalid("fir_taps must be odd and >= 3");
  // Cutoff as a fraction of the *output* Nyquist; the input runs at twice
  // the output rate, so the normalized input-band cutoff is half of it.
  const double fc = 0.5 * cutoff_fraction / 2.0;  // cycles per input sample
  const int mid = (taps - 1) / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const int k = n - mid;
    const double sinc = k == 0 ? 2.0 * fc : std::sin(2.0 * M_PI * fc * k) / (M_PI * k);
    const double window = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = sinc * window;
    sum += h[static_cast<std::size_t>(n)];
  }
  for (auto& v : h) v /= sum;  // unit DC gain
  return h;
}

namespace {

// Index into x with reflection about the edge samples: x[-1] -> x[1],
// x[n] -> x[n-2]. Signals are far longer than the filter, so one fold is
// enough.
inline std::size_t reflect_index(std::int64_t i, std::int64_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<double> resample_to_500(const std::vector<double>& signal, double fs_in,
                                    const PipelineConfig& config) {
  if (fs_in == config.target_rate) return signal;
  if (fs_in != 2.0 * config.target_rate) {
    throw UnsupportedRate("sampling rate " + std::to_string(fs_in) +
                          " Hz not supported (500 or 1000)");
  }
  if (signal.empty()) return {};

  const auto h = design_decimation_fir(config.fir_taps, config.fir_cutoff);
  const std::int64_t n = static_cast<std::int64_t>(signal.size());
  const std::int64_t mid = (config.fir_taps - 1) / 2;
  const std::size_t out_len = static_cast<std::size_t>((n + 1) / 2);
  std::vector<double> out(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const std::int64_t center = static_cast<std::int64_t>(2 * j);
    double acc = 0.0;
    for (std::int64_t t = 0; t < config.fir_taps; ++t) {
      acc += h[static_cast<std::size_t>(t)] * signal[reflect_index(center + t - mid, n)];
    }
    out[j] = acc;
  }
  return out;
}

std::vector<double> zero_pad(const std::vector<double>& signal, const PipelineConfig& config) {
  const std::size_t target = static_cast<std::size_t>(config.target_len);
  const std::size_t min_len = static_cast<std::size_t>(
      std::lround(9.0 * config.target_rate));
  if (signal.size() > target) {
    throw TooLong("lead has " + std::to_string(signal.size()) + " samples, max " +
                  std::to_string(target));
  }
  if (signal.size() < min_len) {
    throw TooShort("lead has " + std::to_string(signal.size()) + " samples, min " +
                   std::to_string(min_len));
  }
  std::vector<double> out = signal;
  out.resize(target, 0.0);
  return out;
}

std::vector<double> zscore_lead(const std::vector<double>& signal, double epsilon) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : signal) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + epsilon;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (signal[i] - mean) / denom;
  return out;
}

PipelineOutcome run_pipeline(const PhysicalRecord& rec, const LabelSet& labels,
                             const PipelineConfig& config) {
  if (rec.signals.size() != static_cast<std::size_t>(kNumLeads)) {
    return Rejection{RejectReason::kNotTwelveLeads,
                     "record has " + std::to_string(rec.signals.size()) + " leads"};
  }
  for (const auto& lead : rec.signals) {
    for (double v : lead) {
      if (!std::isfinite(v)) {
        return Rejection{RejectReason::kNonFinite, "non-finite sample in " + rec.record_id};
      }
    }
  }
  const auto flat = detect_flat_leads(rec, config.flat_tolerance);
  if (!flat.empty()) {
    std::string detail = "flat lead(s):";
    for (int idx : flat) detail += " " + std::to_string(idx);
    return Rejection{RejectReason::kFlatLead, detail};
  }

  PreprocessedSample sample;
  sample.record_id = rec.record_id;
  sample.labels = labels;
  sample.tensor.resize(static_cast<std::size_t>(kNumLeads) * config.target_len);
  for (int lead = 0; lead < kNumLeads; ++lead) {
    std::vector<double> x;
    try {
      x = resample_to_500(rec.signals[static_cast<std::size_t>(lead)], rec.sampling_rate,
                          config);
      x = zero_pad(x, config);
    } catch (const UnsupportedRate& e) {
      return Rejection{RejectReason::kUnsupportedRate, e.what()};
    } catch (const TooShort& e) {
      return Rejection{RejectReason::kTooShort, e.what()};
    } catch (const TooLong& e) {
      return Rejection{RejectReason::kTooLong, e.what()};
    }
    x = zscore_lead(x, config.zscore_epsilon);
    float* dst = sample.tensor.data() + static_cast<std::size_t>(lead) * config.target_len;
    for (int i = 0; i < config.target_len; ++i) {
      dst[i] = static_cast<float>(x[static_cast<std::size_t>(i)]);
    }
  }
  return sample;
}

}  // namespace ecgdnn
