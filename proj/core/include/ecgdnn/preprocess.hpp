#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/wfdb.hpp"

namespace ecgdnn {

struct PipelineConfig {
  double target_rate = 500.0;   // Hz
  int target_len = 5000;        // samples (10 s)
  double zscore_epsilon = 1e-8;
  int fir_taps = 63;            // odd
  double fir_cutoff = 0.9;      // fraction of the output Nyquist
  double flat_tolerance = 0.0;  // max-min <= tolerance flags a lead as flat
};

inline constexpr int kNumLeads = 12;
inline constexpr int kSampleLen = 5000;

/// Fixed-shape network input: 12 x 5000 float32, row-major by lead.
struct PreprocessedSample {
  std::string record_id;
  std::vector<float> tensor;  // kNumLeads * kSampleLen
  LabelSet labels;
};

enum class RejectReason : std::uint8_t {
  kFlatLead = 0,
  kUnsupportedRate = 1,
  kTooShort = 2,
  kTooLong = 3,
  kNotTwelveLeads = 4,
  kNonFinite = 5,
};

std::string_view reject_reason_name(RejectReason r);

struct Rejection {
  RejectReason reason;
  std::string detail;
};

using PipelineOutcome = std::variant<PreprocessedSample, Rejection>;

/// Indices of leads whose max - min is <= config tolerance (exactly 0 by
/// default), i.e. constant leads from disconnected electrodes.
std::vector<int> detect_flat_leads(const PhysicalRecord& rec, double tolerance = 0.0);

/// Designs the Hamming-windowed-sinc low-pass used for 2:1 decimation,
/// normalized to unit DC gain. Exposed for tests.
std::vector<double> design_decimation_fir(int taps, double cutoff_fraction);

/// 500 Hz -> identity copy. 1000 Hz -> zero-phase FIR low-pass
/// (cutoff 0.9 x 250 Hz, 63 taps, edge-reflection padding) then keep every
/// second sample; output length ceil(n/2). Other rates: UnsupportedRate.
std::vector<double> resample_to_500(const std::vector<double>& signal, double fs_in,
                                    const PipelineConfig& config = {});

/// Appends zeros to reach exactly target_len samples. Throws TooShort for
/// inputs under 9 s worth of samples and TooLong over target_len.
std::vector<double> zero_pad(const std::vector<double>& signal,
                             const PipelineConfig& config = {});

/// (x - mean) / (population_std + epsilon) over the whole padded lead.
std::vector<double> zscore_lead(const std::vector<double>& signal, double epsilon = 1e-8);

/// Full per-record pipeline: flat-lead check, per-lead resample, pad,
/// z-score, emit float32. Never throws on finite input; returns Rejection.
PipelineOutcome run_pipeline(const PhysicalRecord& rec, const LabelSet& labels,
                             const PipelineConfig& config = {});

}  // namespace ecgdnn
